# Licensed under a 3-clause BSD style license - see LICENSE.rst
"""Trait-allocation inference under Stable transform-scaled process priors:
exact marginals, unseen-trait prediction, simulation, empirical-Bayes fitting
and document classification.  The command line lives in stsp.cli.
"""

__version__ = None  # Placeholder to trick flake8

# Packages may add whatever they like to this file, but
# should keep this content at the top.
# ----------------------------------------------------------------------------
from ._astropy_init import *  # noqa

# ----------------------------------------------------------------------------

__all__ = []
