"""Console message functions with counting features for errors, warnings,
and info, shared by every stsp module and the command line.

>>> from stsp import log
>>> log.set_test_mode()
>>> log.reset()

>>> log.warning("grid tail above tolerance, doubling.")
WARNING - grid tail above tolerance, doubling.

>>> log.error("objective not finite at start", 3)
ERROR - objective not finite at start 3

>>> log.info("fitted", "nb_stsp", "in", 12, "iterations")
INFO - fitted nb_stsp in 12 iterations

>>> log.status()
(1, 1, 1)

>>> log.standard_status()
INFO - 1 errors
INFO - 1 warnings
INFO - 1 infos

Verbose messages are suppressed unless STSP_VERBOSITY or set_verbose()
raises the level:

>>> log.verbose("quadrature fallback for q =", 40)

>>> old_verbose = log.set_verbose()
>>> log.verbose("quadrature fallback for q =", 40)
DEBUG - quadrature fallback for q = 40

>>> log.verbose("per-evaluation trace", verbosity=80)

>>> log.set_verbose(80)
50
>>> log.verbose("per-evaluation trace", verbosity=80)
DEBUG - per-evaluation trace

PP formatting is only paid for when the message is emitted:

>>> log.verbose("params", log.PP({"alpha": 0.3}), verbosity=90)
>>> log.verbose("params", log.PP({"alpha": 0.3}), verbosity=80)
DEBUG - params {'alpha': 0.3}

>>> _ = log.set_verbose(old_verbose)
"""
import sys
import os
import logging
import pprint
import contextlib

DEFAULT_VERBOSITY_LEVEL = 50


class StspLogger:
    """Counting front end for the named `logging` logger used by stsp.

    Parameters
    ----------
    name : str
        Name of the underlying `logging.Logger`.
    enable_console : bool
        Attach a stream handler writing to stderr.
    level : int
        `logging` level of the logger and its handlers.
    enable_time : bool
        Prefix messages with a timestamp.

    Notes
    -----
    Verbosity is read from STSP_VERBOSITY: -1 squelches info, -2 squelches
    warnings, 0 disables debug output, 50 is the default debug level and 100
    shows everything.
    """

    def __init__(self, name="STSP", enable_console=True, level=logging.DEBUG, enable_time=True):
        self.name = name
        self.handlers = []
        self.logger = logging.getLogger(name)
        self.logger.setLevel(level)
        self.logger.propagate = False
        self.level = level
        self.formatter = self.set_formatter(enable_time)
        self.console = None
        if enable_console:
            self.add_console_handler(stream=sys.stderr)

        self.errors = 0
        self.warnings = 0
        self.infos = 0
        self.debugs = 0

        verbose_level = os.environ.get("STSP_VERBOSITY", 0)
        try:
            self.verbose_level = int(verbose_level)
        except ValueError:
            self.verbose_level = DEFAULT_VERBOSITY_LEVEL
            self.warn(
                "Bad format for STSP_VERBOSITY =",
                repr(verbose_level),
                "Use e.g. -1 to squelch info, 0 for no debug, 50 for default debug output. 100 max debug.",
            )

    def set_formatter(self, enable_time=True):
        """Set the formatter attribute of `self` to a logging.Formatter and return it."""
        prefix = "%(asctime)s - " if enable_time else ""
        self.formatter = logging.Formatter(f"{prefix}%(levelname)s - %(message)s")
        for handler in self.handlers:
            handler.setFormatter(self.formatter)
        return self.formatter

    def format(self, *args, **keys):
        sep = keys.get("sep", " ")
        return sep.join([str(arg) for arg in args])

    def info(self, *args, **keys):
        self.infos += 1
        if self.verbose_level > -1:
            self.logger.info(self.format(*args, **keys))

    def warn(self, *args, **keys):
        self.warnings += 1
        if self.verbose_level > -2:
            self.logger.warning(self.format(*args, **keys))

    def error(self, *args, **keys):
        self.errors += 1
        if self.verbose_level > -3:
            self.logger.error(self.format(*args, **keys))

    def debug(self, *args, **keys):
        self.debugs += 1
        self.logger.debug(self.format(*args, **keys))

    def should_output(self, *args, **keys):
        verbosity = keys.get("verbosity", DEFAULT_VERBOSITY_LEVEL)
        return not self.verbose_level < verbosity

    def verbose(self, *args, **keys):
        if self.should_output(*args, **keys):
            self.debug(*args, **keys)

    def status(self):
        return self.errors, self.warnings, self.infos

    def reset(self):
        self.errors = self.warnings = self.infos = self.debugs = 0

    def set_verbose(self, level=True):
        if level is True:
            level = DEFAULT_VERBOSITY_LEVEL
        elif level is False:
            level = 0
        if not -3 <= level <= 100:
            raise ValueError("verbosity level must be in range -3..100")
        old_verbose = self.verbose_level
        self.verbose_level = level
        return old_verbose

    def add_console_handler(self, stream=sys.stderr):
        if self.console is None:
            self.console = self.add_stream_handler(stream, level=self.level)

    def remove_console_handler(self):
        if self.console is not None:
            self.remove_handler(self.console)
            self.console = None

    def add_stream_handler(self, filelike, level=logging.DEBUG):
        handler = logging.StreamHandler(filelike)
        return self._add_handler(handler, level)

    def add_file_handler(self, path, level=logging.DEBUG):
        handler = logging.FileHandler(path, encoding="utf-8")
        return self._add_handler(handler, level)

    def _add_handler(self, handler, level):
        handler.setLevel(level)
        handler.setFormatter(self.formatter)
        self.handlers.append(handler)
        self.logger.addHandler(handler)
        return handler

    def remove_handler(self, handler):
        self.handlers.remove(handler)
        self.logger.removeHandler(handler)
        handler.close()


THE_LOGGER = StspLogger("STSP", enable_time=os.environ.get("STSP_LOG_TIME", "1") != "0")

info = THE_LOGGER.info
error = THE_LOGGER.error
warning = THE_LOGGER.warn
verbose = THE_LOGGER.verbose
status = THE_LOGGER.status
reset = THE_LOGGER.reset
set_verbose = THE_LOGGER.set_verbose
add_console_handler = THE_LOGGER.add_console_handler
remove_console_handler = THE_LOGGER.remove_console_handler


def set_test_mode():
    """Route log messages to standard output for testing with doctest."""
    remove_console_handler()
    add_console_handler(stream=sys.stdout)
    set_log_time(False)


def set_log_time(enable_time=False):
    """Set the flag for including time in log messages.  Overrides STSP_LOG_TIME."""
    THE_LOGGER.set_formatter(enable_time)


@contextlib.contextmanager
def log_to_file(path):
    """Copy every message issued inside the with-block to the file at `path`."""
    handler = THE_LOGGER.add_file_handler(path)
    try:
        yield handler
    finally:
        THE_LOGGER.remove_handler(handler)


# ===========================================================================


class PP:
    """A wrapper to defer pretty printing until after it's known a verbose
    message will definitely be output.
    """

    def __init__(self, ppobj):
        self.ppobj = ppobj

    def __str__(self):
        return pprint.pformat(self.ppobj)


# ===========================================================================


def standard_status():
    """Print out errors, warnings, and infos."""
    errors, warnings, infos = THE_LOGGER.status()
    info(errors, "errors")
    info(warnings, "warnings")
    info(infos, "infos")


def divider(name="", char="-", n=75, func=info, **keys):
    """Create a log divider line consisting of `char` repeated `n` times
    possibly with `name` injected into the center of the divider.
    Output it as a string to logging function `func` defaulting to info().
    """
    if name:
        n2 = (n - len(name) - 2) // 2
        func(char * n2, name, char * n2, **keys)
    else:
        func(char * n, **keys)


# ===================================================================


def test():
    from stsp import log
    import doctest

    return doctest.testmod(log)


if __name__ == "__main__":
    print(test())
