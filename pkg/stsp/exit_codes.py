"""These numerical values are returned by the stsp command line as process
exit status.

Scripts driving stsp (simulation campaigns, batch fits) can rely on them to
tell a bad invocation or parameter file apart from a numerical failure that
may succeed with different settings.

Any errors not explicitly handled by stsp are mapped to GENERIC_ERROR.
"""

_MEMORY_ERROR_NAMES = ["STSP_MEMORY_ERROR"]


_EXIT_CODES = dict(
    SUCCESS=0,
    GENERIC_ERROR=1,
    CONFIG_ERROR=2,
    NUMERICAL_ERROR=3,
    STSP_MEMORY_ERROR=32,
)


_NAME_EXPLANATIONS = dict(
    SUCCESS="Processing completed successfully.",
    GENERIC_ERROR="An error with no specific stsp handling occurred somewhere.",
    CONFIG_ERROR="The command line, parameter file, or input data was invalid for the requested model.",
    NUMERICAL_ERROR="A quadrature, sampler, or optimizer failed to produce a finite result.",
    STSP_MEMORY_ERROR="stsp generated a Python MemoryError during processing.",
)

_CODE_TO_NAME = dict()

# Set up module global variables / named constants
for (name, code) in _EXIT_CODES.items():
    globals()[name] = code
    _CODE_TO_NAME[code] = name
    _CODE_TO_NAME[str(code)] = name
    assert name in _NAME_EXPLANATIONS

# -----------------------------------------------------------------------------------------------


def explain(exit_code):
    """Return the text explanation for the specified `exit_code`.

    >>> explain(SUCCESS)
    'EXIT - SUCCESS[0]: Processing completed successfully.'

    >>> explain("CONFIG_ERROR")
    'EXIT - CONFIG_ERROR[2]: The command line, parameter file, or input data was invalid for the requested model.'

    >>> explain(NUMERICAL_ERROR)
    'EXIT - NUMERICAL_ERROR[3]: A quadrature, sampler, or optimizer failed to produce a finite result.'

    >>> explain("3")
    'EXIT - NUMERICAL_ERROR[3]: A quadrature, sampler, or optimizer failed to produce a finite result.'

    >>> explain(999)
    'EXIT - unhandled exit code: 999'
    """
    if exit_code in _CODE_TO_NAME:
        name = _CODE_TO_NAME[exit_code]
        exit_code = _EXIT_CODES[name]
    elif exit_code in _NAME_EXPLANATIONS:
        name = exit_code
        exit_code = _EXIT_CODES[name]
    else:
        return f"EXIT - unhandled exit code: {exit_code}"
    return f"EXIT - {name}[{exit_code}]: {_NAME_EXPLANATIONS[name]}"


def is_memory_error(exit_code):
    """Return  True IFF `exit_code` indicates some kind of memory error.

    exit_code may be specified as a name string or integer exit code.

    >>> is_memory_error(GENERIC_ERROR)
    False

    >>> is_memory_error(STSP_MEMORY_ERROR)
    True

    >>> is_memory_error("STSP_MEMORY_ERROR")
    True
    """
    return (exit_code in [_EXIT_CODES[name] for name in _MEMORY_ERROR_NAMES]) or (exit_code in _MEMORY_ERROR_NAMES)


# -----------------------------------------------------------------------------------------------


def test():  # pragma: no cover
    from doctest import testmod
    from . import exit_codes

    return testmod(exit_codes)


if __name__ == "__main__":  # pragma: no cover
    print(test())
