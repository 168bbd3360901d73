import logging

logger = logging.getLogger(__name__)


class GfouError(Exception):
    exit_code = 4
    message = "Numerical Failure"


class ConfigurationError(GfouError, ValueError):
    exit_code = 1
    message = "Configuration Error"


class DomainError(ConfigurationError):
    message = "Domain Error"


class ComparisonViolation(GfouError):
    exit_code = 2
    message = "Inequality Violated Beyond Budget"


class InconclusiveError(GfouError):
    exit_code = 3
    message = "Inconclusive"


class SpectralTruncationError(InconclusiveError):
    message = "Spectral Truncation"


class NumericalError(GfouError, ArithmeticError):
    exit_code = 4
    message = "Numerical Failure"


_HANDLERS = {}


def register_error_handlers(handlers=None):
    """Register the exit code reported for each error class.

    Later registrations win; lookups walk the exception's MRO so subclasses
    fall back to the nearest registered parent.
    """
    defaults = {
        ConfigurationError: ConfigurationError.exit_code,
        ComparisonViolation: ComparisonViolation.exit_code,
        InconclusiveError: InconclusiveError.exit_code,
        NumericalError: NumericalError.exit_code,
        GfouError: GfouError.exit_code,
    }
    _HANDLERS.update(defaults)
    if handlers:
        _HANDLERS.update(handlers)
    return _HANDLERS


def exit_code_for(exc):
    if not _HANDLERS:
        register_error_handlers()
    for cls in type(exc).__mro__:
        if cls in _HANDLERS:
            return _HANDLERS[cls]
    return NumericalError.exit_code


def describe(exc):
    label = getattr(exc, "message", "Unexpected Error")
    msg = str(exc) or label
    return f"{label}: {msg}" if msg != label else msg
