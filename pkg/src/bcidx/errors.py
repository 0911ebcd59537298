"""Exception hierarchy shared across the package."""


class BCIDXError(Exception):
    """Base class for all errors raised by bcidx."""


class ModelError(BCIDXError, ValueError):
    """Malformed classifier (bad structure, tables that do not normalize)."""


class UnknownVariable(BCIDXError, KeyError):
    def __str__(self) -> str:
        return f"unknown variable: {self.args[0]!r}"


class IncompleteInput(BCIDXError, ValueError):
    pass


class DomainError(BCIDXError, ValueError):
    pass


class DegenerateDistribution(BCIDXError, ArithmeticError):
    pass


class DataError(BCIDXError, ValueError):
    """Bad dataset, config file or score file."""


class BudgetExceeded(BCIDXError, RuntimeError):
    pass


class AttributionUnavailable(BCIDXError, LookupError):
    pass


class KitError(BCIDXError, ValueError):
    """Kit construction or kit/graph mismatch."""
