"""Exception types shared across the package."""


class AutotabError(Exception):
    """Base class for all errors raised by autotab."""


class DataError(AutotabError):
    """Malformed or inconsistent input data (CSV, columns, targets)."""


class ConfigError(AutotabError):
    """Invalid configuration, parameters, or artifact version."""


class BudgetError(AutotabError):
    """The time budget ran out before the guaranteed minimum was trained."""
