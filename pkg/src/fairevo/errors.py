"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes, so raise the most specific class.
"""


class FairEvoError(Exception):
    exit_code = 3


class ConfigurationError(FairEvoError):
    """Bad user-supplied settings: unknown columns, invalid ratios, bad alpha."""

    exit_code = 1


class DataError(FairEvoError):
    """Malformed or inconsistent input data."""

    exit_code = 2


class DomainError(DataError):
    """Numeric input outside the domain of a formula (e.g. nonpositive benefit)."""


class TrainingError(FairEvoError):
    pass


class SelectionError(FairEvoError):
    pass


class ReportError(FairEvoError):
    pass
