"""Exception types shared across the workbench."""


class LoanLensError(Exception):
    """Base class for all workbench errors."""

    code = "error"


class ParseError(LoanLensError):
    """A data file could not be parsed. Carries the offending row number."""

    code = "parse_error"

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class SchemaError(LoanLensError):
    """Input columns do not match the declared attribute schema."""

    code = "schema_error"


class EmptyDatasetError(LoanLensError):
    """An operation left no usable attributes or applications."""

    code = "empty_dataset"


class ContractError(LoanLensError):
    """A caller violated an operation precondition."""

    code = "contract_error"


class DegenerateDataError(LoanLensError):
    """Training data contains a single label class."""

    code = "degenerate_data"


class ConvergenceError(LoanLensError):
    """Optimizer stopped before reaching the gradient tolerance."""

    code = "convergence_error"

    def __init__(self, message: str, gradient_norm: float):
        super().__init__(message)
        self.gradient_norm = gradient_norm


class UndefinedRatioError(LoanLensError):
    """A ratio metric is undefined for the given inputs (zero denominator)."""

    code = "undefined_ratio"


class NotFoundError(LoanLensError):
    """Referenced session or application does not exist."""

    code = "not_found"


class ValidationError(LoanLensError):
    """A submitted value is out of bounds. Carries the offending field."""

    code = "validation_error"

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class UnresolvedCountryError(LoanLensError):
    """No cultural scores and no neighbor list for a country."""

    code = "unresolved_country"


class CorruptLogError(LoanLensError):
    """Event-log replay hit an unreadable line. State before the line is kept."""

    code = "corrupt_log"

    def __init__(self, message: str, line_number: int, events: list | None = None):
        super().__init__(message)
        self.line_number = line_number
        self.events = events if events is not None else []
