"""Error hierarchy shared across the package.

Every error carries a stable ``category`` string used by the CLI when
emitting machine-readable failure reports.
"""


class PhiGammaError(Exception):
    category = "error"


class DomainError(PhiGammaError):
    category = "domain"


class DivisionByZero(DomainError):
    category = "division-by-zero"


class PrecisionLoss(PhiGammaError):
    category = "precision-loss"


class InsufficientPrecision(PrecisionLoss):
    category = "insufficient-precision"


class PrecisionUndecidable(PrecisionLoss):
    category = "precision-undecidable"


class EmptyWindow(PrecisionLoss):
    category = "empty-window"


class NotAUnit(DomainError):
    category = "not-a-unit"


class NotDominant(DomainError):
    category = "not-dominant"


class CharacterUndefined(DomainError):
    category = "character-undefined"


class StabilizationFailure(PhiGammaError):
    category = "stabilization-failure"


class NoStabilization(StabilizationFailure):
    """Raised with the step history attached for diagnosis."""

    category = "no-stabilization"

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


class TruncationMismatch(DomainError):
    category = "truncation-mismatch"


class RangeTooSmall(PhiGammaError):
    category = "range-too-small"


class BudgetExceeded(PhiGammaError):
    category = "budget-exceeded"


class DepthTooSmall(DomainError):
    category = "depth-too-small"


class DegenerateCell(DomainError):
    category = "degenerate-cell"


class CellRefinementTooDeep(BudgetExceeded):
    category = "cell-refinement-too-deep"


class PointOutsideCells(DomainError):
    category = "point-outside-cells"


class DepthExceeded(BudgetExceeded):
    category = "depth-exceeded"


class FormatError(PhiGammaError):
    category = "format"
