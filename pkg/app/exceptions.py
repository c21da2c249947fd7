"""
Error hierarchy for MatrixMemoryLab.

Every error carries the exit code the command line reports for it.
"""


class LabError(Exception):
    exit_code: int = 1


class ConfigurationError(LabError):
    exit_code = 2


class BudgetError(LabError):
    exit_code = 3


class EnumerationBudgetError(BudgetError):
    """Raised when a Wick contraction exceeds the enumeration budget."""

    def __init__(self, budget: int):
        self.budget = budget
        super().__init__(
            f"Contraction enumeration exceeded the budget of {budget} pairings"
        )


class DimensionLimitError(BudgetError):
    """Raised when a Fock space, basis or spin sector is larger than allowed."""

    def __init__(self, what: str, size: int, limit: int):
        self.what = what
        self.size = size
        self.limit = limit
        super().__init__(f"{what} of size {size} exceeds the limit {limit}")


class NumericalValidityError(LabError):
    exit_code = 4


class CutoffOverflowError(NumericalValidityError):
    pass


class DegenerateGramError(NumericalValidityError):
    pass


class NormalizationError(NumericalValidityError):
    pass


class StepSizeError(NumericalValidityError):
    pass


class NegativityError(NumericalValidityError):
    pass


class SectorClosureError(NumericalValidityError):
    pass


class AlphabetError(LabError, ValueError):
    exit_code = 2


class PreconditionError(LabError, ValueError):
    exit_code = 2
