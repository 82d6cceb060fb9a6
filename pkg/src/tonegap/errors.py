"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ContractError(ValueError):
    """A caller-supplied structure violates an interface contract."""


class NumericError(RuntimeError):
    """A numerical procedure produced non-finite or inconsistent values."""
