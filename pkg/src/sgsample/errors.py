"""Exception types shared across the package."""


class ForbiddenEigenvalue(ValueError):
    """An eigenvalue continuation landed on a value where the extension
    formulas are singular, so no eigenfunction continuation exists."""

    def __init__(self, value, target):
        self.value = float(value)
        self.target = target
        super().__init__(f"eigenvalue {value!r} is forbidden on {target} graphs")


class NegativeDiscriminant(ValueError):
    """25 - 4*lam < 0: no real branch values exist."""


class SingularLocalSystem(ValueError):
    """The per-cell 3x3 extension system is singular (lam within tolerance
    of 2 or 5)."""


class PoleAtDenominator(ValueError):
    """Rational eigenvalue relation evaluated at a pole of its denominator."""


class SizeCapExceeded(ValueError):
    """A dense solve or construction was requested beyond its size cap."""


class LevelMismatch(ValueError):
    """Function values do not match the graph level they are paired with."""


class ContractViolation(RuntimeError):
    """A numerical contract the library guarantees failed to hold."""
