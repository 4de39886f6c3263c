"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class NonHermitianError(ValidationError):
    """Matrix fails the Hermiticity check; ``asymmetry`` is max|M - M^H|."""

    def __init__(self, asymmetry, scale):
        self.asymmetry = float(asymmetry)
        self.scale = float(scale)
        super().__init__(
            f"matrix is not Hermitian: max|M - M^H| = {self.asymmetry:.3e} (max|M| = {self.scale:.3e})"
        )


class NumericalContractError(ArithmeticError):
    """A computed quantity broke a guaranteed property (e.g. positivity)."""
