"""Exception types raised by the numerical modules."""


class QuadratureError(ArithmeticError):
    """An adaptive integral did not reach its requested tolerance."""

    def __init__(self, where, requested, achieved):
        self.where = where
        self.requested = requested
        self.achieved = achieved
        super().__init__(
            f"{where}: quadrature did not converge "
            f"(requested rel. tol {requested:.1e}, achieved {achieved:.2e})"
        )


class ConvergenceError(RuntimeError):
    """A fixed-point or truncation-convergence loop gave up."""

    def __init__(self, message, last=None):
        self.last = last
        super().__init__(message)


class FrozenTlsError(ZeroDivisionError):
    """The TLS has zero depolarization rate so its Gamma_phi diverges."""
