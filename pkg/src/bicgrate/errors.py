"""Exception types raised by the solvers."""


class BicError(Exception):
    """Base class for all package errors."""


class ThresholdSingularity(BicError, ArithmeticError):
    """A channel wavenumber is (numerically) zero, so 1/k_z diverges."""


class NoBracket(BicError):
    """A monotone function shows no sign change on the search interval."""


class NoRoot(BicError):
    """A requested bound state or resonance does not exist for these parameters."""


class GateFailed(BicError):
    """The existence inequality for bound states is violated."""

    def __init__(self, message, gate=None):
        super().__init__(message)
        self.gate = gate


class SingularSystem(BicError):
    """The driven 2x2 system is singular: the point is a bound state."""


class DegenerateTriple(BicError):
    """Integer tuple with 2*n0**2 == n1**2 + n2**2."""


class InsideScatterer(BicError):
    """A field point lies within a cylinder cross-section."""


class ExtrapolationDiverged(BicError):
    """Richardson extrapolation of a regularized sum did not settle."""
