"""Exception types shared across the toolkit.

Every failure mode that a caller is expected to branch on gets its own class;
everything derives from EquiliftError so batch drivers can catch broadly.
"""


class EquiliftError(Exception):
    """Base class for all toolkit errors."""


# core -----------------------------------------------------------------------

class SingularityInK(EquiliftError):
    """A declared singularity of the function lies inside the compact set."""


class ZeroInK(EquiliftError):
    """The function vanishes (or has a pole) on a set that must be zero-free."""


class ContourThroughZero(EquiliftError):
    """Argument-principle residual too large; the contour grazes a zero."""


class NoConvergence(EquiliftError):
    """Iterative refinement failed to meet its tolerance."""


# divisors -------------------------------------------------------------------

class EmptyWindow(EquiliftError):
    """Generation window is degenerate or holds no points."""


class AmbiguousNearPeriod(EquiliftError):
    """A candidate period sits in the grey zone [tol, 10*tol)."""


class OverlappingCircles(EquiliftError):
    """Extraction circles around suspected poles are not disjoint."""


# toast ----------------------------------------------------------------------

class NonFreeInput(EquiliftError):
    """Input has a nontrivial translation stabilizer; covariant anchors do not exist."""


class WindowTooSmall(EquiliftError):
    """The window cannot hold even a base-scale region."""


# runge ----------------------------------------------------------------------

class DegreeCapExceeded(EquiliftError):
    """Degree escalation hit the cap before reaching the requested error."""

    def __init__(self, message, cap=None, best_error=None):
        super().__init__(message)
        self.cap = cap
        self.best_error = best_error


class BranchInconsistency(EquiliftError):
    """Phase unwrapping disagrees along two tree paths; suspect an undetected zero."""


# builders -------------------------------------------------------------------

class UnsupportedZeta(EquiliftError):
    """Evaluation point too close to a quadrature node for the singular rule."""


class EvaluationOnAtom(EquiliftError):
    """Potential evaluated exactly on one of its atoms."""


# lifting --------------------------------------------------------------------

class RungeFailure(EquiliftError):
    """An approximation step failed; carries the level and anchor."""

    def __init__(self, message, level=None, anchor=None):
        super().__init__(message)
        self.level = level
        self.anchor = anchor


class DivisorMismatch(EquiliftError):
    """A local solution does not reproduce the prescribed data on its region."""


# periodic -------------------------------------------------------------------

class OnLattice(EquiliftError):
    """Evaluation point lies on the lattice itself."""


class ConstantInput(EquiliftError):
    """The growth probe needs a nonconstant function."""


class RangeInsufficient(EquiliftError):
    """The probed parameter range does not bracket the requested feature."""


class PolesTooClose(EquiliftError):
    """Zero/pole pairs violate the required separation."""
