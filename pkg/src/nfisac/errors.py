"""Exception types raised across the package."""

from __future__ import annotations


class NfisacError(Exception):
    """Base class for all package errors."""


class ScenarioError(NfisacError, ValueError):
    """A scenario failed validation; ``issues`` lists every violated invariant."""

    def __init__(self, issues):
        self.issues = list(issues)
        msg = "; ".join(f"{i.code}: {i.message}" for i in self.issues) or "invalid scenario"
        super().__init__(msg)


class SingularGeometry(NfisacError, ValueError):
    """An evaluation point coincides with an antenna."""


class ShapeMismatch(NfisacError, ValueError):
    pass


class NonPsdInput(NfisacError, ValueError):
    pass


class NotHermitian(NfisacError, ValueError):
    pass


class SingularFim(NfisacError, ArithmeticError):
    """The Fisher information matrix is not invertible.

    ``condition`` holds the (Jacobi-scaled) condition estimate and
    ``null_direction`` the eigenvector of the smallest eigenvalue.
    """

    def __init__(self, message, condition=float("inf"), null_direction=None):
        super().__init__(message)
        self.condition = condition
        self.null_direction = null_direction


class SingularBlock(NfisacError, ArithmeticError):
    pass


class ConfigNotSymmetric(NfisacError, ValueError):
    pass


class ZeroReflection(NfisacError, ValueError):
    pass


class DegenerateBeam(NfisacError, ArithmeticError):
    pass


class Infeasible(NfisacError, RuntimeError):
    """The SINR targets cannot be met within the power budget."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NumericalLimit(NfisacError, RuntimeError):
    """The conic solver stopped without certifying optimality."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class RankDeficientBlock(UserWarning):
    """A subspace block was rank deficient and columns were dropped."""
