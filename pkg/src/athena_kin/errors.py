"""Exception hierarchy.

Every kinematic failure carries a machine-readable ``reason`` drawn from
:class:`athena_kin.common.Reason`, so callers (the workspace sweep, the CLI)
can branch on it without parsing messages.
"""

from __future__ import annotations


class AthenaError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(AthenaError, ValueError):
    def __init__(self, message: str, field: str | None = None, constraint: str | None = None):
        super().__init__(message)
        self.field = field
        self.constraint = constraint


class KinematicsError(AthenaError):
    reason = "NO_REAL_SOLUTION"

    def __init__(self, message: str, reason: str | None = None):
        super().__init__(message)
        if reason is not None:
            self.reason = reason


class DomainError(KinematicsError):
    """A square-root radicand went negative; ``term`` names which one."""

    reason = "NO_REAL_SOLUTION"

    def __init__(self, term: str, value: float):
        super().__init__(f"negative radicand in {term} ({value:.6g})")
        self.term = term
        self.value = value


class UnreachableError(KinematicsError):
    reason = "NO_REAL_SOLUTION"

    def __init__(self, message: str, term: str | None = None):
        super().__init__(message)
        self.term = term


class JointLimitError(KinematicsError):
    """Solution exists but violates one or more joint limits."""

    def __init__(self, violations, joints=None):
        violations = list(violations)
        super().__init__("joint limit violation: " + ", ".join(violations), violations[0])
        self.violations = violations
        self.joints = joints


class NoRootInRangeError(JointLimitError):
    """The q3 closure has real roots but none inside the configured q3 interval."""


class DegenerateTipError(KinematicsError):
    reason = "DEGENERATE_TIP"


class InsertionRangeError(KinematicsError):
    reason = "INSERTION_LIMIT"

    def __init__(self, message: str, l_ins: float):
        super().__init__(message)
        self.l_ins = l_ins


class NoConvergenceError(KinematicsError):
    reason = "NO_REAL_SOLUTION"

    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"Newton iteration did not converge after {iterations} iterations "
            f"(final scaled residual {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual


class SingularJacobianError(KinematicsError):
    reason = "NO_REAL_SOLUTION"

    def __init__(self, condition: float):
        super().__init__(f"Jacobian is numerically singular (condition {condition:.3e})")
        self.condition = condition


class RootVerificationError(KinematicsError):
    """The analytic q3 root and the bracketed numeric root disagree."""


class GridMismatchError(AthenaError, ValueError):
    pass


class StiffnessError(AthenaError, ValueError):
    pass


class ExportFormatError(AthenaError, ValueError):
    """Requested export format is not one of the supported ones."""
