"""ATHENA-1: three prismatic actuators plus the q4 roll drive.

Residual system (tip point from the RCM model)::

    f1 = l02 + (q1 + q2/2) - Yp
    f2 = (l4 + sqrt(l1^2 - d^2))^2 - (Zp - l03)^2 - (Xp - l01)^2
    f3 = (q3 + l2min + l5)^2 - (Xp - l01 - l4 cos(lam) + sqrt(l3^2 - d^2))^2
         - (Zp - l4 sin(lam) - l03)^2
    f4 = sin(q4) - sin(phi)

with lam = atan2(Zp - l03, Xp - l01) and d the chain coordinate
(``q2 - q1/2`` literal, ``(q2 - q1)/2`` symmetrized).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .common import (
    REASON_INDEX,
    Arch,
    JointVector,
    Reason,
    Residuals,
    TERMS,
    apply_limit_reasons,
    chain_coordinate,
    checked_sqrt,
    clamp_radicand,
    default_seed,
    predict_seed,
    roll_residual,
    shared_residuals,
    solve_chain,
    solve_pose,
)
from .config import GeometryParams, JointLimits, KinematicsOptions
from .errors import JointLimitError, UnreachableError
from .rcm import TaskPose, pose_to_tip

_DEFAULT_OPTIONS = KinematicsOptions()


@dataclass(frozen=True)
class Intermediates1:
    lam: float
    d: float
    rho: float


def intermediates_a1(pose: TaskPose, q: JointVector, geom: GeometryParams, options=None) -> Intermediates1:
    options = options or _DEFAULT_OPTIONS
    tip = pose_to_tip(pose, geom)
    return Intermediates1(
        lam=math.atan2(tip.zp - geom.l03, tip.xp - geom.l01),
        d=chain_coordinate(q.q1, q.q2, options.variant),
        rho=math.hypot(tip.zp - geom.l03, tip.xp - geom.l01),
    )


def tip_residuals_a1(q1, q2, q3, x, y, z, geom: GeometryParams, variant: str = "literal"):
    """(f1, f2, f3) and their scales at a tip point; raises DomainError."""
    f1, f2, s1, s2, d = shared_residuals(q1, q2, x, y, z, geom, variant)
    lam = math.atan2(z - geom.l03, x - geom.l01)
    w = checked_sqrt(geom.l3 ** 2 - d * d, geom.l3 ** 2, "l3^2 - d^2")
    a = (q3 + geom.l2min + geom.l5) ** 2
    b = (x - geom.l01 - geom.l4 * math.cos(lam) + w) ** 2
    c = (z - geom.l4 * math.sin(lam) - geom.l03) ** 2
    f3 = a - b - c
    s3 = max(1.0, a, b, c)
    return np.array([f1, f2, f3]), np.array([s1, s2, s3])


def residuals_a1(q: JointVector, pose: TaskPose, geom: GeometryParams, options=None) -> Residuals:
    options = options or _DEFAULT_OPTIONS
    tip = pose_to_tip(pose, geom)
    f, s = tip_residuals_a1(q.q1, q.q2, q.q3, tip.xp, tip.yp, tip.zp, geom, options.variant)
    return Residuals(f[0], f[1], f[2], roll_residual(q.q4, pose.phi), (s[0], s[1], s[2], 1.0))


class IKArrays(NamedTuple):
    q1: np.ndarray
    q2: np.ndarray
    q3: np.ndarray
    q4: np.ndarray
    reason: np.ndarray
    term: np.ndarray  # index into TERMS, 0 when solvable


def solve_a1_arrays(x, y, z, phi, geom: GeometryParams, limits: JointLimits | None, options=None, branch: int = 1) -> IKArrays:
    """Vectorised closed-form IK on tip coordinates.

    ``reason`` holds NO_REAL_SOLUTION or the first violated joint limit (as
    indices into ``Reason``); it never holds tip/insertion codes, those are the
    caller's business.
    """
    options = options or _DEFAULT_OPTIONS
    x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
    phi = np.broadcast_to(np.asarray(phi, dtype=float), x.shape)
    with np.errstate(invalid="ignore"):
        chain = solve_chain(x, y, z, geom, options.variant, branch)
        w2 = clamp_radicand(geom.l3 ** 2 - chain.d ** 2, geom.l3 ** 2)
        real = chain.real & (w2 >= 0)
        w = np.sqrt(np.where(real, w2, 0.0))
        lam = np.arctan2(z - geom.l03, x - geom.l01)
        # Positive root: q3 + l2min + l5 is a physical length.
        q3 = np.hypot(x - geom.l01 - geom.l4 * np.cos(lam) + w, z - geom.l4 * np.sin(lam) - geom.l03)
        q3 = q3 - geom.l2min - geom.l5
    q4 = phi.copy()
    nan = np.nan
    q1 = np.where(real, chain.q1, nan)
    q2 = np.where(real, chain.q2, nan)
    q3 = np.where(real, q3, nan)
    term = np.select([chain.rho_short, chain.rho_long, ~real], [1, 2, 3], 0)
    reason = np.where(real, REASON_INDEX[Reason.OK], REASON_INDEX[Reason.NO_REAL_SOLUTION])
    if limits is not None:
        lo, hi = limits.q3_range_a1
        q3_fail = ~((q3 > lo) & (q3 < hi))
        reason = apply_limit_reasons(reason, q1, q2, q3_fail, q4, limits)
    return IKArrays(q1, q2, q3, q4, reason, term)


def _collect_violations(sol: IKArrays, limits: JointLimits) -> list[str]:
    out = []
    if not limits.q1_range[0] <= sol.q1[0] <= limits.q1_range[1]:
        out.append(Reason.Q1_LIMIT.value)
    if not limits.q2_range[0] <= sol.q2[0] <= limits.q2_range[1]:
        out.append(Reason.Q2_LIMIT.value)
    if not limits.q3_range_a1[0] < sol.q3[0] < limits.q3_range_a1[1]:
        out.append(Reason.Q3_LIMIT.value)
    if not limits.q4_range[0] <= sol.q4[0] <= limits.q4_range[1]:
        out.append(Reason.Q4_LIMIT.value)
    return out


def ik_a1(
    pose: TaskPose,
    geom: GeometryParams,
    limits: JointLimits | None = None,
    branch: int = 1,
    options=None,
) -> JointVector:
    """Closed-form inverse kinematics.

    Raises UnreachableError when a radicand is negative, and JointLimitError
    (listing every violated limit) when ``limits`` is given and violated.
    """
    tip = pose_to_tip(pose, geom)
    sol = solve_a1_arrays([tip.xp], [tip.yp], [tip.zp], pose.phi, geom, None, options, branch)
    if sol.reason[0] != REASON_INDEX[Reason.OK]:
        term = TERMS[int(sol.term[0])]
        raise UnreachableError(f"no real solution: negative radicand in {term}", term)
    q = JointVector(float(sol.q1[0]), float(sol.q2[0]), float(sol.q3[0]), float(sol.q4[0]), Arch.ATHENA1)
    if limits is not None:
        violations = _collect_violations(sol, limits)
        if violations:
            raise JointLimitError(violations, q)
    return q


def fk_a1(
    q: JointVector,
    geom: GeometryParams,
    seed: TaskPose | None = None,
    limits: JointLimits | None = None,
    options=None,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> TaskPose:
    """Numerical forward kinematics.

    The seed picks the assembly mode: :func:`predict_seed` moves it to the
    nearest bracketed solution on the closure circle, then damped Newton
    converges on the full residual system.
    """
    options = options or _DEFAULT_OPTIONS
    if seed is None:
        seed = default_seed(geom, limits or _limits_for(geom))

    def tip_fn(x, y, z):
        return tip_residuals_a1(q.q1, q.q2, q.q3, x, y, z, geom, options.variant)

    seed = predict_seed(tip_fn, seed, q.q1, q.q2, geom, options.variant)
    return solve_pose(tip_fn, seed, q.q4, geom, tol=tol, max_iter=max_iter)


def _limits_for(geom):
    return JointLimits.from_geometry(geom)
