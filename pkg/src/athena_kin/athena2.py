"""ATHENA-2: the q3 prismatic chain is replaced by a revolute crank.

f1, f2 and f4 are the ATHENA-1 relations for q1, q2 and q4. The crank
closure is::

    f3 = ((t1 - l4) sin(t3) + t2 + (t1 - l4) cos(t3) - l2 sin(q3))^2 - l2^2

    t1 = sqrt((Xp + l0)^2 + Zp^2 - l4^2)
    t2 = sqrt(l3^2 - ((q2 - q1)/2)^2) - l2 cos(q3)
    t3 = atan2(Xp + l0, Zp)

t3 is printed as
``atan2(((Xp + l0)*((Xp + l0)^2 + Zp^2))^(-1/2), Zp*((Xp + l0)^2 + Zp^2)^(-1/2))``;
the two arguments are read as the components of (Xp + l0, Zp) normalised by
the same norm, which is the atan2 above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .athena1 import IKArrays
from .common import (
    REASON_INDEX,
    TERMS,
    Arch,
    JointVector,
    Reason,
    Residuals,
    apply_limit_reasons,
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
from .errors import JointLimitError, NoRootInRangeError, RootVerificationError, UnreachableError
from .rcm import TaskPose, pose_to_tip

_DEFAULT_OPTIONS = KinematicsOptions()
_SQRT2 = math.sqrt(2.0)
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Intermediates2:
    t1: float
    t2: float
    t3: float


def _t_terms(x, z, q1, q2, q3, geom: GeometryParams, l0_sign: int):
    xl = x + l0_sign * geom.l0
    t1 = checked_sqrt(xl * xl + z * z - geom.l4 ** 2, geom.l4 ** 2, "t1 radicand")
    h = (q2 - q1) / 2
    t2 = checked_sqrt(geom.l3 ** 2 - h * h, geom.l3 ** 2, "t2 radicand") - geom.l2 * math.cos(q3)
    t3 = math.atan2(xl, z)
    return t1, t2, t3


def intermediates_a2(pose: TaskPose, q: JointVector, geom: GeometryParams, options=None) -> Intermediates2:
    options = options or _DEFAULT_OPTIONS
    tip = pose_to_tip(pose, geom)
    return Intermediates2(*_t_terms(tip.xp, tip.zp, q.q1, q.q2, q.q3, geom, options.l0_sign))


def tip_residuals_a2(q1, q2, q3, x, y, z, geom: GeometryParams, options=None):
    options = options or _DEFAULT_OPTIONS
    f1, f2, s1, s2, _ = shared_residuals(q1, q2, x, y, z, geom, options.variant)
    t1, t2, t3 = _t_terms(x, z, q1, q2, q3, geom, options.l0_sign)
    inner = (t1 - geom.l4) * math.sin(t3) + t2 + (t1 - geom.l4) * math.cos(t3) - geom.l2 * math.sin(q3)
    a = inner * inner
    b = geom.l2 ** 2
    s3 = max(1.0, a, b)
    return np.array([f1, f2, a - b]), np.array([s1, s2, s3])


def residuals_a2(q: JointVector, pose: TaskPose, geom: GeometryParams, options=None) -> Residuals:
    tip = pose_to_tip(pose, geom)
    f, s = tip_residuals_a2(q.q1, q.q2, q.q3, tip.xp, tip.yp, tip.zp, geom, options)
    return Residuals(f[0], f[1], f[2], roll_residual(q.q4, pose.phi), (s[0], s[1], s[2], 1.0))


def _q3_candidates(a_term, l2):
    """All roots of the crank closure in q3 within roughly [-3pi, 3pi].

    Expanding t2, the closure reads a_term - l2 (cos q3 + sin q3) = +-l2, i.e.
    sin(q3 + pi/4) = (a_term -+ l2) / (sqrt(2) l2). Returns (roots, signs)
    arrays of shape (n, 12), NaN where a branch has no real root; ``signs``
    holds the right-hand side (+l2 or -l2) each root satisfies.
    """
    roots, signs = [], []
    for c in (l2, -l2):
        v = (a_term - c) / (_SQRT2 * l2)
        v = np.where(np.abs(v) <= 1.0, v, np.nan)
        alpha = np.arcsin(v)
        for base in (alpha - math.pi / 4, 3 * math.pi / 4 - alpha):
            for k in (-1, 0, 1):
                roots.append(base + 2 * math.pi * k)
                signs.append(np.full_like(a_term, c))
    return np.stack(roots, axis=-1), np.stack(signs, axis=-1)


def _closure_inner(q, t1, t3, w, geom):
    t2 = w - geom.l2 * np.cos(q)
    return (t1 - geom.l4) * np.sin(t3) + t2 + (t1 - geom.l4) * np.cos(t3) - geom.l2 * np.sin(q)


def _verify_roots(q, c, t1, t3, w, geom, iterations: int = 64):
    """Bisect the literal closure on the monotonic piece holding each root.

    Returns the numeric roots. Raises RootVerificationError when any analytic
    root is farther than 1e-12 plus its rounding allowance from the numeric one.
    """
    if q.size == 0:
        return q
    n = np.floor((q + 3 * math.pi / 4) / math.pi)
    a = -3 * math.pi / 4 + n * math.pi
    b = a + math.pi
    ga = _closure_inner(a, t1, t3, w, geom) - c
    for _ in range(iterations):
        m = 0.5 * (a + b)
        gm = _closure_inner(m, t1, t3, w, geom) - c
        same = np.sign(gm) == np.sign(ga)
        a = np.where(same, m, a)
        ga = np.where(same, gm, ga)
        b = np.where(same, b, m)
    numeric = 0.5 * (a + b)
    # The root is ill-conditioned where d/dq3 of the closure vanishes (q3 = pi/4 + k pi).
    size = 2 * np.abs(t1 - geom.l4) + np.abs(w) + 2 * geom.l2
    slope = geom.l2 * np.abs(np.sin(q) - np.cos(q))
    curvature = geom.l2 * np.abs(np.sin(q) + np.cos(q))
    noise = 64 * _EPS * size
    with np.errstate(divide="ignore"):
        allowance = np.minimum(noise / slope, np.sqrt(noise / np.maximum(curvature, 1e-300)))
    gap = np.abs(numeric - q)
    bad = gap > 1e-12 + allowance
    if np.any(bad):
        i = int(np.argmax(gap - allowance))
        raise RootVerificationError(
            f"analytic q3 root {q[i]!r} disagrees with bracketed root {numeric[i]!r} (gap {gap[i]:.3e})",
            "NO_REAL_SOLUTION",
        )
    return numeric


def solve_a2_arrays(
    x, y, z, phi, geom: GeometryParams, limits: JointLimits | None, options=None, branch: int = 1, verify: bool = True
) -> IKArrays:
    """Vectorised IK: shared closed form for q1, q2, q4 and the crank-closure root for q3.

    Without limits the q3 root nearest zero in (-pi, pi] is returned.
    """
    options = options or _DEFAULT_OPTIONS
    x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
    phi = np.broadcast_to(np.asarray(phi, dtype=float), x.shape)
    with np.errstate(invalid="ignore"):
        chain = solve_chain(x, y, z, geom, options.variant, branch)
        h = (chain.q2 - chain.q1) / 2
        wh2 = clamp_radicand(geom.l3 ** 2 - h * h, geom.l3 ** 2)
        xl = x + options.l0_sign * geom.l0
        t1r = clamp_radicand(xl * xl + z * z - geom.l4 ** 2, geom.l4 ** 2)
        radicands_ok = chain.real & (wh2 >= 0) & (t1r >= 0)
        t1 = np.sqrt(np.where(radicands_ok, t1r, 0.0))
        w = np.sqrt(np.where(radicands_ok, wh2, 0.0))
        t3 = np.arctan2(xl, z)
        a_term = (t1 - geom.l4) * (np.sin(t3) + np.cos(t3)) + w
        roots, signs = _q3_candidates(a_term, geom.l2)

    has_root = radicands_ok & np.any(np.isfinite(roots), axis=1)
    lo, hi = limits.q3_range_a2 if limits is not None else (-math.pi, math.pi)
    in_range = np.isfinite(roots) & (roots >= lo) & (roots <= hi)
    if limits is None:
        in_range &= roots > -math.pi
    key = np.abs(roots)
    if options.a2_root == "other":
        key = -key
    pick = np.argmin(np.where(in_range, key, np.inf), axis=1)
    found = has_root & np.any(in_range, axis=1)
    # Points whose roots all fall outside the interval report the root nearest zero.
    fallback = np.argmin(np.where(np.isfinite(roots), np.abs(roots), np.inf), axis=1)
    pick = np.where(found, pick, fallback)
    rows = np.arange(roots.shape[0])
    q3 = np.where(has_root, roots[rows, pick], np.nan)
    c = signs[rows, pick]

    term = np.select(
        [chain.rho_short, chain.rho_long, chain.real & (wh2 < 0), chain.real & (t1r < 0), ~has_root],
        [1, 2, 5, 4, 6],
        0,
    )
    real = has_root
    q1 = np.where(real, chain.q1, np.nan)
    q2 = np.where(real, chain.q2, np.nan)
    q4 = phi.copy()
    reason = np.where(real, REASON_INDEX[Reason.OK], REASON_INDEX[Reason.NO_REAL_SOLUTION])
    if limits is not None:
        reason = apply_limit_reasons(reason, q1, q2, ~found, q4, limits)
    if verify:
        # Every root handed back as a solution is checked; rejected ones are not.
        sel = np.flatnonzero(reason == REASON_INDEX[Reason.OK])
        _verify_roots(q3[sel], c[sel], t1[sel], t3[sel], w[sel], geom)
    return IKArrays(q1, q2, q3, q4, reason, term)


def ik_a2(
    pose: TaskPose,
    geom: GeometryParams,
    limits: JointLimits | None = None,
    branch: int = 1,
    options=None,
) -> JointVector:
    """Inverse kinematics; q3 from the crank closure restricted to the q3 interval.

    Raises UnreachableError (no real solution), NoRootInRangeError (real q3
    roots exist, none inside the interval, q1/q2/q4 fine) or JointLimitError.
    """
    tip = pose_to_tip(pose, geom)
    sol = solve_a2_arrays([tip.xp], [tip.yp], [tip.zp], pose.phi, geom, limits, options, branch)
    reason = int(sol.reason[0])
    if reason == REASON_INDEX[Reason.NO_REAL_SOLUTION]:
        term = TERMS[int(sol.term[0])]
        raise UnreachableError(f"no real solution: {term}", term)
    q = JointVector(float(sol.q1[0]), float(sol.q2[0]), float(sol.q3[0]), float(sol.q4[0]), Arch.ATHENA2)
    if limits is not None and reason != REASON_INDEX[Reason.OK]:
        violations = []
        if not limits.q1_range[0] <= q.q1 <= limits.q1_range[1]:
            violations.append(Reason.Q1_LIMIT.value)
        if not limits.q2_range[0] <= q.q2 <= limits.q2_range[1]:
            violations.append(Reason.Q2_LIMIT.value)
        q3_out = not limits.q3_range_a2[0] <= q.q3 <= limits.q3_range_a2[1]
        if q3_out:
            violations.append(Reason.Q3_LIMIT.value)
        if not limits.q4_range[0] <= q.q4 <= limits.q4_range[1]:
            violations.append(Reason.Q4_LIMIT.value)
        if violations == [Reason.Q3_LIMIT.value]:
            raise NoRootInRangeError(violations, q)
        raise JointLimitError(violations, q)
    return q


def fk_a2(
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
        seed = default_seed(geom, limits or JointLimits.from_geometry(geom))

    def tip_fn(x, y, z):
        return tip_residuals_a2(q.q1, q.q2, q.q3, x, y, z, geom, options)

    seed = predict_seed(tip_fn, seed, q.q1, q.q2, geom, options.variant)
    return solve_pose(tip_fn, seed, q.q4, geom, tol=tol, max_iter=max_iter)
