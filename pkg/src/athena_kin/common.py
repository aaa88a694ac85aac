"""Types and numerics shared by the two architectures.

The Y-axis relation (f1) and the q1/q2 chain distance (f2) are the same for
ATHENA-1 and ATHENA-2, so their residuals and their closed-form inverse live
here and both architecture modules call the same code.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq

from .config import GeometryParams, JointLimits
from .errors import DomainError, NoConvergenceError, SingularJacobianError
from .rcm import TaskPose, TipPoint, normalize_pose, pose_to_tip, tip_to_pose

# Relative slack for radicands that are negative only through rounding.
RADICAND_EPS = 1e-12


class Arch(str, enum.Enum):
    ATHENA1 = "athena1"
    ATHENA2 = "athena2"


class Reason(str, enum.Enum):
    """Validity codes; declaration order is the reporting precedence."""

    OK = "OK"
    DEGENERATE_TIP = "DEGENERATE_TIP"
    INSERTION_LIMIT = "INSERTION_LIMIT"
    NO_REAL_SOLUTION = "NO_REAL_SOLUTION"
    Q1_LIMIT = "Q1_LIMIT"
    Q2_LIMIT = "Q2_LIMIT"
    Q3_LIMIT = "Q3_LIMIT"
    Q4_LIMIT = "Q4_LIMIT"


REASONS = list(Reason)
REASON_INDEX = {r: i for i, r in enumerate(REASONS)}

# Radicand names reported with NO_REAL_SOLUTION, indexed by the ``term`` codes
# returned from the vectorised solvers.
TERMS = ("", "rho - l4", "l1^2 - (rho - l4)^2", "l3^2 - d^2", "t1 radicand", "t2 radicand", "q3 closure has no real root")


@dataclass(frozen=True)
class JointVector:
    q1: float
    q2: float
    q3: float
    q4: float
    arch: Arch = Arch.ATHENA1

    def as_array(self) -> np.ndarray:
        return np.array([self.q1, self.q2, self.q3, self.q4])


@dataclass(frozen=True)
class Residuals:
    """Residuals f1..f4 plus a per-equation magnitude scale.

    ``scales[i]`` is max(1, |largest term of equation i|), so ``scaled()`` is a
    dimensionless relative residual.
    """

    f1: float
    f2: float
    f3: float
    f4: float
    scales: tuple = (1.0, 1.0, 1.0, 1.0)

    def values(self) -> np.ndarray:
        return np.array([self.f1, self.f2, self.f3, self.f4])

    def scaled(self) -> np.ndarray:
        return self.values() / np.asarray(self.scales)

    def max_scaled(self) -> float:
        return float(np.max(np.abs(self.scaled())))


def checked_sqrt(value: float, scale_sq: float, term: str) -> float:
    if value < 0.0:
        if value < -RADICAND_EPS * max(scale_sq, 1.0):
            raise DomainError(term, value)
        return 0.0
    return math.sqrt(value)


def clamp_radicand(value, scale_sq):
    """Zero out radicands that are negative by rounding only; keep others negative."""
    tiny = (value < 0) & (value >= -RADICAND_EPS * max(scale_sq, 1.0))
    return np.where(tiny, 0.0, value)


def chain_coordinate(q1, q2, variant: str):
    """The q1/q2 chain coordinate entering f2 and the ATHENA-1 f3."""
    if variant == "literal":
        return q2 - q1 / 2
    return (q2 - q1) / 2


def shared_residuals(q1, q2, x, y, z, geom: GeometryParams, variant: str):
    """f1 and f2 with their scales; identical for both architectures."""
    lhs = q1 + q2 / 2
    f1 = geom.l02 + lhs - y
    s1 = max(1.0, abs(geom.l02), abs(lhs), abs(y))
    d = chain_coordinate(q1, q2, variant)
    root = checked_sqrt(geom.l1 ** 2 - d * d, geom.l1 ** 2, "l1^2 - d^2")
    a = (geom.l4 + root) ** 2
    b = (z - geom.l03) ** 2
    c = (x - geom.l01) ** 2
    f2 = a - b - c
    s2 = max(1.0, a, b, c)
    return f1, f2, s1, s2, d


def roll_residual(q4: float, phi: float) -> float:
    return math.sin(q4) - math.sin(phi)


class ChainSolution(NamedTuple):
    q1: np.ndarray
    q2: np.ndarray
    d: np.ndarray
    rho: np.ndarray
    real: np.ndarray
    rho_short: np.ndarray  # rho < l4: chain cannot shorten enough
    rho_long: np.ndarray  # (rho - l4) > l1: chain cannot reach


def solve_chain(x, y, z, geom: GeometryParams, variant: str, branch: int) -> ChainSolution:
    """Closed-form q1, q2 from f1 and f2 on arrays of tip coordinates.

    f2 = 0 gives sqrt(l1^2 - d^2) = rho - l4 with rho the distance of the tip
    from (l01, l03) in the XZ plane; ``branch`` picks the sign of d. f1 is
    linear in (q1, q2), so together with d the pair follows directly.
    """
    rho = np.hypot(z - geom.l03, x - geom.l01)
    u = rho - geom.l4
    u = np.where((u < 0) & (u >= -RADICAND_EPS * geom.l4), 0.0, u)
    rad = clamp_radicand(geom.l1 * geom.l1 - u * u, geom.l1 * geom.l1)
    rho_short = u < 0
    rho_long = rad < 0
    real = ~(rho_short | rho_long)
    d = branch * np.sqrt(np.where(real, rad, 0.0))
    s = y - geom.l02
    if variant == "literal":
        # q1 + q2/2 = s, q2 - q1/2 = d
        q1 = (4 * s - 2 * d) / 5
        q2 = (2 * s + 4 * d) / 5
    else:
        # q1 + q2/2 = s, (q2 - q1)/2 = d
        q1 = 2 * (s - d) / 3
        q2 = q1 + 2 * d
    return ChainSolution(q1, q2, d, rho, real, rho_short, rho_long)


def in_closed(values, rng):
    return (values >= rng[0]) & (values <= rng[1])


def apply_limit_reasons(reason, q1, q2, q3_fail, q4, limits: JointLimits):
    """Fill Q1..Q4 reasons on entries still marked OK, in precedence order."""
    checks = (
        (Reason.Q1_LIMIT, ~in_closed(q1, limits.q1_range)),
        (Reason.Q2_LIMIT, ~in_closed(q2, limits.q2_range)),
        (Reason.Q3_LIMIT, q3_fail),
        (Reason.Q4_LIMIT, ~in_closed(q4, limits.q4_range)),
    )
    ok = REASON_INDEX[Reason.OK]
    for code, fail in checks:
        reason = np.where((reason == ok) & fail, REASON_INDEX[code], reason)
    return reason


def limit_violations(reason_codes) -> list[str]:
    return [REASONS[int(c)].value for c in reason_codes]


def default_seed(geom: GeometryParams, limits: JointLimits, phi: float = 0.0) -> TaskPose:
    """A mid-range pose used to start forward kinematics.

    The tip sits at 45 degrees below the (l01, l03) pivot, at mid travel of
    q1 + q2/2, and at the first chain reach fraction that keeps the ATHENA-2
    t1 radicand positive for either l0 sign convention.
    """
    c = math.sqrt(0.5)
    candidates = []
    for frac in (0.5, 0.75, 0.9, 0.25):
        reach = geom.l4 + frac * geom.l1
        tip = np.array([geom.l01 + c * reach, geom.l02 + geom.l1, geom.l03 - c * reach])
        r = float(np.linalg.norm(tip))
        if not 0.0 <= geom.l_tool - r < limits.lins_max:
            tip = tip * ((geom.l_tool - limits.lins_max / 2) / r)
        candidates.append(tip)
        if all((tip[0] + s * geom.l0) ** 2 + tip[2] ** 2 > geom.l4 ** 2 for s in (1, -1)):
            break
    else:
        tip = candidates[0]
    return tip_to_pose(TipPoint(*map(float, tip)), phi, geom)


def predict_seed(
    tip_residuals: Callable[[float, float, float], tuple[np.ndarray, np.ndarray]],
    seed: TaskPose,
    q1: float,
    q2: float,
    geom: GeometryParams,
    variant: str,
    samples: int = 360,
) -> TaskPose:
    """Starting pose for forward kinematics.

    f1 fixes Yp and f2 fixes the XZ distance rho from (l01, l03), so
    every solution lies on one circle parametrised by lam. The third residual
    is sampled around that circle, each sign change is refined with brentq,
    and the root nearest the seed's lam is returned. Without a bracket the
    seed projected onto the circle is returned; without a real circle the
    seed itself is.
    """
    d = chain_coordinate(q1, q2, variant)
    rad = geom.l1 ** 2 - d * d
    if rad < 0:
        return seed
    rho = geom.l4 + math.sqrt(rad)
    y = geom.l02 + q1 + q2 / 2
    tip = pose_to_tip(seed, geom)
    lam0 = math.atan2(tip.zp - geom.l03, tip.xp - geom.l01)

    def f3(lam: float) -> float:
        try:
            return float(tip_residuals(geom.l01 + rho * math.cos(lam), y, geom.l03 + rho * math.sin(lam))[0][2])
        except DomainError:
            return math.nan

    lams = lam0 + np.linspace(-math.pi, math.pi, samples + 1)
    vals = np.array([f3(v) for v in lams])
    best = None
    for i in range(samples):
        fa, fb = vals[i], vals[i + 1]
        if np.isfinite(fa) and np.isfinite(fb) and fa * fb <= 0:
            root = brentq(f3, lams[i], lams[i + 1], xtol=1e-14)
            if best is None or abs(root - lam0) < abs(best - lam0):
                best = root
    lam = lam0 if best is None else best
    out = TipPoint(geom.l01 + rho * math.cos(lam), y, geom.l03 + rho * math.sin(lam))
    if out.norm == 0.0:
        return seed
    return tip_to_pose(out, seed.phi, geom)


# Per-iteration cap on (psi, theta, l_ins) updates during forward kinematics.
MAX_STEP = (0.2, 0.2, 100.0)

ResidualFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


def _fd_jacobian(func: ResidualFn, x: np.ndarray, scale: np.ndarray) -> np.ndarray:
    n = x.size
    jac = np.empty((scale.size, n))
    for j in range(n):
        h = max(1e-6, 1e-8 * abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        try:
            fp = func(xp)[0]
        except DomainError:
            fp, xp[j] = func(x)[0], x[j]
        try:
            fm = func(xm)[0]
        except DomainError:
            fm, xm[j] = func(x)[0], x[j]
        jac[:, j] = (fp - fm) / (xp[j] - xm[j]) / scale
    return jac


def newton_solve(
    func: ResidualFn,
    x0,
    col_scale,
    tol: float = 1e-10,
    max_iter: int = 50,
    cond_max: float = 1e12,
    polish: int = 2,
    max_step=None,
):
    """Damped Newton on ``func(x) -> (residuals, scales)``.

    ``max_step`` (per component, optional) caps the full Newton step so the
    iterate cannot jump between distant solution branches. The step is then
    halved while the scaled residual norm fails to decrease.
    After the tolerance is met, up to ``polish`` further steps are taken as
    long as they keep reducing the residual. Returns (x, iterations, residual).
    """
    x = np.asarray(x0, dtype=float).copy()
    col_scale = np.asarray(col_scale, dtype=float)
    try:
        f, s = func(x)
    except DomainError:
        raise NoConvergenceError(0, math.inf) from None
    g = f / s
    res = float(np.max(np.abs(g)))
    polished = 0
    for it in range(1, max_iter + 1):
        if res <= tol:
            if polished >= polish:
                return x, it - 1, res
            polished += 1
        jac = _fd_jacobian(func, x, s) * col_scale
        cond = np.linalg.cond(jac)
        if not np.isfinite(cond) or cond > cond_max:
            raise SingularJacobianError(float(cond))
        step = -np.linalg.solve(jac, g) * col_scale
        if max_step is not None:
            step *= min(1.0, float(np.min(np.asarray(max_step) / np.maximum(np.abs(step), 1e-300))))
        norm0 = float(np.linalg.norm(g))
        t = 1.0
        for _ in range(40):
            xn = x + t * step
            try:
                fn, sn = func(xn)
            except DomainError:
                t *= 0.5
                continue
            # Compare with the current scales held fixed; per-point scales move with x.
            if float(np.linalg.norm(fn / s)) < norm0:
                break
            t *= 0.5
        else:
            if res <= tol:
                return x, it - 1, res
            raise NoConvergenceError(it, res)
        x, f, s = xn, fn, sn
        g = f / s
        res = float(np.max(np.abs(g)))
    if res <= tol:
        return x, max_iter, res
    raise NoConvergenceError(max_iter, res)


def solve_pose(
    tip_residuals: Callable[[float, float, float], tuple[np.ndarray, np.ndarray]],
    seed: TaskPose,
    phi: float,
    geom: GeometryParams,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> TaskPose:
    """Forward kinematics core: solve f1..f3 for (psi, theta, l_ins).

    f4 only involves phi and q4 (sin q4 = sin phi), so phi is set from q4
    directly and the remaining three equations are iterated. Angular steps
    are capped at 0.2 rad so the iteration stays on the seed's assembly mode.
    """

    def func(v):
        psi, theta, l_ins = v
        r = geom.l_tool - l_ins
        st = math.sin(theta)
        return tip_residuals(math.cos(psi) * st * r, math.sin(psi) * st * r, math.cos(theta) * r)

    r0 = geom.l_tool - seed.l_ins
    x, _, _ = newton_solve(
        func, [seed.psi, seed.theta, seed.l_ins], [r0, r0, 1.0], tol=tol, max_iter=max_iter, max_step=MAX_STEP
    )
    return normalize_pose(TaskPose(float(x[0]), float(x[1]), phi, float(x[2])))
