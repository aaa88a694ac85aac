"""Finite-difference Jacobians of the residual systems and singularity metrics.

Jq = df/d(q1, q2, q3, q4) and Jx = df/d(psi, theta, phi, l_ins), both taken
from the unscaled residuals f1..f4 at a consistent (pose, joints) pair.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .athena1 import residuals_a1, tip_residuals_a1
from .athena2 import residuals_a2, tip_residuals_a2
from .common import Arch, JointVector
from .config import GeometryParams, KinematicsOptions
from .errors import DomainError
from .rcm import TaskPose, TipPoint, tip_to_pose

DEFAULT_THRESHOLD = 1e-8
_SHRINKS = 3


def fd_step(value: float) -> float:
    return max(1e-6, 1e-8 * abs(value))


def central_jacobian(func: Callable[[np.ndarray], np.ndarray], x) -> np.ndarray:
    """Central differences of a vector function.

    A probe that leaves the real domain shrinks that coordinate's step by 10,
    at most three times, before the DomainError is re-raised.
    """
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        h = fd_step(x[j])
        for attempt in range(_SHRINKS + 1):
            xp, xm = x.copy(), x.copy()
            xp[j] += h
            xm[j] -= h
            try:
                cols.append((func(xp) - func(xm)) / (2 * h))
                break
            except DomainError:
                if attempt == _SHRINKS:
                    raise
                h /= 10
    return np.column_stack(cols)


def forward_jacobian(func: Callable[[np.ndarray], np.ndarray], x, rel_step: float | None = None) -> np.ndarray:
    """One-sided differences, used as an independent check on the central scheme.

    With ``rel_step`` the step is rel_step * max(1, |x|). Without it each entry
    takes its estimate from the step sequence 1e-4 .. 1e-9 (times max(1, |x|))
    at the point where consecutive estimates change least, which balances
    truncation against rounding near strongly curved residuals. Steps that
    leave the real domain are skipped.
    """
    x = np.asarray(x, dtype=float)
    f0 = func(x)
    steps = [rel_step] if rel_step is not None else [10.0**-k for k in range(4, 10)]
    cols = []
    for j in range(x.size):
        est, err = [], None
        for r in steps:
            h = r * max(1.0, abs(x[j]))
            xp = x.copy()
            xp[j] += h
            try:
                est.append((func(xp) - f0) / (xp[j] - x[j]))
            except DomainError as exc:
                err = exc  # probe left the real domain; smaller steps follow
        if not est:
            raise err
        est = np.array(est)
        if len(est) == 1:
            cols.append(est[0])
            continue
        change = np.abs(np.diff(est, axis=0))
        k = np.argmin(change, axis=0)
        cols.append(est[k + 1, np.arange(est.shape[1])])
    return np.column_stack(cols)


def _residual_fn(arch: Arch):
    return residuals_a1 if Arch(arch) is Arch.ATHENA1 else residuals_a2


def residual_closures(arch: Arch, pose: TaskPose, q: JointVector, geom: GeometryParams, options=None):
    """(f(q), f(x)) closures over the unscaled residual vector."""
    res = _residual_fn(arch)
    arch = Arch(arch)

    def of_q(v):
        return res(JointVector(*v, arch), pose, geom, options).values()

    def of_x(v):
        return res(q, TaskPose(*v), geom, options).values()

    return of_q, of_x


@dataclass(frozen=True)
class JacobianPair:
    jq: np.ndarray
    jx: np.ndarray
    pose: TaskPose
    q: JointVector
    arch: Arch

    def __post_init__(self):
        if not (np.all(np.isfinite(self.jq)) and np.all(np.isfinite(self.jx))):
            raise ValueError("Jacobian entries must be finite")


def numeric_jacobians(
    arch: Arch, pose: TaskPose, q: JointVector, geom: GeometryParams, options: KinematicsOptions | None = None
) -> JacobianPair:
    of_q, of_x = residual_closures(arch, pose, q, geom, options)
    jq = central_jacobian(of_q, q.as_array())
    jx = central_jacobian(of_x, [pose.psi, pose.theta, pose.phi, pose.l_ins])
    return JacobianPair(jq, jx, pose, q, Arch(arch))


def tip_jacobians(arch: Arch, tip: TipPoint, q: JointVector, geom: GeometryParams, options=None):
    """d(f1, f2, f3)/d(q1, q2, q3) and d(f1, f2, f3)/d(Xp, Yp, Zp) at a tip point."""
    options = options or KinematicsOptions()
    if Arch(arch) is Arch.ATHENA1:

        def f(qv, t):
            return tip_residuals_a1(qv[0], qv[1], qv[2], t[0], t[1], t[2], geom, options.variant)[0]

    else:

        def f(qv, t):
            return tip_residuals_a2(qv[0], qv[1], qv[2], t[0], t[1], t[2], geom, options)[0]

    q3 = np.array([q.q1, q.q2, q.q3])
    t3 = tip.as_array()
    jq = central_jacobian(lambda v: f(v, t3), q3)
    jt = central_jacobian(lambda v: f(q3, v), t3)
    return jq, jt


@dataclass(frozen=True)
class SingularityMetrics:
    abs_det_q: float
    abs_det_x: float
    cond_q: float
    cond_x: float
    manipulability: float
    normalized_det_q: float
    singular: bool
    point: tuple | None = None


def _normalized_det(m: np.ndarray) -> float:
    # |det| / product of row norms lies in [0, 1] (Hadamard) and is scale free.
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms == 0):
        return 0.0
    return float(abs(np.linalg.det(m)) / np.prod(norms))


def _cond(m: np.ndarray) -> float:
    s = np.linalg.svd(m, compute_uv=False)
    return math.inf if s[-1] == 0 else float(s[0] / s[-1])


def singularity_metrics(jp, threshold: float = DEFAULT_THRESHOLD, point=None) -> SingularityMetrics:
    """Determinants, condition numbers and manipulability of a Jacobian pair.

    ``jp`` is a :class:`JacobianPair` or any ``(jq, jx)`` pair of square
    matrices. ``singular`` compares the row-normalised |det Jq| to
    ``threshold``.
    """
    jq, jx = (jp.jq, jp.jx) if isinstance(jp, JacobianPair) else jp
    jq, jx = np.asarray(jq, dtype=float), np.asarray(jx, dtype=float)
    if point is None and isinstance(jp, JacobianPair):
        point = (jp.pose.psi, jp.pose.theta, jp.pose.phi, jp.pose.l_ins)
    nd = _normalized_det(jq)
    return SingularityMetrics(
        abs_det_q=float(abs(np.linalg.det(jq))),
        abs_det_x=float(abs(np.linalg.det(jx))),
        cond_q=_cond(jq),
        cond_x=_cond(jx),
        manipulability=float(math.sqrt(max(np.linalg.det(jq @ jq.T), 0.0))),
        normalized_det_q=nd,
        singular=nd < threshold,
        point=point,
    )


@dataclass(frozen=True)
class ScanReport:
    arch: str
    threshold: float
    evaluated_count: int
    flagged_count: int
    min_abs_det_q: float | None  # row-normalised |det Jq|, the flagged quantity
    min_abs_det_q_raw: float | None
    argmin_point: list | None  # RCM-frame tip [x, y, z] in mm
    stride: int = 1

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def format_text(self) -> str:
        lines = [
            f"arch={self.arch} evaluated={self.evaluated_count} flagged={self.flagged_count} "
            f"threshold={self.threshold:g} stride={self.stride}",
        ]
        if self.evaluated_count:
            x, y, z = self.argmin_point
            lines.append(
                f"min normalized |det Jq| = {self.min_abs_det_q:.6e} (raw {self.min_abs_det_q_raw:.6e}) "
                f"at x={x:.3f} y={y:.3f} z={z:.3f} mm"
            )
        return "\n".join(lines)


def _scan_chunk(task):
    arch, xyz, q, geom, options, threshold = task
    nd = np.empty(len(xyz))
    raw = np.empty(len(xyz))
    for i in range(len(xyz)):
        pose = tip_to_pose(TipPoint(*map(float, xyz[i])), 0.0, geom)
        jv = JointVector(*map(float, q[i]), arch)
        m = singularity_metrics(numeric_jacobians(arch, pose, jv, geom, options), threshold)
        nd[i] = m.normalized_det_q
        raw[i] = m.abs_det_q
    return nd, raw


def singularity_scan(
    result,
    geom: GeometryParams,
    threshold: float = DEFAULT_THRESHOLD,
    stride: int = 1,
    options: KinematicsOptions | None = None,
    workers: int = 1,
    chunk: int = 2000,
) -> ScanReport:
    """Evaluate the metrics at every ``stride``-th stored valid point of ``result``.

    Points are taken in stored order; ties in the minimum resolve to the
    first point, so the report does not depend on ``workers``.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    arch = Arch(result.arch)
    pts = result.points.subset(result.points.valid)
    xyz = np.column_stack([pts.x, pts.y, pts.z])[::stride]
    q = pts.q[::stride]
    if np.isnan(q).any():
        raise ValueError("result has valid points without stored joints")
    n = len(xyz)
    if n == 0:
        return ScanReport(arch.value, threshold, 0, 0, None, None, None, stride)
    tasks = [(arch, xyz[i : i + chunk], q[i : i + chunk], geom, options, threshold) for i in range(0, n, chunk)]
    if workers == 1:
        parts = list(map(_scan_chunk, tasks))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_scan_chunk, tasks))
    nd = np.concatenate([p[0] for p in parts])
    raw = np.concatenate([p[1] for p in parts])
    k = int(np.argmin(nd))
    return ScanReport(
        arch=arch.value,
        threshold=threshold,
        evaluated_count=n,
        flagged_count=int(np.count_nonzero(nd < threshold)),
        min_abs_det_q=float(nd[k]),
        min_abs_det_q_raw=float(np.min(raw)),
        argmin_point=[float(v) for v in xyz[k]],
        stride=stride,
    )
