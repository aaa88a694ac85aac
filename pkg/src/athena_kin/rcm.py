"""Remote-center-of-motion model: task pose <-> tip point.

The tip point lies on the instrument axis through the RCM at distance
``l_tool - l_ins`` from it, in the direction given by azimuth ``psi`` and polar
angle ``theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import GeometryParams, JointLimits
from .errors import DegenerateTipError, InsertionRangeError

_ROUNDING = 4 * 2.0**-52


@dataclass(frozen=True)
class TaskPose:
    psi: float
    theta: float
    phi: float
    l_ins: float

    @property
    def azimuth_degenerate(self) -> bool:
        """True on the polar axis, where psi carries no information."""
        return self.theta == 0.0 or self.theta == math.pi


@dataclass(frozen=True)
class TipPoint:
    xp: float
    yp: float
    zp: float

    def as_array(self) -> np.ndarray:
        return np.array([self.xp, self.yp, self.zp])

    @property
    def norm(self) -> float:
        return math.sqrt(self.xp * self.xp + self.yp * self.yp + self.zp * self.zp)


def axis_direction(psi: float, theta: float) -> np.ndarray:
    """Unit vector of the instrument axis, pointing from the RCM to the tip."""
    st = math.sin(theta)
    return np.array([math.cos(psi) * st, math.sin(psi) * st, math.cos(theta)])


def pose_to_tip(pose: TaskPose, geom: GeometryParams) -> TipPoint:
    r = geom.l_tool - pose.l_ins
    st = math.sin(pose.theta)
    return TipPoint(math.cos(pose.psi) * st * r, math.sin(pose.psi) * st * r, math.cos(pose.theta) * r)


def pose_to_tip_arrays(psi, theta, l_ins, l_tool):
    r = l_tool - l_ins
    st = np.sin(theta)
    return np.cos(psi) * st * r, np.sin(psi) * st * r, np.cos(theta) * r


def tip_to_pose(tip: TipPoint, phi: float, geom: GeometryParams, limits: JointLimits | None = None) -> TaskPose:
    """Invert :func:`pose_to_tip`.

    On the polar axis psi is set to 0 (see ``TaskPose.azimuth_degenerate``).
    theta is computed with atan2 rather than acos(z/r) to keep full precision
    near the poles. The south pole (theta = pi) is accepted. An insertion
    that is negative by rounding only is returned as 0.
    """
    r = tip.norm
    if r == 0.0:
        raise DegenerateTipError("tip coincides with the RCM; pose undefined", "DEGENERATE_TIP")
    l_ins = geom.l_tool - r
    if -_ROUNDING * geom.l_tool <= l_ins < 0.0:
        l_ins = 0.0  # norm rounded just past l_tool
    lins_max = limits.lins_max if limits is not None else math.inf
    if not 0.0 <= l_ins < lins_max:
        raise InsertionRangeError(f"insertion {l_ins:.6g} mm outside [0, {lins_max:g})", l_ins)
    rho = math.hypot(tip.xp, tip.yp)
    theta = math.atan2(rho, tip.zp)
    psi = math.atan2(tip.yp, tip.xp) if rho > 0.0 else 0.0
    return TaskPose(psi, theta, phi, l_ins)


def normalize_pose(pose: TaskPose) -> TaskPose:
    """Map an equivalent (psi, theta) pair onto theta in [0, pi], psi in (-pi, pi]."""
    psi, theta = pose.psi, math.remainder(pose.theta, 2 * math.pi)
    if theta < 0:
        theta = -theta
        psi += math.pi
    psi = math.remainder(psi, 2 * math.pi)
    if psi == -math.pi:
        psi = math.pi
    return TaskPose(psi, theta, pose.phi, pose.l_ins)
