"""Tip stiffness: the K = F / delta utility, the published FEM comparison table,
and a lumped joint-compliance model.

The lumped model maps per-joint stiffnesses through the tip Jacobians. It is
an estimate for comparing architectures under identical joint assumptions;
it does not reproduce finite-element results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .common import Arch, JointVector
from .config import GeometryParams, KinematicsOptions
from .errors import SingularJacobianError, StiffnessError
from .jacobian import tip_jacobians
from .rcm import TaskPose, axis_direction, pose_to_tip

PAPER_TABLE = "PAPER_TABLE"
LUMPED_MODEL = "LUMPED_MODEL"

# Published FEM tip results under a 30 N load, carried as data.
TABLE_FORCE_N = 30.0
PAPER_ROWS = (
    {"name": "ATHENA-1", "displacement_mm": "0.23", "stiffness_n_per_mm": "130.43", "stress_mpa": "15.29"},
    {"name": "ATHENA-2", "displacement_mm": "3.96", "stiffness_n_per_mm": "7.58", "stress_mpa": "197.29"},
    {"name": "Commercial robots", "displacement_mm": "0.2-0.5", "stiffness_n_per_mm": "5-10", "stress_mpa": "30-65"},
)
COMMERCIAL_BAND_N_PER_MM = (5.0, 10.0)
DISPLACEMENT_FOOTNOTE = "Commercial robots are also quoted with tip displacements of 0.1-1.4 mm."
NO_ESTIMATES = "no model estimates"

_COND_MAX = 1e12


def stiffness_from_deflection(force: float, deflection: float) -> float:
    """K = F / delta in N/mm."""
    if not deflection > 0:
        raise StiffnessError(f"deflection must be > 0 mm (got {deflection})")
    if force < 0:
        raise StiffnessError(f"force must be >= 0 N (got {force})")
    return force / deflection


@dataclass(frozen=True)
class StiffnessSample:
    force: float
    deflection: float

    def __post_init__(self):
        stiffness_from_deflection(self.force, self.deflection)

    @property
    def stiffness(self) -> float:
        return stiffness_from_deflection(self.force, self.deflection)


@dataclass(frozen=True)
class TipStiffnessEstimate:
    matrix: np.ndarray  # 3x3, N/mm
    scalar_along_axis: float
    arch: Arch
    provenance: str = LUMPED_MODEL
    label: str = "illustrative"

    @property
    def min_eigenvalue(self) -> float:
        """Stiffness in the weakest Cartesian direction, N/mm."""
        return float(np.linalg.eigvalsh(self.matrix)[0])


def _ratio_text(a: float, b: float) -> str:
    r = a / b
    if abs(r - 1.0) < 1e-6:
        return f"{r:.4g} (equal)"
    return f"{r:.4g} ({'ATHENA-1' if r > 1 else 'ATHENA-2'} stiffer)"


def lumped_tip_stiffness(
    arch: Arch,
    pose: TaskPose,
    q: JointVector,
    geom: GeometryParams,
    joint_stiffness,
    options: KinematicsOptions | None = None,
    label: str = "illustrative",
) -> TipStiffnessEstimate:
    """Cartesian tip stiffness from per-joint stiffnesses k1..k3.

    With F(q, x) = 0 linking the actuated q1..q3 to the tip point x,
    dq = J dx where J = -Fq^-1 Fx, so K_tip = J^T diag(k) J. q4 (roll) does
    not move the tip point and is left out. Units follow the joints: N/mm for
    prismatic joints, N*mm/rad for the ATHENA-2 crank.
    """
    k = np.asarray(joint_stiffness, dtype=float)
    if k.shape != (3,) or not np.all(k > 0):
        raise StiffnessError("joint_stiffness must hold three positive values")
    tip = pose_to_tip(pose, geom)
    fq, fx = tip_jacobians(arch, tip, q, geom, options)
    cond = np.linalg.cond(fq)
    if not np.isfinite(cond) or cond > _COND_MAX:
        raise SingularJacobianError(float(cond))
    jac = -np.linalg.solve(fq, fx)
    mat = jac.T @ (k[:, None] * jac)
    mat = 0.5 * (mat + mat.T)
    u = axis_direction(pose.psi, pose.theta)
    scalar = 1.0 / float(u @ np.linalg.solve(mat, u))
    return TipStiffnessEstimate(mat, scalar, Arch(arch), LUMPED_MODEL, label)


def stiffness_report(samples=(), estimates=(), include_published: bool = True) -> dict:
    """Rows for the FEM comparison table, each tagged with its provenance.

    ``samples`` are (name, StiffnessSample) pairs whose K is computed here
    (tagged PAPER_TABLE: the inputs are published values); ``estimates`` are
    TipStiffnessEstimate objects (tagged LUMPED_MODEL).
    """
    rows = []
    if include_published:
        for r in PAPER_ROWS:
            rows.append({**r, "provenance": PAPER_TABLE})
    for name, s in samples:
        rows.append(
            {
                "name": name,
                "displacement_mm": f"{s.deflection:g}",
                "stiffness_n_per_mm": f"{s.stiffness:.2f}",
                "stress_mpa": "",
                "provenance": PAPER_TABLE,
            }
        )
    notes = [DISPLACEMENT_FOOTNOTE]
    model_rows = []
    for e in estimates:
        model_rows.append(
            {
                "name": f"{Arch(e.arch).value} lumped ({e.label})",
                "displacement_mm": f"{TABLE_FORCE_N / e.scalar_along_axis:.4g}",
                "stiffness_n_per_mm": f"{e.scalar_along_axis:.2f}",
                "stress_mpa": "",
                "provenance": e.provenance,
            }
        )
    if model_rows:
        rows.extend(model_rows)
        by_arch = {Arch(e.arch): e for e in estimates}
        if Arch.ATHENA1 in by_arch and Arch.ATHENA2 in by_arch:
            e1, e2 = by_arch[Arch.ATHENA1], by_arch[Arch.ATHENA2]
            notes.append(
                f"lumped model, ATHENA-1/ATHENA-2 ratios: axial {_ratio_text(e1.scalar_along_axis, e2.scalar_along_axis)}, "
                f"weakest direction {_ratio_text(e1.min_eigenvalue, e2.min_eigenvalue)}; "
                "the published FEM results list ATHENA-1 as the stiffer design"
            )
    else:
        notes.append(NO_ESTIMATES)
    return {"force_n": TABLE_FORCE_N, "rows": rows, "notes": notes}


def format_report(report: dict) -> str:
    cols = ("name", "displacement_mm", "stiffness_n_per_mm", "stress_mpa", "provenance")
    heads = ("design", "disp [mm]", "K [N/mm]", "stress [MPa]", "source")
    widths = [max(len(h), *(len(str(r[c])) for r in report["rows"])) for c, h in zip(cols, heads)]
    line = "  ".join(h.ljust(w) for h, w in zip(heads, widths))
    out = [f"tip load {report['force_n']:g} N", line, "-" * len(line)]
    for r in report["rows"]:
        out.append("  ".join(str(r[c]).ljust(w) for c, w in zip(cols, widths)))
    out.extend(f"* {n}" for n in report["notes"])
    return "\n".join(out)


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"

