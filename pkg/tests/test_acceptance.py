"""Acceptance criteria, one test each. Every test records a PASS/FAIL line that
is printed in the pytest terminal summary."""

import io
import itertools
import math
import time

import numpy as np
import pytest

from _support import GEOM, LIMITS, joint_error, pose_error, reachable_poses
from athena_kin.athena1 import fk_a1, ik_a1, residuals_a1, solve_a1_arrays
from athena_kin.athena2 import fk_a2, ik_a2, residuals_a2, solve_a2_arrays
from athena_kin.common import Arch, JointVector
from athena_kin.jacobian import forward_jacobian, numeric_jacobians, residual_closures, singularity_scan
from athena_kin.rcm import TaskPose, TipPoint, pose_to_tip, tip_to_pose
from athena_kin.stiffness import LUMPED_MODEL, PAPER_TABLE, stiffness_from_deflection, stiffness_report
from athena_kin.workspace import GridSpec, compare, enumerate_grid, export, grid_slices, sweep, synthetic_result

IK = {Arch.ATHENA1: ik_a1, Arch.ATHENA2: ik_a2}
FK = {Arch.ATHENA1: fk_a1, Arch.ATHENA2: fk_a2}
RES = {Arch.ATHENA1: residuals_a1, Arch.ATHENA2: residuals_a2}


@pytest.fixture(scope="module")
def full_sweeps():
    out = {}
    t0 = time.perf_counter()
    for arch in Arch:
        out[arch] = sweep(arch, GridSpec.default(), GEOM, LIMITS, workers=1)
    out["seconds"] = time.perf_counter() - t0
    return out


def test_ac1_deflection_to_stiffness(report):
    t0 = time.perf_counter()
    k1 = stiffness_from_deflection(30, 0.23)
    k2 = stiffness_from_deflection(30, 3.96)
    dt = time.perf_counter() - t0
    ok = abs(k1 - 130.43) <= 0.01 and abs(k2 - 7.58) <= 0.01 and dt < 1.0
    report("AC1", ok, f"K(30 N, 0.23 mm)={k1:.4f}, K(30 N, 3.96 mm)={k2:.4f} N/mm "
           f"(targets 130.43/7.58 +-0.01), {dt * 1e3:.3f} ms")
    assert ok


def test_ac2_published_count_ratio(report):
    t0 = time.perf_counter()
    spec = GridSpec.default()
    rep = compare(synthetic_result(Arch.ATHENA1, spec, 196_817), synthetic_result(Arch.ATHENA2, spec, 241_586))
    dt = time.perf_counter() - t0
    ok = abs(rep.ratio_percent - 22.75) <= 0.05 and dt < 1.0
    report("AC2", ok, f"ratio {rep.ratio_percent:.4f}% (target 22.75 +-0.05, synthetic counts; "
           f"the published counts are not reproduced), {dt * 1e3:.3f} ms")
    assert ok


def test_ac3_grid_cardinality(report):
    spec = GridSpec.default()
    t0 = time.perf_counter()
    enumerated = sum(x.size for _, x, _, _ in grid_slices(spec))
    dt = time.perf_counter() - t0
    first = list(itertools.islice(enumerate_grid(spec), 2))
    ok = (
        spec.shape == (151, 501, 176)
        and spec.total == 13_314_576
        and enumerated == 13_314_576
        and first[0] == TipPoint(0.0, -500.0, -350.0)
        and first[1] == TipPoint(0.0, -500.0, -348.0)
        and dt < 5.0
    )
    report("AC3", ok, f"shape {spec.shape}, closed form {spec.total}, enumerated {enumerated}, {dt:.2f} s (< 5 s)")
    assert ok


def test_ac4_residual_oracle(report):
    t0 = time.perf_counter()
    worst = {}
    for arch in Arch:
        poses = reachable_poses(arch, 1000, seed=11)
        worst[arch] = max(RES[arch](IK[arch](p, GEOM, LIMITS), p, GEOM).max_scaled() for p in poses)
    dt = time.perf_counter() - t0
    ok = all(v <= 1e-9 for v in worst.values()) and dt < 10.0
    report("AC4", ok, f"max scaled residual athena1 {worst[Arch.ATHENA1]:.2e}, athena2 {worst[Arch.ATHENA2]:.2e} "
           f"(<= 1e-9) over 2x1000 poses, {dt:.2f} s (< 10 s)")
    assert ok


def test_ac5_round_trips(report):
    t0 = time.perf_counter()
    fk_ik, ik_fk = {}, {}
    for arch in Arch:
        e1 = e2 = 0.0
        for p in reachable_poses(arch, 1000, seed=21):
            q = IK[arch](p, GEOM, LIMITS)
            p2 = FK[arch](q, GEOM, limits=LIMITS)
            e1 = max(e1, pose_error(p, p2))
            e2 = max(e2, joint_error(q, IK[arch](p2, GEOM, LIMITS)))
        fk_ik[arch], ik_fk[arch] = e1, e2
    rng = np.random.default_rng(5)
    e_rcm = 0.0
    for _ in range(10_000):
        p = TaskPose(rng.uniform(-math.pi, math.pi), rng.uniform(1e-3, math.pi - 1e-3), 0.0, rng.uniform(0, 250))
        e_rcm = max(e_rcm, pose_error(p, tip_to_pose(pose_to_tip(p, GEOM), 0.0, GEOM, LIMITS)))
    dt = time.perf_counter() - t0
    ok = max(*fk_ik.values(), *ik_fk.values()) <= 1e-8 and e_rcm <= 1e-9 and dt < 30.0
    report("AC5", ok, "FK(IK) " + ", ".join(f"{a.value} {fk_ik[a]:.1e}" for a in Arch)
           + "; IK(FK) " + ", ".join(f"{a.value} {ik_fk[a]:.1e}" for a in Arch)
           + f" (<= 1e-8); RCM {e_rcm:.1e} (<= 1e-9) over 10000; {dt:.1f} s (< 30 s)")
    assert ok


def test_ac6_shared_equations(report):
    rng = np.random.default_rng(6)
    pts = np.column_stack([rng.uniform(0, 300, 100_000), rng.uniform(-500, 500, 100_000), rng.uniform(-350, 0, 100_000)])
    pts = pts[np.linalg.norm(pts, axis=1) < GEOM.l_tool]
    a1 = solve_a1_arrays(pts[:, 0], pts[:, 1], pts[:, 2], 0.0, GEOM, None)
    a2 = solve_a2_arrays(pts[:, 0], pts[:, 1], pts[:, 2], 0.0, GEOM, None)
    both = pts[(a1.reason == 0) & (a2.reason == 0)][:1000]
    phis = rng.uniform(-1.5, 1.5, len(both))
    mismatches = 0
    for t, phi in zip(both, phis):
        p = tip_to_pose(TipPoint(*map(float, t)), float(phi), GEOM)
        q1, q2 = ik_a1(p, GEOM), ik_a2(p, GEOM)
        mismatches += (q1.q1, q1.q2, q1.q4) != (q2.q1, q2.q2, q2.q4)
    ok = len(both) == 1000 and mismatches == 0
    report("AC6", ok, f"q1, q2, q4 bitwise equal on {len(both) - mismatches}/{len(both)} shared poses")
    assert ok


def _sorted_csv(result):
    buf = io.StringIO()
    export(result, "csv", buf)
    lines = buf.getvalue().splitlines()
    return [lines[0]] + sorted(lines[1:])


def test_ac7_determinism(report, full_sweeps):
    workers = 4
    t0 = time.perf_counter()
    parallel = {arch: sweep(arch, GridSpec.default(), GEOM, LIMITS, workers=workers) for arch in Arch}
    dt = time.perf_counter() - t0
    same = all(
        parallel[a].valid_count == full_sweeps[a].valid_count
        and parallel[a].reason_histogram == full_sweeps[a].reason_histogram
        and _sorted_csv(parallel[a]) == _sorted_csv(full_sweeps[a])
        for a in Arch
    )
    ok = same and full_sweeps["seconds"] < 120 and dt < 120
    report("AC7", ok, f"1 vs {workers} workers identical counts and sorted CSVs: {same}; two-architecture sweep "
           f"{full_sweeps['seconds']:.1f} s serial, {dt:.1f} s with {workers} workers (< 120 s)")
    assert ok


def test_ac8_athena2_workspace_larger(report, full_sweeps):
    a, b = full_sweeps[Arch.ATHENA1], full_sweeps[Arch.ATHENA2]
    rep = compare(a, b)
    ok = b.valid_count > a.valid_count
    report("AC8", ok, f"repo-default geometry: athena1 {a.valid_count}, athena2 {b.valid_count}, "
           f"difference {rep.ratio_percent:+.2f}% (direction only)")
    assert ok


def _fd_agreement(arch, pose, q):
    """(row-scaled, entrywise) worst relative difference and largest structural zero.

    Row-scaled divides each difference by the largest |entry| of its residual
    row. Entrywise divides by the entry itself, which for entries several
    decades below their row sits under the forward scheme's rounding floor.
    """
    row_worst = entry_worst = 0.0
    of_q, of_x = residual_closures(arch, pose, q, GEOM)
    jp = numeric_jacobians(arch, pose, q, GEOM)
    for central, func, x in (
        (jp.jq, of_q, q.as_array()),
        (jp.jx, of_x, np.array([pose.psi, pose.theta, pose.phi, pose.l_ins])),
    ):
        diff = np.abs(forward_jacobian(func, x) - central)
        row = np.max(np.abs(central), axis=1, keepdims=True)
        row_worst = max(row_worst, float(np.max(diff / np.where(row == 0, 1.0, row))))
        entry = np.where(diff == 0, 0.0, diff / np.maximum(np.abs(central), 1e-300))
        entry_worst = max(entry_worst, float(np.max(entry)))
    zeros = max(abs(jp.jx[3, 0]), abs(jp.jx[3, 1]), abs(jp.jx[3, 3]), abs(jp.jq[0, 2]), abs(jp.jq[0, 3]))
    return row_worst, entry_worst, zeros


def test_ac9_jacobians_and_singularity_scan(report):
    worst_rel = worst_entry = worst_zero = 0.0
    for arch in Arch:
        for p in reachable_poses(arch, 10, seed=9):
            rel, entry, zero = _fd_agreement(arch, p, IK[arch](p, GEOM, LIMITS))
            worst_rel, worst_entry, worst_zero = max(worst_rel, rel), max(worst_entry, entry), max(worst_zero, zero)
    coarse = GridSpec((0, 300), (-500, 500), (-350, 0), 20)
    scans = {arch: singularity_scan(sweep(arch, coarse, GEOM, LIMITS), GEOM, threshold=1e-8) for arch in Arch}
    ok = worst_rel <= 1e-4 and worst_zero <= 1e-9 and all(s.evaluated_count > 0 for s in scans.values())
    flagged = {a: s.flagged_count for a, s in scans.items()}
    report("AC9", ok, f"central vs forward {worst_rel:.1e} row-scaled (<= 1e-4; entrywise {worst_entry:.1e}), "
           f"structural zeros {worst_zero:.1e} (<= 1e-9); "
           + "; ".join(f"{a.value} 20 mm scan min normalized |det Jq| {s.min_abs_det_q:.4f}, "
                       f"{s.flagged_count}/{s.evaluated_count} below 1e-8" for a, s in scans.items()))
    assert ok
    # Finding for the default geometry: no flagged point on the coarse grid.
    assert flagged == {Arch.ATHENA1: 0, Arch.ATHENA2: 0}


def test_ac10_fem_values_reported_not_reproduced(report):
    rep = stiffness_report()
    fem = {r["name"]: (r["displacement_mm"], r["stress_mpa"], r["provenance"]) for r in rep["rows"]}
    ok = (
        fem["ATHENA-1"] == ("0.23", "15.29", PAPER_TABLE)
        and fem["ATHENA-2"] == ("3.96", "197.29", PAPER_TABLE)
        and all(r["provenance"] in (PAPER_TABLE, LUMPED_MODEL) for r in rep["rows"])
    )
    report("AC10", ok, "FEM displacements/stresses carried as PAPER_TABLE data only; not recomputed "
           "(no mesh, material or boundary data); stiffness arithmetic covered by AC1")
    assert ok
