import math

import numpy as np
import pytest

from _support import GEOM, LIMITS, reachable_poses
from athena_kin.athena1 import ik_a1
from athena_kin.athena2 import ik_a2
from athena_kin.common import Arch, JointVector
from athena_kin.jacobian import (
    central_jacobian,
    forward_jacobian,
    numeric_jacobians,
    singularity_metrics,
    singularity_scan,
)
from athena_kin.rcm import TaskPose
from athena_kin.workspace import GridSpec, PointTable, WorkspaceResult, sweep

IK = {Arch.ATHENA1: ik_a1, Arch.ATHENA2: ik_a2}
COARSE = GridSpec((0, 300), (-500, 500), (-350, 0), 20)


@pytest.fixture(scope="module")
def coarse_results():
    return {arch: sweep(arch, COARSE, GEOM, LIMITS) for arch in Arch}


def test_difference_schemes_on_known_function():
    def f(v):
        return np.array([v[0] ** 2 * v[1], math.sin(v[1]) + 1e3 * v[0]])

    x = np.array([1.5, 0.7])
    exact = np.array([[2 * 1.5 * 0.7, 1.5 ** 2], [1e3, math.cos(0.7)]])
    assert central_jacobian(f, x) == pytest.approx(exact, rel=1e-8)
    assert forward_jacobian(f, x) == pytest.approx(exact, rel=1e-6)


@pytest.mark.parametrize("arch", list(Arch))
def test_roll_row(arch):
    p = reachable_poses(arch, 1, seed=2)[0]
    p = TaskPose(p.psi, p.theta, 0.0, p.l_ins)
    jp = numeric_jacobians(arch, p, IK[arch](p, GEOM, LIMITS), GEOM)
    assert jp.jq[3, 3] == pytest.approx(1.0, abs=1e-6)
    assert abs(jp.jx[3, 0]) <= 1e-9
    assert jp.jx[3, 2] == pytest.approx(-1.0, abs=1e-6)
    assert np.all(jp.jq[3, :3] == 0)


def test_metrics_on_injected_matrices():
    m = singularity_metrics((np.eye(4), np.eye(4)))
    assert (m.abs_det_q, m.cond_q, m.normalized_det_q, m.singular) == (1.0, 1.0, 1.0, False)
    z = np.eye(4)
    z[2] = 0
    m = singularity_metrics((z, np.eye(4)))
    assert m.abs_det_q == 0.0 and m.singular and math.isinf(m.cond_q)


def test_normalized_det_is_row_scale_free():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(4, 4))
    s = np.diag([1e-3, 1.0, 1e4, 7.0])
    assert singularity_metrics((s @ a, a)).normalized_det_q == pytest.approx(
        singularity_metrics((a, a)).normalized_det_q, rel=1e-12
    )


def test_interior_sample_minimum():
    # Regression value at 100 random valid points of the default geometry.
    worst = {}
    for arch in Arch:
        vals = []
        for p in reachable_poses(arch, 100, seed=27):
            jp = numeric_jacobians(arch, p, IK[arch](p, GEOM, LIMITS), GEOM)
            vals.append(singularity_metrics(jp).normalized_det_q)
        worst[arch] = min(vals)
    assert worst[Arch.ATHENA1] == pytest.approx(0.4390297911968516, rel=1e-6)
    assert worst[Arch.ATHENA2] == pytest.approx(0.9997960591916545, rel=1e-6)


def test_empty_scan():
    empty = WorkspaceResult(Arch.ATHENA1, COARSE, 0, 0, {}, PointTable.empty())
    rep = singularity_scan(empty, GEOM)
    assert (rep.evaluated_count, rep.flagged_count, rep.min_abs_det_q) == (0, 0, None)


def test_coarse_scan_pinned(coarse_results):
    a1 = singularity_scan(coarse_results[Arch.ATHENA1], GEOM)
    a2 = singularity_scan(coarse_results[Arch.ATHENA2], GEOM)
    assert (a1.evaluated_count, a1.flagged_count) == (621, 0)
    assert (a2.evaluated_count, a2.flagged_count) == (756, 0)
    assert a1.min_abs_det_q == pytest.approx(0.4229259219798254, rel=1e-6)
    assert a1.argmin_point == [260.0, -60.0, -90.0]
    assert a2.min_abs_det_q == pytest.approx(0.9992021092187346, rel=1e-6)


def test_stride_subset_minimum_not_below_full(coarse_results):
    for arch, res in coarse_results.items():
        full = singularity_scan(res, GEOM)
        sub = singularity_scan(res, GEOM, stride=10)
        assert sub.evaluated_count == math.ceil(full.evaluated_count / 10)
        assert sub.min_abs_det_q >= full.min_abs_det_q
        assert sub.min_abs_det_q_raw >= full.min_abs_det_q_raw


def test_scan_workers_agree(coarse_results):
    res = coarse_results[Arch.ATHENA2]
    assert singularity_scan(res, GEOM, stride=5, workers=2, chunk=40) == singularity_scan(res, GEOM, stride=5)


def test_scan_rejects_bad_input(coarse_results):
    with pytest.raises(ValueError):
        singularity_scan(coarse_results[Arch.ATHENA1], GEOM, stride=0)


def test_threshold_flags(coarse_results):
    rep = singularity_scan(coarse_results[Arch.ATHENA1], GEOM, threshold=0.5, stride=3)
    assert 0 < rep.flagged_count < rep.evaluated_count
