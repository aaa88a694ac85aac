import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from athena_kin.config import GeometryParams, JointLimits
from athena_kin.errors import DegenerateTipError, InsertionRangeError
from athena_kin.rcm import TaskPose, TipPoint, axis_direction, normalize_pose, pose_to_tip, tip_to_pose

G400 = GeometryParams(210, 210, 160, 121, 80, 70, 360, 400, 0, -310, 0)
LIM400 = JointLimits.from_geometry(G400)


@pytest.mark.parametrize(
    "pose, tip",
    [
        (TaskPose(1.234, 0.0, 0.0, 50.0), (0.0, 0.0, 350.0)),
        (TaskPose(0.0, math.pi / 2, 0.0, 100.0), (300.0, 0.0, 0.0)),
        (TaskPose(math.pi / 2, math.pi / 2, 0.0, 150.0), (0.0, 250.0, 0.0)),
    ],
)
def test_pose_to_tip_axis_cases(pose, tip):
    assert pose_to_tip(pose, G400).as_array() == pytest.approx(tip, abs=1e-12)


def test_tip_to_pose_axis_cases():
    p = tip_to_pose(TipPoint(0.0, 0.0, 350.0), 0.0, G400, LIM400)
    assert (p.psi, p.theta, p.l_ins) == (0.0, 0.0, 50.0)
    assert p.azimuth_degenerate
    p = tip_to_pose(TipPoint(300.0, 0.0, 0.0), 0.0, G400, LIM400)
    assert (p.psi, p.theta, p.l_ins) == (0.0, pytest.approx(math.pi / 2), 100.0)


def test_south_pole_accepted():
    p = tip_to_pose(TipPoint(0.0, 0.0, -300.0), 0.0, G400, LIM400)
    assert p.theta == math.pi and p.psi == 0.0 and p.azimuth_degenerate


def test_degenerate_and_insertion_errors():
    with pytest.raises(DegenerateTipError):
        tip_to_pose(TipPoint(0.0, 0.0, 0.0), 0.0, G400, LIM400)
    with pytest.raises(InsertionRangeError):
        tip_to_pose(TipPoint(0.0, 0.0, 401.0), 0.0, G400, LIM400)  # l_ins < 0
    with pytest.raises(InsertionRangeError):
        tip_to_pose(TipPoint(0.0, 0.0, 150.0), 0.0, G400, LIM400)  # l_ins = lins_max, excluded


def test_normalize_pose():
    p = normalize_pose(TaskPose(0.3, -0.5, 0.0, 10.0))
    assert p.theta == pytest.approx(0.5) and p.psi == pytest.approx(0.3 + math.pi - 2 * math.pi)
    assert pose_to_tip(p, G400).as_array() == pytest.approx(pose_to_tip(TaskPose(0.3, -0.5, 0.0, 10.0), G400).as_array())


poses = st.builds(
    TaskPose,
    st.floats(-math.pi + 1e-9, math.pi),
    st.floats(1e-6, math.pi - 1e-6),
    st.floats(-1.5, 1.5),
    st.floats(0.0, 249.0),
)


@settings(max_examples=300, deadline=None)
@given(poses)
def test_round_trip(pose):
    back = tip_to_pose(pose_to_tip(pose, G400), pose.phi, G400, LIM400)
    assert back.psi == pytest.approx(pose.psi, abs=1e-9)
    assert back.theta == pytest.approx(pose.theta, abs=1e-9)
    assert back.l_ins == pytest.approx(pose.l_ins, abs=1e-9)
    assert back.phi == pose.phi


@settings(max_examples=300, deadline=None)
@given(poses)
def test_tip_on_axis_at_expected_distance(pose):
    tip = pose_to_tip(pose, G400).as_array()
    r = G400.l_tool - pose.l_ins
    assert np.linalg.norm(tip) == pytest.approx(r, rel=1e-12)
    # Tip, RCM and axis direction are collinear.
    assert np.linalg.norm(np.cross(tip, axis_direction(pose.psi, pose.theta))) <= 1e-9 * r
    assert float(tip @ axis_direction(pose.psi, pose.theta)) == pytest.approx(r, rel=1e-12)
