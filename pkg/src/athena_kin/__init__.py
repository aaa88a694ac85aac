"""Kinematics, workspace and stiffness analysis for the ATHENA-1 and ATHENA-2
parallel surgical robots."""

__version__ = "0.1.0"

from .athena1 import fk_a1, ik_a1, residuals_a1
from .athena2 import fk_a2, ik_a2, residuals_a2
from .common import Arch, JointVector, Reason, Residuals
from .config import Config, GeometryParams, JointLimits, KinematicsOptions, default_config, load_config
from .rcm import TaskPose, TipPoint, pose_to_tip, tip_to_pose

__all__ = [
    "Arch",
    "Config",
    "GeometryParams",
    "JointLimits",
    "JointVector",
    "KinematicsOptions",
    "Reason",
    "Residuals",
    "TaskPose",
    "TipPoint",
    "default_config",
    "fk_a1",
    "fk_a2",
    "ik_a1",
    "ik_a2",
    "load_config",
    "pose_to_tip",
    "residuals_a1",
    "residuals_a2",
    "tip_to_pose",
]
