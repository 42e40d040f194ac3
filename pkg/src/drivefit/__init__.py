"""Identification and energy analysis of PD-controlled electric joint drives."""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402
from .model import (  # noqa: E402
    DriveGains,
    JointLimits,
    JointParams,
    JointState,
    ModelError,
    MotorParams,
    RobotModel,
    SimConfig,
)
from .trajectory import Trajectory, read_csv, write_csv  # noqa: E402
