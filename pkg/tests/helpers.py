"""Shared builders for the test modules."""
import numpy as np

from drivefit.model import DriveGains, JointParams, RobotModel
from drivefit.trajectory import Trajectory


def make_targets(target, control_dt=2.5e-3, q0=None, qd0=None):
    target = np.asarray(target, dtype=float)
    if target.ndim == 1:
        target = target[:, None]
    k, n = target.shape
    t = np.arange(k) * control_dt
    q = np.zeros_like(target)
    qd = np.zeros_like(target)
    if q0 is not None:
        q[0] = q0
    if qd0 is not None:
        qd[0] = qd0
    return Trajectory(t=t, q=q, qd=qd, target=target)


def single_joint(inertia=0.1, damping=0.0, friction=0.0, bias=0.0, p=60.0, d=2.0, delay=0.0, **kw):
    return RobotModel(joints=(JointParams(inertia, damping, friction, bias),), gains=(DriveGains(p, d),),
                      command_delay=delay, **kw)
