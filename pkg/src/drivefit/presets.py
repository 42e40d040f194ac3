"""Reference robots: identified joint parameters, drive constants, PD gains,
reward weights, and running-track trials for Tytan, ANYmal D and Minimal.

Joint order is LF, RF, LH, RH legs, each HAA, HFE, KFE.
"""
from __future__ import annotations

import numpy as np

from .model import DriveGains, JointParams, MotorParams, RobotModel

LEGS = ("LF", "RF", "LH", "RH")
JOINTS = ("HAA", "HFE", "KFE")
JOINT_NAMES = tuple(f"{leg}_{j}" for leg in LEGS for j in JOINTS)

# per robot: I_a [kg m^2], d [N m s/rad], tau_f [N m], bias [rad], T_d [s]
IDENTIFIED = {
    "tytan": dict(
        armature_inertia=np.array([140, 106, 3.3, 120, 120, 3.4, 140, 110, 3.6, 140, 110, 3.5]) * 1e-3,
        viscous_damping=np.array([1.7, 0.17, 2.1, 1.7, 0.22, 2.3, 0.50, 0.63, 3.9, 0.70, 0.83, 2.3]),
        coulomb_friction=np.array([0.0093, 0.044, 0.00025, 0.0036, 0.036, 0.0015,
                                   0.0, 0.031, 0.0010, 0.0, 0.035, 0.00050]),
        joint_bias=np.array([0.0017, -0.011, -0.028, -0.0029, -0.012, -0.026,
                             -0.0011, -0.017, -0.026, -0.00070, -0.0148, -0.0275]),
        command_delay=7.5e-3,
    ),
    "anymal": dict(
        armature_inertia=np.array([76, 76, 67, 74, 77, 67, 89, 51, 64, 79, 39, 51]) * 1e-3,
        viscous_damping=np.array([4.9, 4.4, 5.2, 4.7, 4.3, 5.3, 4.9, 4.9, 5.4, 5.1, 5.1, 5.5]),
        coulomb_friction=np.array([0.0054, 0.021, 0.028, 0.0035, 0.027, 0.036,
                                   0.0032, 0.024, 0.040, 0.0029, 0.013, 0.045]),
        joint_bias=np.array([0.022, 0.0057, -0.003, 0.011, -0.0072, 0.0094,
                             -0.012, -0.0013, -0.0095, -0.016, 0.0043, 0.0045]),
        command_delay=7.5e-3,
    ),
    "minimal": dict(
        armature_inertia=np.array([0.050, 0.025, 0.026, 0.056, 0.025, 0.025,
                                   0.049, 0.023, 0.026, 0.052, 0.028, 0.025]) * 1e-3,
        viscous_damping=np.array([0, 0, 0.092, 0.1911, 0.031, 0.030, 0, 0, 0.066, 0, 0, 0.030]),
        coulomb_friction=np.array([0.038, 0.084, 0.34, 0.033, 0.070, 0.32,
                                   0.051, 0.091, 0.31, 0.048, 0.075, 0.39]),
        joint_bias=np.array([-0.018, -0.0030, -0.0017, -0.020, 0.010, -0.018,
                             -0.00040, 0.0012, 0.0027, 0.010, -0.0065, 0.0188]),
        command_delay=0.0,
    ),
}

PD_GAINS = {"tytan": (60.0, 2.0), "anymal": (85.0, 0.6), "minimal": (4.0, 0.05)}

MASS = {"tytan": 52.3, "anymal": 52.8, "minimal": 4.2}

# drive constants; ANYmal drive data are not public, so it has no envelope
TYTAN_HIP = MotorParams(gear_ratio=5.6, motor_constant=0.59, coil_resistance=1.04, max_motor_torque=25.0,
                        max_motor_speed=94.0, bus_voltage=48.0, regen_coefficient=0.3)
# the knee linkage ratio varies with angle; the upper end of its range is used
TYTAN_KNEE = MotorParams(gear_ratio=9.0, motor_constant=1.25, coil_resistance=1.71, max_motor_torque=35.0,
                         max_motor_speed=29.0, bus_voltage=48.0, regen_coefficient=0.3)
MINIMAL_HIP = MotorParams(gear_ratio=7.2, motor_constant=0.0252, coil_resistance=0.194, max_motor_torque=0.4,
                          max_motor_speed=716.0, bus_voltage=18.0, regen_coefficient=0.3)
MINIMAL_KNEE = MotorParams(gear_ratio=16.0, motor_constant=0.0252, coil_resistance=0.194, max_motor_torque=0.4,
                           max_motor_speed=716.0, bus_voltage=18.0, regen_coefficient=0.3)

REGEN = {"tytan": 0.3, "anymal": 0.0, "minimal": 0.3}

# reward weights (c_v, c_e, c_c, c_ftd)
REWARD_WEIGHTS = {
    "tytan": (0.2, -16e-5, -1.0, -0.1),
    "anymal": (0.2, -16e-5, -1.0, -0.1),
    "minimal": (0.2, -128e-5, -1.0, -0.1),
}

BATTERY_CAPACITY_WH = 907.2

# running track: distance [m], SoC start/end, duration [s]
RUNNING_TRACK = {
    "anymal": dict(distance=4120.0, soc_start=0.95, soc_end=0.15, duration=82 * 60.0),
    "tytan": dict(distance=6100.0, soc_start=0.98, soc_end=0.05, duration=104 * 60.0),
}


def robot_names() -> list[str]:
    return sorted(IDENTIFIED)


def motors(name: str):
    if name == "tytan":
        return tuple(TYTAN_KNEE if j == "KFE" else TYTAN_HIP for _ in LEGS for j in JOINTS)
    if name == "minimal":
        return tuple(MINIMAL_KNEE if j == "KFE" else MINIMAL_HIP for _ in LEGS for j in JOINTS)
    return None


def robot(name: str, saturation: bool = True) -> RobotModel:
    """Identified 12-joint model of a reference robot."""
    key = name.lower()
    if key not in IDENTIFIED:
        raise KeyError(f"unknown robot {name!r}; choose from {robot_names()}")
    p = IDENTIFIED[key]
    joints = tuple(
        JointParams(float(a), float(d), float(f), float(b))
        for a, d, f, b in zip(p["armature_inertia"], p["viscous_damping"], p["coulomb_friction"], p["joint_bias"])
    )
    kp, kd = PD_GAINS[key]
    return RobotModel(
        joints=joints,
        gains=tuple(DriveGains(kp, kd) for _ in joints),
        motors=motors(key),
        command_delay=p["command_delay"],
        joint_names=JOINT_NAMES,
        saturation=saturation,
    )
