"""Value types describing a PD-controlled multi-joint robot.

All quantities are SI. Per-joint parameters live in small frozen dataclasses;
``RobotModel`` bundles them and offers array views for the simulation kernels.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

BIAS_LIMIT = 0.2  # rad


class ModelError(ValueError):
    """Raised when a model description violates its invariants."""


@dataclass(frozen=True)
class JointParams:
    armature_inertia: float
    viscous_damping: float = 0.0
    coulomb_friction: float = 0.0
    joint_bias: float = 0.0

    def __post_init__(self):
        if not self.armature_inertia > 0:
            raise ModelError(f"armature_inertia must be > 0, got {self.armature_inertia}")
        if self.viscous_damping < 0 or self.coulomb_friction < 0:
            raise ModelError("viscous_damping and coulomb_friction must be >= 0")
        if abs(self.joint_bias) > BIAS_LIMIT:
            raise ModelError(f"|joint_bias| must be <= {BIAS_LIMIT} rad, got {self.joint_bias}")


@dataclass(frozen=True)
class DriveGains:
    p_gain: float
    d_gain: float

    def __post_init__(self):
        if not self.p_gain > 0:
            raise ModelError(f"p_gain must be > 0, got {self.p_gain}")
        if self.d_gain < 0:
            raise ModelError(f"d_gain must be >= 0, got {self.d_gain}")


@dataclass(frozen=True)
class MotorParams:
    """Electrical and transmission constants of one drive.

    ``back_emf_constant`` defaults to ``motor_constant`` (the SI identity
    k_omega = k_i for a PMSM) when left as ``None``.
    """

    gear_ratio: float
    motor_constant: float
    coil_resistance: float
    max_motor_torque: float = np.inf
    max_motor_speed: float = np.inf
    bus_voltage: float = np.inf
    regen_coefficient: float = 0.0
    phase_inductance: Optional[float] = None
    back_emf_constant: Optional[float] = None

    def __post_init__(self):
        if not self.gear_ratio > 0:
            raise ModelError("gear_ratio must be > 0")
        if not self.motor_constant > 0:
            raise ModelError("motor_constant must be > 0")
        if not self.coil_resistance > 0:
            raise ModelError("coil_resistance must be > 0")
        if not 0.0 <= self.regen_coefficient <= 1.0:
            raise ModelError("regen_coefficient must lie in [0, 1]")

    @property
    def k_omega(self) -> float:
        return self.motor_constant if self.back_emf_constant is None else self.back_emf_constant


@dataclass(frozen=True)
class JointLimits:
    soft_lower: float
    soft_upper: float
    hard_lower: float
    hard_upper: float

    def __post_init__(self):
        if not self.hard_lower < self.soft_lower < self.soft_upper < self.hard_upper:
            raise ModelError("limits must satisfy hard_lower < soft_lower < soft_upper < hard_upper")


@dataclass(frozen=True)
class JointState:
    position: float
    velocity: float = 0.0
    filtered_velocity: Optional[float] = None

    def __post_init__(self):
        if self.filtered_velocity is None:
            object.__setattr__(self, "filtered_velocity", self.velocity)
        if not np.all(np.isfinite([self.position, self.velocity, self.filtered_velocity])):
            raise ModelError("joint state must be finite")


@dataclass(frozen=True)
class SimConfig:
    physics_dt: float = 2.5e-4
    control_dt: float = 2.5e-3
    integrator: str = "semi-implicit-euler"

    def __post_init__(self):
        if self.integrator != "semi-implicit-euler":
            raise ModelError(f"unsupported integrator {self.integrator!r}")
        if not 0 < self.physics_dt <= self.control_dt:
            raise ModelError("need 0 < physics_dt <= control_dt")
        ratio = self.control_dt / self.physics_dt
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ModelError("control_dt must be an integer multiple of physics_dt")

    @property
    def substeps(self) -> int:
        return int(round(self.control_dt / self.physics_dt))


@dataclass(frozen=True)
class RobotModel:
    joints: tuple
    gains: tuple
    motors: Optional[tuple] = None
    limits: Optional[tuple] = None
    command_delay: float = 0.0
    velocity_filter_cutoff: Optional[float] = None
    joint_names: Optional[tuple] = None
    saturation: bool = field(default=True)

    def __post_init__(self):
        for name in ("joints", "gains", "motors", "limits", "joint_names"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value))
        n = len(self.joints)
        if n == 0:
            raise ModelError("model needs at least one joint")
        for name in ("gains", "motors", "limits", "joint_names"):
            value = getattr(self, name)
            if value is not None and len(value) != n:
                raise ModelError(f"{name} has {len(value)} entries, expected {n}")
        if self.command_delay < 0:
            raise ModelError("command_delay must be >= 0")
        if self.velocity_filter_cutoff is not None and not self.velocity_filter_cutoff > 0:
            raise ModelError("velocity_filter_cutoff must be > 0 when set")

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    def names(self) -> list[str]:
        if self.joint_names is not None:
            return list(self.joint_names)
        return [f"joint{i}" for i in range(self.n_joints)]

    # array views -----------------------------------------------------------
    def joint_array(self, attr: str) -> np.ndarray:
        return np.array([getattr(j, attr) for j in self.joints], dtype=float)

    def gain_array(self, attr: str) -> np.ndarray:
        return np.array([getattr(g, attr) for g in self.gains], dtype=float)

    def with_joint_params(
        self,
        armature_inertia: Sequence[float],
        viscous_damping: Sequence[float],
        coulomb_friction: Sequence[float],
        joint_bias: Sequence[float],
        command_delay: Optional[float] = None,
    ) -> "RobotModel":
        joints = tuple(
            JointParams(float(a), float(d), float(f), float(b))
            for a, d, f, b in zip(armature_inertia, viscous_damping, coulomb_friction, joint_bias)
        )
        delay = self.command_delay if command_delay is None else float(command_delay)
        return replace(self, joints=joints, command_delay=delay)

    def scaled(self, factor: float) -> "RobotModel":
        """Scale inertia, damping and both PD gains by a common factor."""
        joints = tuple(
            replace(j, armature_inertia=j.armature_inertia * factor, viscous_damping=j.viscous_damping * factor)
            for j in self.joints
        )
        gains = tuple(DriveGains(g.p_gain * factor, g.d_gain * factor) for g in self.gains)
        return replace(self, joints=joints, gains=gains)
