"""Closed-loop joint dynamics: PD law, torque-speed envelope, limit-safe
targets, and fixed-step rollouts.

The scalar functions here define the per-step semantics; ``rollout`` runs
the same chain for many joints and candidates through the batch kernel in
:mod:`drivefit.kernels`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .model import (
    DriveGains,
    JointLimits,
    JointParams,
    JointState,
    ModelError,
    MotorParams,
    RobotModel,
    SimConfig,
)
from .trajectory import Trajectory, TrajectoryError

STICK_SPEED = 1e-6  # rad/s, below which Coulomb friction may hold the joint


class ConfigurationError(ModelError):
    pass


def pd_torque(target: float, state: JointState, gains: DriveGains, bias: float = 0.0,
              use_filtered: bool = False) -> float:
    """Unsaturated PD torque ``P (target - q + bias) - D qd``."""
    vel = state.filtered_velocity if use_filtered else state.velocity
    return gains.p_gain * (target - state.position + bias) - gains.d_gain * vel


@dataclass(frozen=True)
class SaturationEnvelope:
    """Torque-speed envelope of a voltage-limited drive.

    The available torque in the direction of motion is flat at
    ``max_torque`` up to ``emf_corner_speed`` and falls linearly to zero at
    ``zero_torque_speed``. Braking torque (opposing the motion) is only
    limited by ``max_torque`` until the mirrored line is reached, which makes
    the envelope point-symmetric: ``upper(w) == -lower(-w)``.
    """

    max_torque: float
    emf_corner_speed: float
    zero_torque_speed: float

    def __post_init__(self):
        if not 0 < self.emf_corner_speed < self.zero_torque_speed:
            raise ConfigurationError("envelope needs 0 < emf_corner_speed < zero_torque_speed")
        if not self.max_torque > 0:
            raise ConfigurationError("envelope max_torque must be > 0")

    @property
    def slope(self) -> float:
        return self.max_torque / (self.zero_torque_speed - self.emf_corner_speed)

    def upper(self, speed):
        b = self.slope * (self.zero_torque_speed - np.asarray(speed, dtype=float))
        b = np.where(b > self.max_torque, self.max_torque, b)
        b = np.where(b < 0.0, 0.0, b)
        return b if b.ndim else float(b)

    def lower(self, speed):
        return -self.upper(-np.asarray(speed, dtype=float))

    def as_row(self) -> list[float]:
        return [1.0, self.max_torque, self.emf_corner_speed, self.zero_torque_speed]


def build_envelope(motor: MotorParams, joint_side: bool = True) -> SaturationEnvelope:
    """Envelope ``min(tau_max, k_i (u - k_w w) / R)`` clamped at zero.

    With ``joint_side`` the torque axis is multiplied and the speed axis
    divided by the gear ratio.
    """
    if not math.isfinite(motor.bus_voltage) or not math.isfinite(motor.max_motor_torque):
        raise ConfigurationError("envelope needs finite bus_voltage and max_motor_torque")
    k_w = motor.k_omega
    if k_w is None or not k_w > 0:
        raise ConfigurationError("envelope needs a positive back-EMF constant")
    zero = motor.bus_voltage / k_w
    corner = (motor.bus_voltage - motor.max_motor_torque * motor.coil_resistance / motor.motor_constant) / k_w
    if corner <= 0:
        raise ConfigurationError(
            "max_motor_torque exceeds the stall torque available from the bus voltage"
        )
    tmax = motor.max_motor_torque
    if joint_side:
        r = motor.gear_ratio
        return SaturationEnvelope(tmax * r, corner / r, zero / r)
    return SaturationEnvelope(tmax, corner, zero)


def saturate_torque(cmd: float, speed: float, env: Optional[SaturationEnvelope]) -> float:
    if env is None:
        return cmd
    hi = env.upper(speed)
    lo = env.lower(speed)
    if cmd > hi:
        return hi
    if cmd < lo:
        return lo
    return cmd


def limit_safe_target(raw_target: float, position: float, limits: Optional[JointLimits]) -> float:
    """Pull infeasible targets toward the hard bound while inside the soft band.

    The interpolation factor grows from 0 at the soft bound to 1 at the hard
    bound (and stays 1 beyond it), so at the hard limit the target equals the
    limit and the proportional term toward it vanishes.
    """
    if limits is None:
        return raw_target
    q_hat = raw_target
    if q_hat > limits.hard_upper and position >= limits.soft_upper:
        frac = min((position - limits.soft_upper) / (limits.hard_upper - limits.soft_upper), 1.0)
        return q_hat - frac * (q_hat - limits.hard_upper)
    if q_hat < limits.hard_lower and position <= limits.soft_lower:
        frac = min((limits.soft_lower - position) / (limits.soft_lower - limits.hard_lower), 1.0)
        return q_hat - frac * (q_hat - limits.hard_lower)
    return q_hat


def filter_alpha(cutoff_hz: Optional[float], dt: float) -> float:
    """Pole-mapped smoothing factor of a first-order low-pass at ``dt``."""
    if cutoff_hz is None:
        return 0.0
    return 1.0 - math.exp(-2.0 * math.pi * cutoff_hz * dt)


def step_joint(state: JointState, applied_torque: float, params: JointParams, dt: float,
               filter_coeff: float = 0.0) -> JointState:
    """One semi-implicit Euler step of ``I qdd = tau - d qd - tau_f sgn(qd)``.

    Near zero speed the joint sticks while the net driving torque stays within
    the Coulomb level; a friction-induced velocity reversal stops the joint.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    v = state.velocity
    tf = params.coulomb_friction
    h = dt / params.armature_inertia
    net = applied_torque - params.viscous_damping * v
    if abs(v) < STICK_SPEED:
        if abs(net) <= tf:
            v_new = 0.0
        elif net > 0.0:
            v_new = v + (net - tf) * h
        else:
            v_new = v + (net + tf) * h
    else:
        v_new = v + (net - tf) * h if v > 0.0 else v + (net + tf) * h
        if tf > 0.0 and v_new * v < 0.0:
            v_new = 0.0
    q_new = state.position + v_new * dt
    vf = state.filtered_velocity
    if filter_coeff > 0.0:
        vf = vf + filter_coeff * (v_new - vf)
    else:
        vf = v_new
    return JointState(q_new, v_new, vf)


# ---------------------------------------------------------------------------
# batch rollout


@dataclass
class BatchParams:
    """Per-candidate parameter arrays, each of shape (P, n) except ``delay`` (P,) in seconds."""

    inertia: np.ndarray
    damping: np.ndarray
    friction: np.ndarray
    bias: np.ndarray
    delay: np.ndarray
    p_gain: np.ndarray
    d_gain: np.ndarray

    @property
    def size(self) -> int:
        return self.inertia.shape[0]

    @classmethod
    def from_models(cls, models: Sequence[RobotModel]) -> "BatchParams":
        return cls(
            inertia=np.array([m.joint_array("armature_inertia") for m in models]),
            damping=np.array([m.joint_array("viscous_damping") for m in models]),
            friction=np.array([m.joint_array("coulomb_friction") for m in models]),
            bias=np.array([m.joint_array("joint_bias") for m in models]),
            delay=np.array([m.command_delay for m in models], dtype=float),
            p_gain=np.array([m.gain_array("p_gain") for m in models]),
            d_gain=np.array([m.gain_array("d_gain") for m in models]),
        )

    def subset(self, idx) -> "BatchParams":
        return BatchParams(**{k: getattr(self, k)[idx] for k in
                              ("inertia", "damping", "friction", "bias", "delay", "p_gain", "d_gain")})


def envelope_rows(model: RobotModel) -> np.ndarray:
    rows = np.zeros((model.n_joints, 4))
    if model.motors is not None and model.saturation:
        for j, motor in enumerate(model.motors):
            rows[j] = build_envelope(motor).as_row()
    return rows


def limit_rows(model: RobotModel) -> np.ndarray:
    rows = np.zeros((model.n_joints, 5))
    if model.limits is not None:
        for j, lim in enumerate(model.limits):
            rows[j] = [1.0, lim.soft_lower, lim.soft_upper, lim.hard_lower, lim.hard_upper]
    return rows


def delay_in_samples(delay_s, control_dt: float) -> np.ndarray:
    """Convert delays to control samples, snapping values within 1e-9 of an integer."""
    d = np.asarray(delay_s, dtype=float) / control_dt
    r = np.round(d)
    return np.where(np.abs(d - r) < 1e-9, r, d)


def _validate_targets(targets: Trajectory, sim: SimConfig) -> None:
    dt = targets.check_uniform()
    if abs(dt - sim.control_dt) > 1e-6 * sim.control_dt:
        raise TrajectoryError(
            f"target sample period {dt:g} s does not match control_dt {sim.control_dt:g} s"
        )
    if not np.all(np.isfinite(targets.target)):
        raise TrajectoryError("targets contain NaN or inf")


def initial_arrays(model: RobotModel, initial) -> tuple[np.ndarray, np.ndarray]:
    if initial is None:
        raise ValueError("initial states are required")
    if isinstance(initial, Trajectory):
        return initial.q[0].copy(), initial.qd[0].copy()
    states = list(initial)
    if len(states) != model.n_joints:
        raise ModelError(f"got {len(states)} initial states for {model.n_joints} joints")
    return (np.array([s.position for s in states], dtype=float),
            np.array([s.velocity for s in states], dtype=float))


def rollout_batch(model: RobotModel, batch: BatchParams, targets: Trajectory, sim: SimConfig,
                  q0: np.ndarray, qd0: np.ndarray, q_ref: Optional[np.ndarray] = None,
                  keep_trajectory: bool = True, backend: Optional[str] = None):
    """Run ``batch.size`` candidates of ``model`` against ``targets``.

    Returns ``(q, qd, tau, loss, diverged)``; the first three have shape
    (P, K, n) or are ``None`` when ``keep_trajectory`` is false, ``loss`` is
    ``None`` unless ``q_ref`` is given.
    """
    _validate_targets(targets, sim)
    kernel = kernels.get_backend(backend)
    P = batch.size
    K, n = targets.target.shape
    if n != model.n_joints:
        raise ModelError(f"targets have {n} joints, model has {model.n_joints}")
    q_out = qd_out = tau_out = None
    if keep_trajectory:
        q_out = np.zeros((P, K, n))
        qd_out = np.zeros((P, K, n))
        tau_out = np.zeros((P, K, n))
    loss = None
    ref = None
    if q_ref is not None:
        ref = np.ascontiguousarray(q_ref, dtype=float)
        if ref.shape != (K, n):
            raise TrajectoryError(f"reference has shape {ref.shape}, expected {(K, n)}")
        loss = np.zeros(P)
    c = np.ascontiguousarray
    diverged = kernel(
        c(targets.target, dtype=float), c(q0, dtype=float), c(qd0, dtype=float),
        c(batch.inertia, dtype=float), c(batch.damping, dtype=float), c(batch.friction, dtype=float),
        c(batch.bias, dtype=float), c(batch.p_gain, dtype=float), c(batch.d_gain, dtype=float),
        c(delay_in_samples(batch.delay, sim.control_dt)),
        envelope_rows(model), limit_rows(model),
        filter_alpha(model.velocity_filter_cutoff, sim.physics_dt), sim.physics_dt, sim.substeps,
        q_out, qd_out, tau_out, ref, loss,
    )
    diverged = np.asarray(diverged, dtype=bool)
    if keep_trajectory and diverged.any():
        for arr in (q_out, qd_out, tau_out):
            arr[diverged] = np.nan
    return q_out, qd_out, tau_out, loss, diverged


def rollout(model: RobotModel, targets: Trajectory, sim: SimConfig = SimConfig(),
            initial=None, backend: Optional[str] = None) -> Trajectory:
    """Replay ``targets.target`` on ``model`` and return the simulated trajectory.

    ``initial`` is a list of :class:`JointState` or a trajectory whose first
    sample supplies the initial state; by default the recorded first sample
    of ``targets`` is used.
    """
    if initial is None:
        initial = targets
    q0, qd0 = initial_arrays(model, initial)
    batch = BatchParams.from_models([model])
    q, qd, tau, _, diverged = rollout_batch(model, batch, targets, sim, q0, qd0, backend=backend)
    if diverged[0]:
        raise FloatingPointError("rollout diverged")
    return Trajectory(t=targets.t.copy(), q=q[0], qd=qd[0], target=targets.target.copy(), tau=tau[0])
