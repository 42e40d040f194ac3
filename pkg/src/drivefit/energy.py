"""Drive power model, locomotion reward terms with their schedules, and the
cost-of-transport decomposition from battery state-of-charge logs."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import MotorParams

GRAVITY = 9.81
WH_TO_J = 3600.0


class EnergyError(ValueError):
    pass


@dataclass(frozen=True)
class PowerBreakdown:
    p_electrical: float
    p_mechanical: float
    p_potential: float

    @property
    def p_total(self) -> float:
        return self.p_electrical + self.p_mechanical + self.p_potential


def joule_heating(torques, motors: Sequence[MotorParams]) -> float:
    """Copper losses ``sum tau^2 R / (r^2 k_i^2)`` from joint-side torques."""
    tau = np.asarray(torques, dtype=float)
    if tau.shape[-1] != len(motors):
        raise EnergyError(f"{tau.shape[-1]} torques for {len(motors)} motors")
    r = np.array([m.gear_ratio for m in motors], dtype=float)
    ki = np.array([m.motor_constant for m in motors], dtype=float)
    R = np.array([m.coil_resistance for m in motors], dtype=float)
    if np.any(r == 0) or np.any(ki == 0):
        raise EnergyError("gear ratio and motor constant must be non-zero")
    out = np.sum(tau * tau * R / (r * r * ki * ki), axis=-1)
    return out if np.ndim(out) else float(out)


def mech_power(torques, velocities, k_regen: float) -> float:
    """``tau . qd``, with negative (braking) power credited at ``k_regen``."""
    tau = np.asarray(torques, dtype=float)
    qd = np.asarray(velocities, dtype=float)
    if tau.shape != qd.shape:
        raise EnergyError("torque and velocity shapes differ")
    s = np.sum(tau * qd, axis=-1)
    out = np.where(s < 0, k_regen * s, s)
    return out if np.ndim(out) else float(out)


def pot_power(body_masses, vertical_com_velocities, g: float = GRAVITY) -> float:
    """``sum m_b g v_bz`` with ``v_bz`` measured against gravity."""
    m = np.asarray(body_masses, dtype=float)
    v = np.asarray(vertical_com_velocities, dtype=float)
    if m.shape[-1] != v.shape[-1]:
        raise EnergyError("mass and velocity counts differ")
    out = np.sum(m * g * v, axis=-1)
    return out if np.ndim(out) else float(out)


def power_breakdown(torques, velocities, motors: Sequence[MotorParams], k_regen: float,
                    body_masses=(), vertical_com_velocities=(), g: float = GRAVITY) -> PowerBreakdown:
    p_pot = pot_power(body_masses, vertical_com_velocities, g) if len(body_masses) else 0.0
    return PowerBreakdown(joule_heating(torques, motors), mech_power(torques, velocities, k_regen), p_pot)


def power_series(tau: np.ndarray, qd: np.ndarray, motors: Sequence[MotorParams],
                 k_regen: float) -> np.ndarray:
    """Per-step (P_el, P_mech, P_total) for (K, n) torque and velocity logs."""
    p_el = np.asarray(joule_heating(tau, motors))
    p_mech = np.asarray(mech_power(tau, qd, k_regen))
    return np.column_stack([p_el, p_mech, p_el + p_mech])


# rewards -------------------------------------------------------------------

def gamma_v(commanded_velocity) -> float:
    """Speed normalization ``1 / (|v_cmd|^2 + 1)``."""
    v = np.asarray(commanded_velocity, dtype=float)
    return 1.0 / (float(np.dot(v, v)) + 1.0)


def reward_velocity(cmd, measured, sigma_v: float = 0.25) -> float:
    """Planar linear plus yaw tracking reward; both inputs are (vx, vy, wz)."""
    if not sigma_v > 0:
        raise EnergyError("sigma_v must be > 0")
    c = np.asarray(cmd, dtype=float)
    m = np.asarray(measured, dtype=float)
    lin = float(np.sum((c[:2] - m[:2]) ** 2))
    ang = float((c[2] - m[2]) ** 2)
    return math.exp(-lin / sigma_v) + math.exp(-ang / sigma_v)


def reward_energy(commanded_velocity, p_total: float) -> float:
    """Speed-normalized total power; the penalty sign lives in the weight."""
    return gamma_v(commanded_velocity) * p_total


class FootSpeedBuffer:
    """Caller-owned ring of the last ``n_ftd`` foot speeds per foot."""

    def __init__(self, n_feet: int, n_ftd: int = 3):
        if n_ftd < 1:
            raise EnergyError("n_ftd must be >= 1")
        self.buf = np.zeros((n_feet, n_ftd))
        self._i = 0

    def push(self, speeds) -> None:
        self.buf[:, self._i] = np.asarray(speeds, dtype=float)
        self._i = (self._i + 1) % self.buf.shape[1]

    @property
    def history(self) -> np.ndarray:
        return self.buf.copy()


def reward_ftd(foot_speed_history, touchdown_flags) -> float:
    """Sum over touching-down feet of the max speed in their history window."""
    hist = np.atleast_2d(np.asarray(foot_speed_history, dtype=float))
    flags = np.asarray(touchdown_flags, dtype=bool).reshape(-1)
    if hist.shape[0] != flags.size:
        raise EnergyError("history and touchdown flags disagree on the number of feet")
    if not flags.any():
        return 0.0
    return float(np.sum(np.max(hist[flags], axis=1)))


def penalty_schedule(iteration: float, decay_rate: float) -> float:
    """``1 - exp(-lambda t)``: ramps penalties in over training."""
    if decay_rate < 0:
        raise EnergyError("decay_rate must be >= 0")
    return -math.expm1(-decay_rate * iteration)


def half_life_rate(iterations: float) -> float:
    return math.log(2.0) / iterations


def entropy_schedule(t: float, e0: float, e_inf: float, eta: float, t_turn: float) -> float:
    """Smooth tanh blend from ``e0`` to ``e_inf`` centered at ``t_turn``."""
    if not eta > 0:
        raise EnergyError("eta must be > 0")
    eps = 0.5 - 0.5 * math.tanh(eta * (t - t_turn))
    return e_inf + eps * (e0 - e_inf)


@dataclass(frozen=True)
class RewardWeights:
    c_v: float = 0.2
    c_e: float = -16e-5
    c_c: float = -1.0
    c_ftd: float = -0.1
    sigma_v: float = 0.25
    decay_rate: float = math.log(2.0) / 500.0
    ftd_buffer: int = 3

    def __post_init__(self):
        if not self.sigma_v > 0:
            raise EnergyError("sigma_v must be > 0")
        if self.ftd_buffer < 1:
            raise EnergyError("ftd_buffer must be >= 1")
        if self.decay_rate < 0:
            raise EnergyError("decay_rate must be >= 0")


@dataclass
class StepData:
    """Inputs of one reward evaluation.

    Velocities are (vx, vy, wz). Collision and touchdown flags come from the
    caller's simulator or log.
    """

    cmd_velocity: Sequence[float]
    base_velocity: Sequence[float]
    p_total: float = 0.0
    collision: bool = False
    foot_speed_history: Optional[Sequence[Sequence[float]]] = None
    touchdown: Optional[Sequence[bool]] = None


def reward_terms(step: StepData, weights: RewardWeights) -> dict:
    r_v = reward_velocity(step.cmd_velocity, step.base_velocity, weights.sigma_v)
    r_e = reward_energy(np.asarray(step.cmd_velocity, dtype=float)[:2], step.p_total)
    r_c = 1.0 if step.collision else 0.0
    if step.foot_speed_history is None or step.touchdown is None:
        r_ftd = 0.0
    else:
        r_ftd = reward_ftd(step.foot_speed_history, step.touchdown)
    return {"r_v": r_v, "r_e": r_e, "r_c": r_c, "r_ftd": r_ftd}


def total_reward(step: StepData, weights: RewardWeights, iteration: float) -> float:
    """``c_v r_v + c_c r_c + kappa (c_e r_e + c_ftd r_ftd)``."""
    r = reward_terms(step, weights)
    kappa = penalty_schedule(iteration, weights.decay_rate)
    return (weights.c_v * r["r_v"] + weights.c_c * r["r_c"]
            + kappa * (weights.c_e * r["r_e"] + weights.c_ftd * r["r_ftd"]))


# cost of transport -----------------------------------------------------------

@dataclass(frozen=True)
class EnergyTrial:
    battery_capacity: float
    soc_start: float
    soc_end: float
    duration: float
    distance: Optional[float] = None
    mass: Optional[float] = None
    gravity: float = GRAVITY

    def __post_init__(self):
        if not 0 <= self.soc_end < self.soc_start <= 1:
            raise EnergyError("need 0 <= soc_end < soc_start <= 1")
        if not self.duration > 0:
            raise EnergyError("duration must be > 0")
        if self.distance is not None and not self.distance > 0:
            raise EnergyError("distance must be > 0 when given")

    @property
    def energy(self) -> float:
        """Energy drawn from the battery in joules, SoC taken as linear in energy."""
        return self.battery_capacity * WH_TO_J * (self.soc_start - self.soc_end)


def average_power(trial: EnergyTrial) -> float:
    if not trial.duration > 0:
        raise EnergyError("duration must be > 0")
    return trial.energy / trial.duration


def cost_of_transport(trial: EnergyTrial) -> float:
    if trial.distance is None or trial.mass is None:
        raise EnergyError("cost of transport needs distance and mass")
    return trial.energy / (trial.mass * trial.gravity * trial.distance)


@dataclass(frozen=True)
class CotBreakdown:
    cot: float
    coe: float
    cod: float
    col: float

    def as_dict(self) -> dict:
        return {"cot": self.cot, "coe": self.coe, "cod": self.cod, "col": self.col}


def cot_from_powers(track: EnergyTrial, p_rest: float, p_off: float) -> CotBreakdown:
    """Split the track CoT using idle powers with drives on (rest) and off."""
    if p_rest < p_off:
        raise EnergyError("rest power below drives-off power: inconsistent calibration")
    cot = cost_of_transport(track)
    denom = track.mass * track.gravity * track.distance
    coe = p_off * track.duration / denom
    cod = (p_rest - p_off) * track.duration / denom
    # remainder by subtraction from the two shares keeps the identity exact
    col = cot - coe - cod
    return CotBreakdown(cot, coe, cod, col)


def cot_decompose(track: EnergyTrial, rest: EnergyTrial, off: EnergyTrial) -> CotBreakdown:
    if rest.distance is not None or off.distance is not None:
        raise EnergyError("rest and off trials must not cover distance")
    return cot_from_powers(track, average_power(rest), average_power(off))
