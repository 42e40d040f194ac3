"""Inertia estimates: compound-pendulum link identification, base inertia
reflected to the leg joints under ground contact, and gear-train reduction."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from .frequency import AnalysisError

STANDARD_GRAVITY = 9.806
FD_STEP = 1e-6  # rad, central-difference step for the constraint derivatives


@dataclass(frozen=True)
class PendulumMeasurement:
    mass: float
    com_distance: float
    eigenfrequency: float
    gravity: float = STANDARD_GRAVITY
    sigma_r: float = 0.0
    sigma_f: float = 0.0

    def __post_init__(self):
        if not (self.mass > 0 and self.com_distance > 0 and self.gravity > 0):
            raise AnalysisError("mass, com_distance and gravity must be > 0")
        if self.eigenfrequency == 0:
            raise AnalysisError("eigenfrequency must be non-zero")
        if not self.eigenfrequency > 0:
            raise AnalysisError("eigenfrequency must be > 0")
        if self.sigma_r < 0 or self.sigma_f < 0:
            raise AnalysisError("uncertainties must be >= 0")


def _pivot_inertia(m, r, f, g):
    return m * r * g / (2 * np.pi * f) ** 2


def pendulum_inertia(meas: PendulumMeasurement) -> Tuple[float, float, float]:
    """Inertia about the pivot, about the CoM, and the CoM inertia's standard deviation.

    Small-angle compound pendulum ``I_P = m r g / (2 pi f)^2``, shifted to the
    CoM with the parallel-axis theorem. The uncertainty is first-order
    propagation of independent errors in ``r`` and ``f``.
    """
    m, r, f, g = meas.mass, meas.com_distance, meas.eigenfrequency, meas.gravity
    i_p = _pivot_inertia(m, r, f, g)
    i_com = i_p - m * r * r
    d_r = m * g / (2 * math.pi * f) ** 2 - 2 * m * r
    d_f = -2 * i_p / f
    sigma = math.hypot(d_r * meas.sigma_r, d_f * meas.sigma_f)
    return float(i_p), float(i_com), float(sigma)


def pendulum_frequency(mass: float, com_distance: float, com_inertia: float,
                       gravity: float = STANDARD_GRAVITY) -> float:
    """Small-angle eigenfrequency of a compound pendulum (inverse of the above)."""
    i_p = com_inertia + mass * com_distance ** 2
    return math.sqrt(mass * com_distance * gravity / i_p) / (2 * math.pi)


def pendulum_monte_carlo(meas: PendulumMeasurement, samples: int = 100_000, seed: int = 0) -> float:
    """Standard deviation of the CoM inertia under Gaussian ``r`` and ``f``."""
    rng = np.random.default_rng(seed)
    r = rng.normal(meas.com_distance, meas.sigma_r, samples)
    f = rng.normal(meas.eigenfrequency, meas.sigma_f, samples)
    i_com = _pivot_inertia(meas.mass, r, f, meas.gravity) - meas.mass * r * r
    return float(np.std(i_com, ddof=1))


# base inertia under contact ----------------------------------------------------

@dataclass(frozen=True)
class PlanarLegModel:
    """Planar two-link leg with equal links carrying the base mass.

    ``base_mass`` is the body mass shared by the legs that hold it;
    ``hip_inertia`` and ``knee_inertia`` are joint-side drive inertias.
    """

    base_mass: float
    link_length: float
    hip_inertia: float
    knee_inertia: float

    def __post_init__(self):
        if not all(v > 0 for v in (self.base_mass, self.link_length, self.hip_inertia, self.knee_inertia)):
            raise AnalysisError("leg model parameters must be > 0")


def vertical_kinematics(leg: PlanarLegModel, knee_angle):
    """Hip angle and base height when the foot stays under the hip."""
    q_k = np.asarray(knee_angle, dtype=float)
    return 0.5 * q_k, 2 * leg.link_length * np.cos(0.5 * q_k)


def effective_inertia_vertical(leg: PlanarLegModel, knee_angle: float, legs: int = 2) -> float:
    """Knee-side inertia of vertical base motion, ``(m l^2 sin^2(q_k/2) + I_h/4 + I_k) / legs``.

    With the default two supporting legs this is the half-sum form that
    follows from virtual work with both knees driving the base.
    """
    if not 0 < knee_angle < math.pi:
        raise AnalysisError("knee angle must lie strictly between 0 and pi")
    s = math.sin(0.5 * knee_angle)
    m, l = leg.base_mass, leg.link_length
    return (m * l * l * s * s + 0.25 * leg.hip_inertia + leg.knee_inertia) / legs


def virtual_work_vertical(leg: PlanarLegModel, knee_angle: float, legs: int = 2, step: float = FD_STEP) -> float:
    """Same quantity from central differences of the constraint functions."""
    if not 0 < knee_angle < math.pi:
        raise AnalysisError("knee angle must lie strictly between 0 and pi")
    h = step
    qh_p, z_p = vertical_kinematics(leg, knee_angle + h)
    qh_m, z_m = vertical_kinematics(leg, knee_angle - h)
    dz = (z_p - z_m) / (2 * h)
    dqh = (qh_p - qh_m) / (2 * h)
    return float(leg.base_mass * dz * dz + leg.hip_inertia * dqh * dqh + leg.knee_inertia) / legs


HORIZONTAL_HIP_LIMIT = math.acos(math.sqrt(2.0) - 1.0)


def horizontal_knee_angle(hip_angle, branch: int = 1):
    """Knee angle that keeps the base at height ``sqrt(2) l`` for a given hip angle."""
    if branch not in (1, -1):
        raise AnalysisError("branch must be +1 or -1")
    q_h = np.asarray(hip_angle, dtype=float)
    arg = math.sqrt(2.0) - np.cos(q_h)
    if np.any(arg > 1.0 + 1e-15) or np.any(arg < -1.0):
        raise AnalysisError("hip angle outside the reachable range for the height constraint")
    return q_h + branch * np.arccos(np.clip(arg, -1.0, 1.0))


def horizontal_kinematics(leg: PlanarLegModel, hip_angle, branch: int = 1):
    """``(q_k, x_B, z_B)`` along the constant-height branch.

    Hip angle is measured from the downward vertical and the shank angle
    relative to the vertical is ``q_k - q_h``.
    """
    q_h = np.asarray(hip_angle, dtype=float)
    q_k = horizontal_knee_angle(q_h, branch)
    l = leg.link_length
    x_b = l * (np.sin(q_h) - np.sin(q_k - q_h))
    z_b = l * (np.cos(q_h) + np.cos(q_k - q_h))
    return q_k, x_b, z_b


def effective_inertia_horizontal(leg: PlanarLegModel, hip_angle: float, branch: int = 1,
                                 legs: int = 2, step: float = FD_STEP) -> float:
    """Hip-side inertia of horizontal base motion at constant height.

    ``(m x_B'^2 + I_h + I_k q_k'^2) / legs`` with derivatives taken along the
    constraint by central differences.
    """
    if abs(hip_angle) + step > HORIZONTAL_HIP_LIMIT:
        raise AnalysisError("hip angle outside the reachable range for the height constraint")
    h = step
    qk_p, x_p, _ = horizontal_kinematics(leg, hip_angle + h, branch)
    qk_m, x_m, _ = horizontal_kinematics(leg, hip_angle - h, branch)
    dx = (x_p - x_m) / (2 * h)
    dqk = (qk_p - qk_m) / (2 * h)
    return float(leg.base_mass * dx * dx + leg.hip_inertia + leg.knee_inertia * dqk * dqk) / legs


def reduced_inertia_sum(components: Iterable[Tuple[float, float]]) -> float:
    """Reflect component inertias to the output: ``sum I_c * ratio_c^2``."""
    total = 0.0
    for inertia, ratio in components:
        if not ratio > 0:
            raise AnalysisError("speed ratios must be > 0")
        total += inertia * ratio * ratio
    return total
