"""Identification inputs: linear chirps and random joint steps."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .trajectory import Trajectory

Scalar = Union[float, Sequence[float]]


class ExcitationError(ValueError):
    pass


def _per_joint(value: Scalar, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ExcitationError(f"{name} has {arr.size} entries for {n} joints")
    return arr


def _n_samples(duration: float, sample_rate: float) -> int:
    # half-open interval [0, duration): 20 s at 400 Hz gives 8000 samples
    return max(int(math.floor(duration * sample_rate + 1e-9)), 2)


@dataclass(frozen=True)
class ChirpSpec:
    f_start: float
    f_end: float
    duration: float
    amplitude: Scalar = 0.1
    center: Scalar = 0.0
    sample_rate: float = 400.0
    sweep: str = "linear"

    def __post_init__(self):
        if not 0 < self.f_start <= self.f_end:
            raise ExcitationError("chirp needs 0 < f_start <= f_end")
        if not self.duration > 0:
            raise ExcitationError("chirp duration must be > 0")
        if self.sweep != "linear":
            raise ExcitationError(f"unsupported sweep {self.sweep!r}")
        if self.sample_rate < 2 * self.f_end:
            raise ExcitationError(
                f"sample_rate {self.sample_rate:g} Hz is below the Nyquist rate of f_end={self.f_end:g} Hz"
            )

    @property
    def rate(self) -> float:
        """Sweep rate in Hz/s."""
        return (self.f_end - self.f_start) / self.duration

    def phase(self, t):
        t = np.asarray(t, dtype=float)
        return 2 * np.pi * (self.f_start * t + 0.5 * self.rate * t * t)

    def inst_freq(self, t):
        return self.f_start + self.rate * np.asarray(t, dtype=float)

    def time_at(self, freq):
        """Time at which the instantaneous frequency equals ``freq``."""
        if self.rate == 0:
            raise ExcitationError("constant-frequency chirp has no frequency-to-time map")
        return (np.asarray(freq, dtype=float) - self.f_start) / self.rate


def chirp(spec: ChirpSpec, n_joints: int, phase_offsets: Optional[Sequence[float]] = None) -> Trajectory:
    """Targets ``center + amplitude * sin(phase(t) + offset)`` for every joint.

    ``q`` is set to the target and ``qd`` to its analytic derivative, so the
    trajectory doubles as an initial condition for rollouts.
    """
    amp = _per_joint(spec.amplitude, n_joints, "amplitude")
    center = _per_joint(spec.center, n_joints, "center")
    offsets = _per_joint(0.0 if phase_offsets is None else phase_offsets, n_joints, "phase_offsets")
    t = np.arange(_n_samples(spec.duration, spec.sample_rate)) / spec.sample_rate
    phi = spec.phase(t)[:, None] + offsets
    omega = 2 * np.pi * spec.inst_freq(t)[:, None]
    target = center + amp * np.sin(phi)
    rate = amp * omega * np.cos(phi)
    return Trajectory(t=t, q=target.copy(), qd=rate, target=target)


@dataclass(frozen=True)
class StepSpec:
    dwell: float
    amplitude_range: Scalar
    center: Scalar = 0.0
    duration: float = 10.0
    seed: int = 0
    sample_rate: float = 400.0

    def __post_init__(self):
        if not self.dwell > 0:
            raise ExcitationError("dwell must be > 0")
        if self.duration < self.dwell:
            raise ExcitationError("duration must be >= dwell")
        if not self.sample_rate > 0:
            raise ExcitationError("sample_rate must be > 0")
        if np.any(np.asarray(self.amplitude_range, dtype=float) < 0):
            raise ExcitationError("amplitude_range must be >= 0")


def random_steps(spec: StepSpec, n_joints: int) -> Trajectory:
    """Piecewise-constant targets drawn uniformly from ``center +- amplitude_range``.

    A new value is drawn every ``dwell`` seconds, so a 10 s run with 0.5 s
    dwell has 20 segments.
    """
    amp = _per_joint(spec.amplitude_range, n_joints, "amplitude_range")
    center = _per_joint(spec.center, n_joints, "center")
    n_seg = int(math.ceil(spec.duration / spec.dwell - 1e-9))
    rng = np.random.default_rng(spec.seed)
    levels = center + amp * rng.uniform(-1.0, 1.0, size=(n_seg, n_joints))
    t = np.arange(_n_samples(spec.duration, spec.sample_rate)) / spec.sample_rate
    seg = np.minimum(np.floor(t / spec.dwell + 1e-9).astype(int), n_seg - 1)
    target = levels[seg]
    return Trajectory(t=t, q=target.copy(), qd=np.zeros_like(target), target=target)
