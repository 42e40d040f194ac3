"""Frequency-domain tools: closed-loop joint response, second-order pole
characteristics, chirp-based empirical FRF, and the PMSM current loop."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..excitation import ChirpSpec
from ..model import DriveGains, JointParams, MotorParams
from ..trajectory import Trajectory, TrajectoryError


class AnalysisError(ValueError):
    pass


@dataclass
class FrequencyResponse:
    frequencies: np.ndarray
    magnitude: np.ndarray  # dB
    phase: np.ndarray  # degrees, unwrapped along frequency

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.magnitude = np.asarray(self.magnitude, dtype=float)
        self.phase = np.asarray(self.phase, dtype=float)
        n = self.frequencies.size
        if self.magnitude.size != n or self.phase.size != n:
            raise AnalysisError("frequency, magnitude and phase lengths differ")
        if n and (np.any(self.frequencies <= 0) or np.any(np.diff(self.frequencies) <= 0)):
            raise AnalysisError("frequencies must be positive and strictly increasing")

    @classmethod
    def from_complex(cls, freqs, gains) -> "FrequencyResponse":
        g = np.asarray(gains, dtype=complex)
        return cls(freqs, 20 * np.log10(np.abs(g)), np.degrees(np.unwrap(np.angle(g))))

    def rows(self):
        return np.column_stack([self.frequencies, self.magnitude, self.phase])


def h_q_response(params: JointParams, gains: DriveGains, delay: float, freq):
    """Closed-loop target-to-position gain ``e^{-sT} P / (I s^2 + (d + D) s + P)``."""
    f = np.asarray(freq, dtype=float)
    s = 2j * np.pi * f
    h = gains.p_gain / (params.armature_inertia * s * s + (params.viscous_damping + gains.d_gain) * s + gains.p_gain)
    h = h * np.exp(-s * delay)
    return h if h.ndim else complex(h)


@dataclass(frozen=True)
class SecondOrder:
    natural_hz: float
    damping_ratio: float
    damped_hz: float  # frequency of the free oscillation, imaginary part of the poles
    resonance_hz: Optional[float]  # magnitude peak, None when the response is monotone
    peak_db: float

    @property
    def poles(self) -> np.ndarray:
        wn = 2 * math.pi * self.natural_hz
        z = self.damping_ratio
        return np.roots([1.0, 2 * z * wn, wn * wn])


def second_order(params: JointParams, gains: DriveGains) -> SecondOrder:
    """Pole characteristics of ``I s^2 + (d + D) s + P``."""
    I = params.armature_inertia
    c = params.viscous_damping + gains.d_gain
    P = gains.p_gain
    wn = math.sqrt(P / I)
    zeta = c / (2 * math.sqrt(P * I))
    fn = wn / (2 * math.pi)
    fd = fn * math.sqrt(1 - zeta * zeta) if zeta < 1 else 0.0
    if zeta == 0:
        fr, peak = fn, math.inf
    elif zeta < math.sqrt(0.5):
        fr = fn * math.sqrt(1 - 2 * zeta * zeta)
        peak = -20 * math.log10(2 * zeta * math.sqrt(1 - zeta * zeta))
    else:
        fr, peak = None, 0.0
    return SecondOrder(fn, zeta, fd, fr, peak)


def bode(params: JointParams, gains: DriveGains, delay: float, freqs: Sequence[float]) -> FrequencyResponse:
    f = np.asarray(freqs, dtype=float)
    return FrequencyResponse.from_complex(f, h_q_response(params, gains, delay, f))


def log_grid(f_start: float, f_end: float, n: int) -> np.ndarray:
    if not 0 < f_start < f_end or n < 2:
        raise AnalysisError("need 0 < f_start < f_end and n >= 2")
    return np.geomspace(f_start, f_end, n)


def _sine_fit(t_phase: np.ndarray, y: np.ndarray) -> complex:
    """Complex amplitude ``C`` of ``y ~ Re(C e^{i phase}) + offset`` by least squares."""
    A = np.column_stack([np.sin(t_phase), np.cos(t_phase), np.ones_like(t_phase)])
    (a, b, _), *_ = np.linalg.lstsq(A, y, rcond=None)
    return complex(b, -a)


def empirical_frf(inp, out, spec: ChirpSpec, freq_grid: Sequence[float], joint: int = 0,
                  t=None, band: float = 0.1, min_cycles: float = 1.0) -> FrequencyResponse:
    """Gain and phase from a chirp experiment by windowed sine correlation.

    For each grid frequency, input and output are fitted on the samples where
    the chirp's instantaneous frequency lies within ``+-band`` of it, using the
    chirp phase as the regressor; the gain is the ratio of the two complex
    amplitudes. ``inp`` and ``out`` are trajectories (target column of the
    input, position column of the output) or plain arrays with ``t``.
    """
    if isinstance(inp, Trajectory):
        t = inp.t
        u = inp.target[:, joint]
    else:
        u = np.asarray(inp, dtype=float)
    y = out.q[:, joint] if isinstance(out, Trajectory) else np.asarray(out, dtype=float)
    if t is None:
        t = np.arange(u.size) / spec.sample_rate
    t = np.asarray(t, dtype=float)
    if u.shape != y.shape or u.shape != t.shape:
        raise TrajectoryError("input and output are not aligned")
    f_grid = np.asarray(freq_grid, dtype=float)
    lo_f, hi_f = spec.f_start, spec.f_end
    if np.any(f_grid < lo_f * (1 - 1e-12)) or np.any(f_grid > hi_f * (1 + 1e-12)):
        raise AnalysisError(f"grid frequencies must lie within [{lo_f:g}, {hi_f:g}] Hz")
    phase = spec.phase(t)
    inst = spec.inst_freq(t)
    gains = np.empty(f_grid.size, dtype=complex)
    for i, f in enumerate(f_grid):
        sel = (inst >= f * (1 - band)) & (inst <= f * (1 + band))
        if sel.sum() < 4:
            raise AnalysisError(f"no samples around {f:g} Hz")
        cycles = (phase[sel][-1] - phase[sel][0]) / (2 * math.pi)
        if cycles < min_cycles:
            raise AnalysisError(f"window at {f:g} Hz spans {cycles:.2f} cycles, need at least {min_cycles:g}")
        cu = _sine_fit(phase[sel], u[sel])
        cy = _sine_fit(phase[sel], y[sel])
        if cu == 0:
            raise AnalysisError(f"input has no content at {f:g} Hz")
        gains[i] = cy / cu
    return FrequencyResponse.from_complex(f_grid, gains)


# PMSM current loop -----------------------------------------------------------

def pmsm_inner_loop(R: float, L: float, freq, normalized: bool = True):
    """q-axis admittance ``1 / (L s + R)``; with ``normalized`` the DC gain is 1."""
    if not (R > 0 and L > 0):
        raise AnalysisError("R and L must be > 0")
    s = 2j * np.pi * np.asarray(freq, dtype=float)
    h = 1.0 / (L * s + R)
    if normalized:
        h = h * R
    return h if np.ndim(h) else complex(h)


def pmsm_bandwidth(R: float, L: float) -> float:
    """Corner frequency ``R / (2 pi L)`` of the current loop in Hz."""
    if not (R > 0 and L > 0):
        raise AnalysisError("R and L must be > 0")
    return R / (2 * math.pi * L)


def voltage_headroom(current, motor_speed_elec, motor: MotorParams):
    """Voltage left for changing the current: ``u - R i_q - k_w w_e``."""
    return motor.bus_voltage - motor.coil_resistance * np.asarray(current) - motor.k_omega * np.asarray(motor_speed_elec)
