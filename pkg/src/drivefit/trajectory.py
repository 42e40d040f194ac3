"""Uniformly sampled joint trajectories and their CSV representation.

CSV layout: one header row ``t,q0..q{n-1},qd0..qd{n-1},target0..target{n-1}``
optionally followed by ``tau0..tau{n-1}``. Lines starting with ``#`` are
comments (run manifests live there) and are skipped on read.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Optional

import numpy as np


class TrajectoryError(ValueError):
    pass


@dataclass
class Trajectory:
    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    target: np.ndarray
    tau: Optional[np.ndarray] = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        arrays = {}
        for name in ("q", "qd", "target", "tau"):
            value = getattr(self, name)
            if value is None:
                continue
            value = np.asarray(value, dtype=float)
            if value.ndim == 1:
                value = value[:, None]
            arrays[name] = value
            setattr(self, name, value)
        k = self.t.shape[0]
        n = self.q.shape[1]
        for name, value in arrays.items():
            if value.shape != (k, n):
                raise TrajectoryError(f"{name} has shape {value.shape}, expected {(k, n)}")

    @property
    def n_samples(self) -> int:
        return self.t.shape[0]

    @property
    def n_joints(self) -> int:
        return self.q.shape[1]

    @property
    def dt(self) -> float:
        if self.n_samples < 2:
            raise TrajectoryError("need at least two samples to define a time step")
        return float(self.t[1] - self.t[0])

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) if self.n_samples else 0.0

    def check_uniform(self, rtol: float = 1e-6) -> float:
        """Return the sample period, raising if timestamps are not uniform."""
        if self.n_samples < 2:
            raise TrajectoryError("need at least two samples")
        steps = np.diff(self.t)
        dt = (self.t[-1] - self.t[0]) / (self.n_samples - 1)
        if dt <= 0 or np.max(np.abs(steps - dt)) > rtol * dt:
            raise TrajectoryError("timestamps are not uniformly increasing")
        return float(dt)

    def columns(self) -> list[str]:
        n = self.n_joints
        cols = ["t"] + [f"q{i}" for i in range(n)] + [f"qd{i}" for i in range(n)]
        cols += [f"target{i}" for i in range(n)]
        if self.tau is not None:
            cols += [f"tau{i}" for i in range(n)]
        return cols

    def to_array(self) -> np.ndarray:
        parts = [self.t[:, None], self.q, self.qd, self.target]
        if self.tau is not None:
            parts.append(self.tau)
        return np.hstack(parts)


def write_csv(traj: Trajectory, fh, comments: Optional[list[str]] = None) -> None:
    for line in comments or []:
        fh.write(f"# {line}\n")
    fh.write(",".join(traj.columns()) + "\n")
    buf = io.StringIO()
    np.savetxt(buf, traj.to_array(), delimiter=",", fmt="%.17g")
    fh.write(buf.getvalue())


def read_csv(path) -> Trajectory:
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise TrajectoryError(f"{path}: empty trajectory file")
    header = [h.strip() for h in lines[0].split(",")]
    if not header or header[0] != "t":
        raise TrajectoryError(f"{path}:1: header must start with 't'")
    n = sum(1 for h in header if h.startswith("q") and h[1:].isdigit())
    expected = ["t"] + [f"q{i}" for i in range(n)] + [f"qd{i}" for i in range(n)] + [f"target{i}" for i in range(n)]
    with_tau = expected + [f"tau{i}" for i in range(n)]
    if header not in (expected, with_tau):
        raise TrajectoryError(f"{path}: unexpected header {','.join(header)}")
    try:
        data = np.loadtxt(io.StringIO("".join(lines[1:])), delimiter=",", ndmin=2)
    except ValueError as exc:
        raise TrajectoryError(f"{path}: {exc}") from exc
    if data.shape[1] != len(header):
        raise TrajectoryError(f"{path}: rows have {data.shape[1]} columns, header has {len(header)}")
    if not np.all(np.isfinite(data)):
        raise TrajectoryError(f"{path}: non-finite values")
    tau = data[:, 1 + 3 * n:1 + 4 * n] if header == with_tau else None
    return Trajectory(
        t=data[:, 0],
        q=data[:, 1:1 + n],
        qd=data[:, 1 + n:1 + 2 * n],
        target=data[:, 1 + 2 * n:1 + 3 * n],
        tau=tau,
    )
