"""Flat identification vector ``[I_a, d, tau_f, bias, T_d]`` and its bounds."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..dynamics import BatchParams
from ..model import DriveGains, ModelError, RobotModel

JOINT_FIELDS = ("armature_inertia", "viscous_damping", "coulomb_friction", "joint_bias")
GAIN_FIELDS = ("p_gain", "d_gain")

DEFAULT_BOUNDS = {
    "armature_inertia": (1e-6, 10.0),
    "viscous_damping": (0.0, 50.0),
    "coulomb_friction": (0.0, 10.0),
    "joint_bias": (-0.2, 0.2),
    "command_delay": (0.0, 0.05),
    # only used when gains are (deliberately) added to the search space
    "p_gain": (1.0, 500.0),
    "d_gain": (0.0, 50.0),
}


@dataclass
class ParamVector:
    """Values plus per-entry bounds for ``n_joints`` joints.

    Layout is blockwise per field, one entry per joint, followed by the global
    delay. With ``include_gains`` two extra per-joint blocks (P, D) are
    inserted before the delay; that layout is not identifiable and exists to
    demonstrate exactly that.
    """

    n_joints: int
    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    include_gains: bool = False
    names: list = field(default_factory=list)

    def __post_init__(self):
        size = self.expected_size(self.n_joints, self.include_gains)
        self.values = np.asarray(self.values, dtype=float).copy()
        self.lower = np.asarray(self.lower, dtype=float).copy()
        self.upper = np.asarray(self.upper, dtype=float).copy()
        for name in ("values", "lower", "upper"):
            if getattr(self, name).shape != (size,):
                raise ModelError(f"{name} must have length {size}")
        if np.any(self.lower > self.upper):
            raise ModelError("lower bound exceeds upper bound")
        if not self.names:
            self.names = self.entry_names(self.n_joints, self.include_gains)

    @staticmethod
    def fields(include_gains: bool = False) -> tuple:
        return JOINT_FIELDS + (GAIN_FIELDS if include_gains else ())

    @classmethod
    def expected_size(cls, n_joints: int, include_gains: bool = False) -> int:
        return len(cls.fields(include_gains)) * n_joints + 1

    @classmethod
    def entry_names(cls, n_joints: int, include_gains: bool = False) -> list:
        names = [f"{f}[{j}]" for f in cls.fields(include_gains) for j in range(n_joints)]
        return names + ["command_delay"]

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def free(self) -> np.ndarray:
        """Mask of entries with a non-degenerate bound interval."""
        return self.upper > self.lower

    def with_values(self, values) -> "ParamVector":
        return ParamVector(self.n_joints, values, self.lower, self.upper, self.include_gains, list(self.names))

    def block(self, name: str, values=None) -> np.ndarray:
        v = self.values if values is None else np.asarray(values)
        if name == "command_delay":
            return v[..., -1]
        i = self.fields(self.include_gains).index(name)
        n = self.n_joints
        return v[..., i * n:(i + 1) * n]

    def within_bounds(self, tol: float = 0.0) -> bool:
        return bool(np.all(self.values >= self.lower - tol) and np.all(self.values <= self.upper + tol))

    # normalized coordinates --------------------------------------------------
    def normalize(self, values=None) -> np.ndarray:
        v = self.values if values is None else np.asarray(values, dtype=float)
        width = np.where(self.free, self.upper - self.lower, 1.0)
        return (v - self.lower) / width

    def denormalize(self, x) -> np.ndarray:
        width = np.where(self.free, self.upper - self.lower, 0.0)
        return self.lower + np.asarray(x, dtype=float) * width

    # model mapping -----------------------------------------------------------
    @classmethod
    def from_model(cls, model: RobotModel, bounds: Optional[dict] = None,
                   include_gains: bool = False) -> "ParamVector":
        n = model.n_joints
        parts = [model.joint_array(f) for f in JOINT_FIELDS]
        if include_gains:
            parts += [model.gain_array(f) for f in GAIN_FIELDS]
        values = np.concatenate(parts + [[model.command_delay]])
        lower, upper = bounds_arrays(n, bounds, include_gains)
        return cls(n, values, lower, upper, include_gains)

    def apply(self, model: RobotModel, values=None) -> RobotModel:
        """Return ``model`` with the identified fields replaced by ``values``."""
        v = self.values if values is None else np.asarray(values, dtype=float)
        if model.n_joints != self.n_joints:
            raise ModelError(f"model has {model.n_joints} joints, vector has {self.n_joints}")
        out = model.with_joint_params(*(self.block(f, v) for f in JOINT_FIELDS),
                                      command_delay=self.block("command_delay", v))
        if self.include_gains:
            gains = tuple(DriveGains(float(p), float(d))
                          for p, d in zip(self.block("p_gain", v), self.block("d_gain", v)))
            out = replace(out, gains=gains)
        return out

    def batch(self, model: RobotModel, population) -> BatchParams:
        """Per-candidate arrays for a (P, size) population of raw values."""
        pop = np.atleast_2d(np.asarray(population, dtype=float))
        P = pop.shape[0]
        if self.include_gains:
            kp = self.block("p_gain", pop)
            kd = self.block("d_gain", pop)
        else:
            kp = np.broadcast_to(model.gain_array("p_gain"), (P, self.n_joints))
            kd = np.broadcast_to(model.gain_array("d_gain"), (P, self.n_joints))
        return BatchParams(
            inertia=np.ascontiguousarray(self.block("armature_inertia", pop)),
            damping=np.ascontiguousarray(self.block("viscous_damping", pop)),
            friction=np.ascontiguousarray(self.block("coulomb_friction", pop)),
            bias=np.ascontiguousarray(self.block("joint_bias", pop)),
            delay=np.ascontiguousarray(self.block("command_delay", pop)),
            p_gain=np.ascontiguousarray(kp),
            d_gain=np.ascontiguousarray(kd),
        )

    def to_dict(self, model: Optional[RobotModel] = None) -> dict:
        """Named per-joint listing: one list per field plus the scalar delay."""
        out = {f: self.block(f).tolist() for f in self.fields(self.include_gains)}
        out["command_delay"] = float(self.block("command_delay"))
        if model is not None:
            out["joint_names"] = model.names()
        return out


def bounds_arrays(n_joints: int, bounds: Optional[dict] = None,
                  include_gains: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Expand per-field bounds to flat arrays.

    ``bounds`` maps a field name to ``(lo, hi)`` applied to every joint or to a
    pair of per-joint sequences. Missing fields use the defaults.
    """
    bounds = dict(bounds or {})
    unknown = set(bounds) - set(DEFAULT_BOUNDS)
    if unknown:
        raise ModelError(f"unknown bound fields: {sorted(unknown)}")
    lo, hi = [], []
    for name in ParamVector.fields(include_gains) + ("command_delay",):
        pair = bounds.get(name, DEFAULT_BOUNDS[name])
        count = 1 if name == "command_delay" else n_joints
        a = np.broadcast_to(np.asarray(pair[0], dtype=float), (count,))
        b = np.broadcast_to(np.asarray(pair[1], dtype=float), (count,))
        lo.append(a)
        hi.append(b)
    lower, upper = np.concatenate(lo), np.concatenate(hi)
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise ModelError("bounds must be finite")
    if np.any(lower > upper):
        raise ModelError("lower bound exceeds upper bound")
    return lower, upper
