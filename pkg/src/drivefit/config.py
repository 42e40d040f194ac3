"""YAML configuration with a versioned schema and line-anchored errors.

Every file is a mapping with ``version: 1`` plus any of the sections below.
Commands pick the sections they need; unknown keys anywhere are errors.

    version: 1
    robot: tytan              # optional preset the model sections override
    model:
      n_joints: 12
      joint_names: [...]
      command_delay: 0.0075   # s
      velocity_filter_cutoff: 50.0   # Hz, optional
      saturation: true
      joints: {armature_inertia, viscous_damping, coulomb_friction, joint_bias}
      gains: {p_gain, d_gain}
      motors: {gear_ratio, motor_constant, coil_resistance, max_motor_torque,
               max_motor_speed, bus_voltage, regen_coefficient,
               phase_inductance, back_emf_constant}   # back_emf_constant defaults to motor_constant
      limits: {soft_lower, soft_upper, hard_lower, hard_upper}
    sim: {physics_dt, control_dt}
    chirp: {f_start, f_end, duration, amplitude, center, sample_rate, phase_offsets}
    steps: {dwell, amplitude_range, center, duration, seed, sample_rate}
    bounds: {armature_inertia: [lo, hi], ..., command_delay: [lo, hi]}
    fit: {population_size, max_iterations, initial_sigma, seed, target_loss, tol_sigma}
    trial: {battery_capacity, soc_start, soc_end, duration, distance, mass, gravity}
    pendulum: {mass, com_distance, eigenfrequency, gravity, sigma_r, sigma_f}
    leg: {base_mass, link_length, hip_inertia, knee_inertia, legs}
    reduce: {components: [{inertia, ratio}, ...]}
    bode: {f_start, f_end, points, joint}

Per-joint entries accept a scalar (broadcast to every joint) or a list.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Any, Optional

import numpy as np
import yaml

from . import presets
from .model import DriveGains, JointLimits, JointParams, ModelError, MotorParams, RobotModel, SimConfig

SCHEMA_VERSION = 1


class ConfigError(ModelError):
    pass


# value checkers take (node, where) and return a python value -----------------

def _where(node, path) -> str:
    return f"line {node.start_mark.line + 1}: {path}"


def _scalar(node, path):
    if not isinstance(node, yaml.ScalarNode):
        raise ConfigError(f"{_where(node, path)} expected a scalar")
    return yaml.safe_load(yaml.serialize(node))


def num(node, path):
    v = _scalar(node, path)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{_where(node, path)} expected a number, got {v!r}")
    return float(v)


def integer(node, path):
    v = _scalar(node, path)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{_where(node, path)} expected an integer, got {v!r}")
    return v


def boolean(node, path):
    v = _scalar(node, path)
    if not isinstance(v, bool):
        raise ConfigError(f"{_where(node, path)} expected true or false, got {v!r}")
    return v


def string(node, path):
    v = _scalar(node, path)
    if not isinstance(v, str):
        raise ConfigError(f"{_where(node, path)} expected a string, got {v!r}")
    return v


def nums(node, path):
    """A number or a list of numbers."""
    if isinstance(node, yaml.SequenceNode):
        return [num(item, f"{path}[{i}]") for i, item in enumerate(node.value)]
    return num(node, path)


def strings(node, path):
    if not isinstance(node, yaml.SequenceNode):
        raise ConfigError(f"{_where(node, path)} expected a list")
    return [string(item, f"{path}[{i}]") for i, item in enumerate(node.value)]


def pair(node, path):
    if not isinstance(node, yaml.SequenceNode) or len(node.value) != 2:
        raise ConfigError(f"{_where(node, path)} expected [lower, upper]")
    return [nums(node.value[0], f"{path}[0]"), nums(node.value[1], f"{path}[1]")]


def list_of(schema):
    def check(node, path):
        if not isinstance(node, yaml.SequenceNode):
            raise ConfigError(f"{_where(node, path)} expected a list")
        return [_convert(item, schema, f"{path}[{i}]") for i, item in enumerate(node.value)]
    return check


JOINT_KEYS = ("armature_inertia", "viscous_damping", "coulomb_friction", "joint_bias")
MOTOR_KEYS = ("gear_ratio", "motor_constant", "coil_resistance", "max_motor_torque", "max_motor_speed",
              "bus_voltage", "regen_coefficient", "phase_inductance", "back_emf_constant")
LIMIT_KEYS = ("soft_lower", "soft_upper", "hard_lower", "hard_upper")

SCHEMA = {
    "version": integer,
    "robot": string,
    "model": {
        "n_joints": integer,
        "joint_names": strings,
        "command_delay": num,
        "velocity_filter_cutoff": num,
        "saturation": boolean,
        "joints": {k: nums for k in JOINT_KEYS},
        "gains": {"p_gain": nums, "d_gain": nums},
        "motors": {k: nums for k in MOTOR_KEYS},
        "limits": {k: nums for k in LIMIT_KEYS},
    },
    "sim": {"physics_dt": num, "control_dt": num},
    "chirp": {"f_start": num, "f_end": num, "duration": num, "amplitude": nums, "center": nums,
              "sample_rate": num, "sweep": string, "phase_offsets": nums},
    "steps": {"dwell": num, "amplitude_range": nums, "center": nums, "duration": num, "seed": integer,
              "sample_rate": num},
    "bounds": {k: pair for k in JOINT_KEYS + ("command_delay",)},
    "fit": {"population_size": integer, "max_iterations": integer, "initial_sigma": num, "seed": integer,
            "target_loss": num, "tol_sigma": num},
    "trial": {"battery_capacity": num, "soc_start": num, "soc_end": num, "duration": num, "distance": num,
              "mass": num, "gravity": num},
    "pendulum": {"mass": num, "com_distance": num, "eigenfrequency": num, "gravity": num, "sigma_r": num,
                 "sigma_f": num},
    "leg": {"base_mass": num, "link_length": num, "hip_inertia": num, "knee_inertia": num, "legs": integer},
    "reduce": {"components": list_of({"inertia": num, "ratio": num})},
    "bode": {"f_start": num, "f_end": num, "points": integer, "joint": integer},
}


def _convert(node, schema, path):
    if callable(schema):
        return schema(node, path)
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{_where(node, path or '<root>')} expected a mapping")
    out = {}
    for key_node, value_node in node.value:
        key = _scalar(key_node, path)
        sub = f"{path}.{key}" if path else str(key)
        if key not in schema:
            allowed = ", ".join(sorted(schema))
            raise ConfigError(f"{_where(key_node, sub)} unknown key (allowed: {allowed})")
        if key in out:
            raise ConfigError(f"{_where(key_node, sub)} duplicate key")
        out[key] = _convert(value_node, schema[key], sub)
    return out


class Config(dict):
    """Validated config mapping that remembers its source path."""

    path: str = "<string>"

    def section(self, name: str) -> dict:
        if name not in self:
            raise ConfigError(f"{self.path}: missing section '{name}'")
        return self[name]


def loads(text: str, path: str = "<string>") -> Config:
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else "?"
        raise ConfigError(f"{path}: {where}: {getattr(exc, 'problem', exc)}") from exc
    if root is None:
        raise ConfigError(f"{path}: empty config")
    try:
        data = _convert(root, SCHEMA, "")
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if "version" not in data:
        raise ConfigError(f"{path}: line 1: missing required key 'version'")
    if data["version"] != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported config version {data['version']} (expected {SCHEMA_VERSION})")
    cfg = Config(data)
    cfg.path = path
    return cfg


def load(path) -> Config:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    return loads(text, str(path))


def merge(configs) -> Config:
    """Combine several files; a section may only appear in one of them."""
    out = Config({"version": SCHEMA_VERSION})
    paths = []
    for cfg in configs:
        for key, value in cfg.items():
            if key == "version":
                continue
            if key in out:
                raise ConfigError(f"{cfg.path}: section '{key}' already given in another config")
            out[key] = value
        paths.append(cfg.path)
    out.path = ", ".join(paths) or "<none>"
    return out


# builders -------------------------------------------------------------------

def _broadcast(value, n: int, where: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ConfigError(f"{where}: expected 1 or {n} values, got {arr.size}")
    return arr


def build_model(cfg: Config) -> RobotModel:
    """RobotModel from the ``robot`` preset and/or ``model`` section."""
    where = cfg.path
    sec = cfg.get("model", {})
    base: Optional[RobotModel] = None
    if "robot" in cfg:
        try:
            base = presets.robot(cfg["robot"])
        except KeyError as exc:
            raise ConfigError(f"{where}: {exc.args[0]}") from None
    if base is None and "model" not in cfg:
        raise ConfigError(f"{where}: need a 'robot' preset or a 'model' section")
    n = sec.get("n_joints", base.n_joints if base else None)
    if n is None:
        raise ConfigError(f"{where}: model.n_joints is required without a robot preset")
    if base is not None and n != base.n_joints:
        raise ConfigError(f"{where}: model.n_joints={n} disagrees with preset ({base.n_joints})")
    try:
        joints_sec = sec.get("joints", {})
        if base is None:
            missing = [k for k in ("armature_inertia",) if k not in joints_sec]
            if missing:
                raise ConfigError(f"{where}: model.joints.{missing[0]} is required")
        vals = {}
        for k in JOINT_KEYS:
            default = base.joint_array(k) if base else 0.0
            vals[k] = _broadcast(joints_sec.get(k, default), n, f"{where}: model.joints.{k}")
        joints = tuple(JointParams(*(float(vals[k][j]) for k in JOINT_KEYS)) for j in range(n))

        gains_sec = sec.get("gains", {})
        if base is None and "p_gain" not in gains_sec:
            raise ConfigError(f"{where}: model.gains.p_gain is required")
        kp = _broadcast(gains_sec.get("p_gain", base.gain_array("p_gain") if base else 0.0), n,
                        f"{where}: model.gains.p_gain")
        kd = _broadcast(gains_sec.get("d_gain", base.gain_array("d_gain") if base else 0.0), n,
                        f"{where}: model.gains.d_gain")
        gains = tuple(DriveGains(float(a), float(b)) for a, b in zip(kp, kd))

        motors = base.motors if base else None
        if "motors" in sec:
            msec = sec["motors"]
            for k in ("gear_ratio", "motor_constant", "coil_resistance"):
                if k not in msec and motors is None:
                    raise ConfigError(f"{where}: model.motors.{k} is required")
            cols = {}
            for k in MOTOR_KEYS:
                if k in msec:
                    cols[k] = _broadcast(msec[k], n, f"{where}: model.motors.{k}")
            if motors is None:
                motors = tuple(MotorParams(**{k: float(v[j]) for k, v in cols.items()}) for j in range(n))
            else:
                motors = tuple(replace(m, **{k: float(v[j]) for k, v in cols.items()}) for j, m in enumerate(motors))

        limits = base.limits if base else None
        if "limits" in sec:
            lsec = sec["limits"]
            missing = [k for k in LIMIT_KEYS if k not in lsec]
            if missing:
                raise ConfigError(f"{where}: model.limits.{missing[0]} is required")
            cols = {k: _broadcast(lsec[k], n, f"{where}: model.limits.{k}") for k in LIMIT_KEYS}
            limits = tuple(JointLimits(*(float(cols[k][j]) for k in LIMIT_KEYS)) for j in range(n))

        names = sec.get("joint_names", list(base.joint_names) if base and base.joint_names else None)
        if names is not None and len(names) != n:
            raise ConfigError(f"{where}: model.joint_names has {len(names)} entries for {n} joints")
        return RobotModel(
            joints=joints,
            gains=gains,
            motors=motors,
            limits=limits,
            command_delay=sec.get("command_delay", base.command_delay if base else 0.0),
            velocity_filter_cutoff=sec.get("velocity_filter_cutoff", base.velocity_filter_cutoff if base else None),
            joint_names=tuple(names) if names is not None else None,
            saturation=sec.get("saturation", base.saturation if base else True),
        )
    except ModelError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from None


def build_sim(cfg: Config) -> SimConfig:
    try:
        return SimConfig(**cfg.get("sim", {}))
    except (ModelError, TypeError) as exc:
        raise ConfigError(f"{cfg.path}: sim: {exc}") from None


def build_bounds(cfg: Config) -> dict:
    return dict(cfg.get("bounds", {}))


def section_kwargs(cfg: Config, name: str) -> dict[str, Any]:
    return dict(cfg.section(name))
