import numpy as np
import pytest

from drivefit import config
from drivefit.config import ConfigError


def test_preset_with_overrides():
    cfg = config.loads("""
version: 1
robot: tytan
model:
  command_delay: 0.01
  joints:
    joint_bias: 0.02
""")
    m = config.build_model(cfg)
    assert m.n_joints == 12
    assert m.command_delay == 0.01
    assert np.all(m.joint_array("joint_bias") == 0.02)


def test_scalar_broadcast_and_lists():
    cfg = config.loads("""
version: 1
model:
  n_joints: 3
  joints:
    armature_inertia: [0.1, 0.2, 0.3]
    viscous_damping: 0.5
  gains: {p_gain: 40, d_gain: 1}
""")
    m = config.build_model(cfg)
    assert m.joint_array("armature_inertia").tolist() == [0.1, 0.2, 0.3]
    assert m.joint_array("viscous_damping").tolist() == [0.5] * 3
    assert m.gain_array("p_gain").tolist() == [40.0] * 3


def test_unknown_key_reports_line():
    text = "version: 1\nmodel:\n  n_joints: 1\n  joints:\n    inertia: 0.1\n"
    with pytest.raises(ConfigError, match=r"line 5: model\.joints\.inertia unknown key"):
        config.loads(text)


def test_unknown_section_reports_line():
    with pytest.raises(ConfigError, match="line 2: chrip"):
        config.loads("version: 1\nchrip: {f_start: 1}\n")


@pytest.mark.parametrize("text,pattern", [
    ("robot: tytan\n", "missing required key 'version'"),
    ("version: 2\n", "unsupported config version"),
    ("version: 1\nchirp: {f_start: fast}\n", "line 2: chirp.f_start expected a number"),
    ("version: 1\nchirp: [1, 2]\n", "expected a mapping"),
    ("version: 1\nversion: 1\n", "duplicate key"),
    ("version: 1\nchirp: {f_start: 1\n", "line"),
    ("", "empty config"),
])
def test_parse_errors(text, pattern):
    with pytest.raises(ConfigError, match=pattern):
        config.loads(text)


def test_wrong_list_length():
    cfg = config.loads("version: 1\nmodel:\n  n_joints: 2\n  joints: {armature_inertia: [1, 2, 3]}\n"
                       "  gains: {p_gain: 1}\n")
    with pytest.raises(ConfigError, match="expected 1 or 2 values"):
        config.build_model(cfg)


def test_merge_rejects_repeated_section():
    a = config.loads("version: 1\nchirp: {f_start: 1}\n", "a.yaml")
    b = config.loads("version: 1\nchirp: {f_start: 2}\n", "b.yaml")
    with pytest.raises(ConfigError, match="b.yaml"):
        config.merge([a, b])


def test_missing_file():
    with pytest.raises(ConfigError):
        config.load("/nonexistent/file.yaml")


def test_shipped_configs_parse():
    from pathlib import Path
    paths = sorted((Path(__file__).parent.parent / "configs").glob("*.yaml"))
    assert paths
    for p in paths:
        config.load(p)
