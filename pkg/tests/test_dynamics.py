import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drivefit import kernels
from drivefit.dynamics import (
    BatchParams,
    ConfigurationError,
    SaturationEnvelope,
    build_envelope,
    delay_in_samples,
    filter_alpha,
    limit_safe_target,
    pd_torque,
    rollout,
    rollout_batch,
    saturate_torque,
    step_joint,
)
from drivefit.model import DriveGains, JointLimits, JointParams, JointState, MotorParams, RobotModel, SimConfig
from drivefit.presets import TYTAN_HIP, robot
from drivefit.trajectory import TrajectoryError

from helpers import make_targets, single_joint

GAINS = DriveGains(60.0, 2.0)


# pd_torque ---------------------------------------------------------------------

def test_pd_torque_zero_at_equilibrium():
    assert pd_torque(0.3, JointState(0.3, 0.0), GAINS) == 0.0


def test_pd_torque_proportional_term():
    assert pd_torque(0.1, JointState(0.0, 0.0), GAINS) == pytest.approx(6.0, abs=1e-12)


def test_pd_torque_bias_and_damping():
    # 60 * 0.05 - 2 * 1
    assert pd_torque(0.2, JointState(0.2, 1.0), GAINS, bias=0.05) == pytest.approx(1.0, abs=1e-12)


def test_pd_torque_uses_filtered_velocity_when_asked():
    s = JointState(0.0, 1.0, filtered_velocity=0.5)
    assert pd_torque(0.0, s, GAINS, use_filtered=True) == pytest.approx(-1.0)
    assert pd_torque(0.0, s, GAINS) == pytest.approx(-2.0)


# envelope ----------------------------------------------------------------------

def test_envelope_tytan_hip_stall_and_joint_ceiling():
    motor_side = build_envelope(TYTAN_HIP, joint_side=False)
    assert motor_side.upper(0.0) == pytest.approx(25.0)
    joint_side = build_envelope(TYTAN_HIP)
    assert joint_side.upper(0.0) == pytest.approx(140.0)
    assert joint_side.max_torque == pytest.approx(25.0 * 5.6)


def test_envelope_zero_at_zero_torque_speed():
    env = build_envelope(TYTAN_HIP)
    assert env.upper(env.zero_torque_speed) == 0.0
    assert env.upper(2 * env.zero_torque_speed) == 0.0


def test_envelope_matches_voltage_limited_formula():
    m = TYTAN_HIP
    env = build_envelope(m, joint_side=False)
    for w in np.linspace(0, 100, 41):
        expected = min(m.max_motor_torque, max(0.0, m.motor_constant * (m.bus_voltage - m.k_omega * w) / m.coil_resistance))
        assert env.upper(w) == pytest.approx(expected, abs=1e-9)


def test_envelope_point_symmetric_and_monotone():
    env = build_envelope(TYTAN_HIP)
    w = np.linspace(-30, 30, 601)
    assert np.allclose(env.upper(w), -env.lower(-w))
    mag = env.upper(np.abs(w))
    order = np.argsort(np.abs(w))
    assert np.all(np.diff(mag[order]) <= 1e-12)


def test_envelope_requires_finite_voltage():
    with pytest.raises(ConfigurationError):
        build_envelope(MotorParams(gear_ratio=1, motor_constant=1, coil_resistance=1, max_motor_torque=1))


def test_envelope_rejects_torque_above_stall():
    m = MotorParams(gear_ratio=1, motor_constant=0.1, coil_resistance=1.0, max_motor_torque=10.0, bus_voltage=10.0)
    with pytest.raises(ConfigurationError):
        build_envelope(m)


def test_envelope_validation():
    with pytest.raises(ConfigurationError):
        SaturationEnvelope(10.0, 5.0, 4.0)


# saturation --------------------------------------------------------------------

ENV = SaturationEnvelope(max_torque=25.0, emf_corner_speed=10.0, zero_torque_speed=20.0)


def test_saturate_interior_and_clamp():
    assert saturate_torque(10.0, 0.0, ENV) == 10.0
    assert saturate_torque(40.0, 0.0, ENV) == 25.0
    assert saturate_torque(-40.0, 0.0, ENV) == -25.0


def test_saturate_negative_matches_dense_sweep():
    # braking torque opposing positive motion keeps the full ceiling
    for w in np.linspace(0, 19, 20):
        assert saturate_torque(-40.0, w, ENV) == pytest.approx(-25.0)
    # driving torque along negative motion is back-EMF limited
    w = -15.0
    assert saturate_torque(-40.0, w, ENV) == pytest.approx(-ENV.upper(15.0))


def test_saturate_none_passthrough():
    assert saturate_torque(1e6, 3.0, None) == 1e6


@given(st.floats(-1e4, 1e4), st.floats(-50, 50))
def test_saturate_idempotent_bounded_sign_preserving(cmd, w):
    once = saturate_torque(cmd, w, ENV)
    assert saturate_torque(once, w, ENV) == once
    assert ENV.lower(w) <= once <= ENV.upper(w)
    assert once == 0.0 or math.copysign(1, once) == math.copysign(1, cmd)
    assert abs(once) <= abs(cmd)


# limit-safe target -------------------------------------------------------------

LIM = JointLimits(soft_lower=-1.0, soft_upper=1.0, hard_lower=-1.2, hard_upper=1.2)


def test_limit_target_at_hard_limit():
    assert limit_safe_target(2.0, 1.2, LIM) == pytest.approx(1.2)
    assert limit_safe_target(-2.0, -1.2, LIM) == pytest.approx(-1.2)


def test_limit_target_feasible_unchanged():
    assert limit_safe_target(0.5, 0.1, LIM) == 0.5
    # infeasible target but far from the limit
    assert limit_safe_target(2.0, 0.1, LIM) == 2.0


def test_limit_target_midpoint_interpolation():
    delta = 0.4
    assert limit_safe_target(1.2 + delta, 1.1, LIM) == pytest.approx(1.2 + delta / 2)


def test_limit_target_beyond_hard_limit_stays_at_limit():
    assert limit_safe_target(2.0, 1.5, LIM) == pytest.approx(1.2)


def test_limit_target_grid_continuous_and_monotone():
    qs = np.linspace(0.9, 1.3, 801)
    for raw in (1.25, 1.5, 3.0):
        vals = np.array([limit_safe_target(raw, q, LIM) for q in qs])
        assert np.max(np.abs(np.diff(vals))) < 5 * (raw - 1.2) * (qs[1] - qs[0]) / 0.2 + 1e-12
        assert np.all(np.diff(vals) <= 1e-15)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_limit_target_never_pushes_into_violated_limit(raw, q):
    out = limit_safe_target(raw, q, LIM)
    if q >= LIM.hard_upper:
        assert out - q <= 1e-12 or out <= LIM.hard_upper
        assert out <= max(raw, LIM.hard_upper) + 1e-12
    if q <= LIM.hard_lower:
        assert out >= min(raw, LIM.hard_lower) - 1e-12


# step_joint --------------------------------------------------------------------

def test_step_static_equilibrium_with_friction():
    p = JointParams(1.0, 0.5, 0.3)
    s = step_joint(JointState(0.2, 0.0), 0.0, p, 1e-3)
    assert (s.position, s.velocity) == (0.2, 0.0)
    s = step_joint(JointState(0.2, 0.0), 0.25, p, 1e-3)
    assert s.velocity == 0.0


def test_step_pure_inertia():
    s = step_joint(JointState(0.0, 0.0), 1.0, JointParams(1.0), 0.001)
    assert s.velocity == pytest.approx(0.001)


def test_step_first_order_terminal_velocity():
    tau, d, inertia, dt = 2.0, 4.0, 0.5, 1e-4
    p = JointParams(inertia, d)
    s = JointState(0.0, 0.0)
    steps = int(10 * inertia / d / dt)
    for _ in range(steps):
        s = step_joint(s, tau, p, dt)
    assert s.velocity == pytest.approx(tau / d, rel=0.01)
    # and the transient follows the exponential
    s = JointState(0.0, 0.0)
    tc = inertia / d
    for _ in range(int(tc / dt)):
        s = step_joint(s, tau, p, dt)
    assert s.velocity == pytest.approx(tau / d * (1 - math.exp(-1)), rel=0.01)


def test_step_friction_cannot_reverse_velocity():
    p = JointParams(1.0, 0.0, 5.0)
    s = step_joint(JointState(0.0, 1e-3), 0.0, p, 1e-3)
    assert s.velocity == 0.0


def test_step_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        step_joint(JointState(0.0), 0.0, JointParams(1.0), 0.0)


@settings(max_examples=60)
@given(
    inertia=st.floats(0.01, 1.0),
    damping=st.floats(0.0, 5.0),
    friction=st.floats(0.0, 2.0),
    v0=st.floats(-20, 20),
)
def test_passivity_without_command(inertia, damping, friction, v0):
    dt = 1e-3
    if damping * dt / inertia > 1.0:
        damping = inertia / dt
    p = JointParams(inertia, damping, friction)
    s = JointState(0.0, v0)
    energy = 0.5 * inertia * v0 * v0
    for _ in range(200):
        s = step_joint(s, 0.0, p, dt)
        e = 0.5 * inertia * s.velocity ** 2
        assert e <= energy + 1e-15
        energy = e


# rollout -------------------------------------------------------------------------

def test_rollout_equilibrium_hold(sim):
    m = single_joint(friction=0.0)
    tr = make_targets(np.full(400, 0.3), q0=0.3)
    out = rollout(m, tr, sim)
    assert np.all(out.q == 0.3)
    assert np.all(out.qd == 0.0)


def test_integer_delay_equals_shifted_targets(sim):
    k = 800
    t = np.arange(k) * sim.control_dt
    target = 0.2 * np.sin(2 * np.pi * 1.5 * t) + 0.05 * np.sin(2 * np.pi * 4 * t)
    delayed = single_joint(damping=0.3, friction=0.02, delay=7.5e-3)
    plain = single_joint(damping=0.3, friction=0.02, delay=0.0)
    a = rollout(delayed, make_targets(target), sim)
    shifted = np.concatenate([np.full(3, target[0]), target[:-3]])
    b = rollout(plain, make_targets(shifted), sim)
    assert np.array_equal(a.q, b.q)
    assert np.array_equal(a.qd, b.qd)


def test_delay_snaps_to_integer_samples():
    d = delay_in_samples(np.array([7.5e-3, 7.5e-3 + 1e-13, 1e-3]), 2.5e-3)
    assert d[0] == 3.0 and d[1] == 3.0
    assert d[2] == pytest.approx(0.4)


def test_fractional_delay_interpolates(sim):
    # a half-sample delay of a ramp is the ramp shifted by half a sample
    k = 200
    ramp = np.arange(k) * 1e-3
    m_half = single_joint(delay=0.5 * sim.control_dt)
    m_zero = single_joint()
    a = rollout(m_half, make_targets(ramp), sim)
    shifted = np.concatenate([[0.0], ramp[:-1] + 0.5e-3])
    b = rollout(m_zero, make_targets(shifted), sim)
    assert np.allclose(a.q, b.q, atol=1e-15)


@pytest.mark.parametrize("uc", [0.5, 2.0, 3.0, 10.0])
def test_scaling_invariance(uc, sim):
    k = 1200
    t = np.arange(k) * sim.control_dt
    target = 0.1 * np.sin(2 * np.pi * (0.3 * t + 0.5 * t * t))
    base = robot("tytan", saturation=False)
    base = base.with_joint_params(base.joint_array("armature_inertia"), base.joint_array("viscous_damping"),
                                  np.zeros(12), base.joint_array("joint_bias"))
    tr = make_targets(np.tile(target[:, None], (1, 12)))
    a = rollout(base, tr, sim)
    b = rollout(base.scaled(uc), tr, sim)
    assert np.max(np.abs(a.q - b.q)) < 1e-9


def test_step_response_matches_second_order_solution():
    sim = SimConfig(physics_dt=1e-4, control_dt=1e-3)
    inertia, p_gain, d_gain, amp = 0.1, 60.0, 2.0, 0.05
    m = single_joint(inertia=inertia, p=p_gain, d=d_gain)
    k = 3000
    out = rollout(m, make_targets(np.full(k, amp), control_dt=sim.control_dt), sim)
    wn = math.sqrt(p_gain / inertia)
    zeta = d_gain / (2 * math.sqrt(p_gain * inertia))
    wd = wn * math.sqrt(1 - zeta ** 2)
    t = out.t
    exact = amp * (1 - np.exp(-zeta * wn * t) * (np.cos(wd * t) + zeta / math.sqrt(1 - zeta ** 2) * np.sin(wd * t)))
    assert np.max(np.abs(out.q[:, 0] - exact)) < 1e-4


def test_rollout_deterministic(sim):
    m = robot("tytan")
    t = np.arange(600) * sim.control_dt
    tr = make_targets(np.tile(0.1 * np.sin(2 * np.pi * 2 * t)[:, None], (1, 12)))
    a = rollout(m, tr, sim)
    b = rollout(m, tr, sim)
    assert np.array_equal(a.q, b.q) and np.array_equal(a.tau, b.tau)


def test_rollout_rejects_nonuniform_and_nan(sim):
    m = single_joint()
    tr = make_targets(np.zeros(10))
    tr.t[5] += 1e-4
    with pytest.raises(TrajectoryError):
        rollout(m, tr, sim)
    tr = make_targets(np.zeros(10))
    tr.target[3, 0] = np.nan
    with pytest.raises(TrajectoryError):
        rollout(m, tr, sim)


def test_rollout_rejects_wrong_sample_period(sim):
    with pytest.raises(TrajectoryError):
        rollout(single_joint(), make_targets(np.zeros(10), control_dt=1e-3), sim)


def test_rollout_divergence_raises():
    # explicit-Euler unstable: damping term overshoots every substep
    m = single_joint(inertia=1e-6, p=60.0, d=2.0)
    with pytest.raises(FloatingPointError):
        rollout(m, make_targets(np.full(200, 0.1)), SimConfig())


def test_saturation_limits_applied_torque(sim):
    m = RobotModel(joints=(JointParams(0.1, 0.1),), gains=(DriveGains(60, 2),), motors=(TYTAN_HIP,))
    out = rollout(m, make_targets(np.full(400, 5.0)), sim)
    env = build_envelope(TYTAN_HIP)
    assert np.max(np.abs(out.tau)) <= env.max_torque + 1e-9
    assert np.all(out.tau <= env.upper(out.qd) + 1e-9)


def test_joint_limits_hold_joint_at_hard_limit(sim):
    lim = JointLimits(-0.5, 0.5, -0.6, 0.6)
    m = RobotModel(joints=(JointParams(0.1, 0.5),), gains=(DriveGains(60, 2),), limits=(lim,))
    out = rollout(m, make_targets(np.full(2000, 2.0)), sim)
    assert out.q[-1, 0] == pytest.approx(0.6, abs=1e-3)
    # past the hard limit the proportional part never pushes further out
    beyond = out.q[:, 0] >= 0.6
    assert beyond.any()
    p_part = out.tau[beyond, 0] + 2.0 * out.qd[beyond, 0]
    assert np.all(p_part <= 1e-9)


def test_velocity_filter_changes_command_only(sim):
    t = np.arange(400) * sim.control_dt
    tr = make_targets(0.1 * np.sin(2 * np.pi * 3 * t))
    raw = rollout(single_joint(), tr, sim)
    filt = rollout(single_joint(velocity_filter_cutoff=20.0), tr, sim)
    assert not np.array_equal(raw.q, filt.q)
    # a very high cutoff approaches the unfiltered response
    fast = rollout(single_joint(velocity_filter_cutoff=1e6), tr, sim)
    assert np.max(np.abs(fast.q - raw.q)) < 1e-9


def test_filter_alpha_pole_mapping():
    assert filter_alpha(None, 1e-3) == 0.0
    assert filter_alpha(10.0, 1e-3) == pytest.approx(1 - math.exp(-2 * math.pi * 10 * 1e-3))


# backends against a scalar reference built from the public step functions -----------

def reference_rollout(model, targets, sim, q0, qd0):
    n = model.n_joints
    K = targets.n_samples
    delay = float(delay_in_samples(model.command_delay, sim.control_dt))
    envs = [build_envelope(m) if model.motors is not None and model.saturation else None
            for m in (model.motors or [None] * n)]
    lims = model.limits or [None] * n
    alpha = filter_alpha(model.velocity_filter_cutoff, sim.physics_dt)
    q = np.zeros((K, n))
    qd = np.zeros((K, n))
    tau = np.zeros((K, n))
    for j in range(n):
        jp, g = model.joints[j], model.gains[j]
        s = JointState(q0[j], qd0[j])
        for k in range(K):
            q[k, j], qd[k, j] = s.position, s.velocity
            x = k - delay
            if x <= 0:
                tgt = targets.target[0, j]
            else:
                lo = int(math.floor(x))
                w = x - lo
                tgt = targets.target[lo, j] if w == 0 else (1 - w) * targets.target[lo, j] + w * targets.target[lo + 1, j]
            for sub in range(sim.substeps):
                qhat = limit_safe_target(tgt, s.position, lims[j])
                cmd = pd_torque(qhat, s, g, jp.joint_bias, use_filtered=alpha > 0)
                cmd = saturate_torque(cmd, s.velocity, envs[j])
                if sub == 0:
                    tau[k, j] = cmd
                if k == K - 1:
                    break
                s = step_joint(s, cmd, jp, sim.physics_dt, alpha)
    return q, qd, tau


def _mixed_model():
    lim = JointLimits(-0.15, 0.15, -0.2, 0.2)
    return RobotModel(
        joints=(JointParams(0.05, 0.3, 0.4, 0.01), JointParams(0.2, 1.0, 0.0, -0.02), JointParams(0.004, 2.0, 0.05)),
        gains=(DriveGains(60, 2),) * 3,
        motors=(TYTAN_HIP, TYTAN_HIP, TYTAN_HIP),
        limits=(lim, lim, lim),
        command_delay=4e-3,
        velocity_filter_cutoff=40.0,
    )


@pytest.mark.parametrize("backend", kernels.available_backends())
def test_backend_matches_scalar_reference(backend, sim):
    m = _mixed_model()
    t = np.arange(300) * sim.control_dt
    target = np.column_stack([0.3 * np.sin(2 * np.pi * 2 * t), 0.25 * np.sin(2 * np.pi * 5 * t), 0.1 * np.sign(np.sin(6 * t))])
    tr = make_targets(target)
    q_ref, qd_ref, tau_ref = reference_rollout(m, tr, sim, np.zeros(3), np.zeros(3))
    out = rollout(m, tr, sim, backend=backend)
    assert np.array_equal(out.q, q_ref)
    assert np.array_equal(out.qd, qd_ref)
    assert np.array_equal(out.tau, tau_ref)


@pytest.mark.skipif("cython" not in kernels.available_backends(), reason="compiled kernel not built")
def test_backends_bit_identical_on_batch(sim):
    m = robot("tytan")
    rng = np.random.default_rng(3)
    t = np.arange(400) * sim.control_dt
    tr = make_targets(0.1 * np.sin(2 * np.pi * (0.5 + rng.uniform(0, 3, 12)) * t[:, None]))
    P = 7
    batch = BatchParams.from_models([m] * P)
    batch.inertia = batch.inertia * rng.uniform(0.5, 2, batch.inertia.shape)
    batch.friction = batch.friction + rng.uniform(0, 0.5, batch.friction.shape)
    batch.delay = rng.uniform(0, 0.02, P)
    res = {}
    for name in ("python", "cython"):
        res[name] = rollout_batch(m, batch, tr, sim, tr.q[0], tr.qd[0], q_ref=tr.target, backend=name)
    for a, b in zip(res["python"][:3], res["cython"][:3]):
        assert np.array_equal(a, b)
    assert np.array_equal(res["python"][3], res["cython"][3])
    assert np.array_equal(res["python"][4], res["cython"][4])
