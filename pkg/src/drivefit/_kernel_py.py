"""Pure numpy implementation of the batch rollout kernel.

Vectorised over (candidate, joint); loops over time in Python. Used when the
compiled extension is unavailable or ``DRIVEFIT_PURE_PYTHON=1`` is set.
"""
import numpy as np

STICK_SPEED = 1e-6
DIVERGED = 1e6


def _delayed_targets(targets, k, delay):
    x = k - delay
    lo = np.floor(np.maximum(x, 0.0)).astype(np.intp)
    w = np.where(x <= 0.0, 0.0, x - lo)
    hi = np.minimum(lo + 1, targets.shape[0] - 1)
    base = targets[lo]
    blend = (1.0 - w)[:, None] * targets[lo] + w[:, None] * targets[hi]
    return np.where((w == 0.0)[:, None], base, blend)


def _sat_upper(speed, tmax, slope, zero):
    b = slope * (zero - speed)
    b = np.where(b > tmax, tmax, b)
    return np.where(b < 0.0, 0.0, b)


def rollout_batch(targets, q0, qd0, inertia, damping, friction, bias, p_gain, d_gain,
                  delay, envelope, limits, filter_alpha, dt, substeps,
                  q_out=None, qd_out=None, tau_out=None, q_ref=None, loss_out=None):
    P, n = inertia.shape
    K = targets.shape[0]
    use_filter = filter_alpha > 0.0
    sat = envelope[:, 0] != 0.0
    tmax, corner, zero = envelope[:, 1], envelope[:, 2], envelope[:, 3]
    with np.errstate(all="ignore"):
        slope = np.where(sat, tmax / (zero - corner), 0.0)
    lim = limits[:, 0] != 0.0
    slo, shi, hlo, hhi = limits[:, 1], limits[:, 2], limits[:, 3], limits[:, 4]
    want_loss = loss_out is not None and q_ref is not None

    q = np.broadcast_to(q0, (P, n)).copy()
    v = np.broadcast_to(qd0, (P, n)).copy()
    vf = v.copy()
    acc = np.zeros((P, n))
    bad = np.zeros(P, dtype=bool)

    with np.errstate(all="ignore"):
        _loop(targets, delay, K, substeps, dt, use_filter, filter_alpha, sat, tmax, slope, zero,
              lim, slo, shi, hlo, hhi, inertia, damping, friction, bias, p_gain, d_gain,
              q, v, vf, acc, bad, q_out, qd_out, tau_out, q_ref if want_loss else None)

    if want_loss:
        # same summation order as the compiled kernel: joints added one by one
        total = np.zeros(P)
        for j in range(n):
            total = total + acc[:, j]
        loss_out[:] = np.where(bad, np.inf, total / K)
    return bad


def _loop(targets, delay, K, substeps, dt, use_filter, filter_alpha, sat, tmax, slope, zero,
          lim, slo, shi, hlo, hhi, inertia, damping, friction, bias, p_gain, d_gain,
          q, v, vf, acc, bad, q_out, qd_out, tau_out, q_ref):
    h = dt / inertia
    for k in range(K):
        if q_out is not None:
            q_out[:, k, :] = q
        if qd_out is not None:
            qd_out[:, k, :] = v
        if q_ref is not None:
            e = q - q_ref[k]
            acc += e * e
        tgt = _delayed_targets(targets, k, delay)
        for s in range(substeps):
            qhat = tgt
            if lim.any():
                up = lim & (qhat > hhi) & (q >= shi)
                dn = lim & ~up & (qhat < hlo) & (q <= slo)
                with np.errstate(invalid="ignore", divide="ignore"):
                    f_up = np.minimum((q - shi) / (hhi - shi), 1.0)
                    f_dn = np.minimum((slo - q) / (slo - hlo), 1.0)
                qhat = np.where(up, qhat - f_up * (qhat - hhi), qhat)
                qhat = np.where(dn, qhat - f_dn * (qhat - hlo), qhat)
            vel = vf if use_filter else v
            tau = p_gain * (qhat - q + bias) - d_gain * vel
            if sat.any():
                hi = _sat_upper(v, tmax, slope, zero)
                lo = -_sat_upper(-v, tmax, slope, zero)
                tau = np.where(sat & (tau > hi), hi, np.where(sat & (tau < lo), lo, tau))
            if tau_out is not None and s == 0:
                tau_out[:, k, :] = tau
            if k == K - 1:
                break
            net = tau - damping * v
            stuck_region = np.abs(v) < STICK_SPEED
            sgn = np.where(stuck_region, np.where(net > 0.0, 1.0, -1.0), np.where(v > 0.0, 1.0, -1.0))
            v_new = v + (net - sgn * friction) * h
            stick = stuck_region & (np.abs(net) <= friction)
            cross = ~stuck_region & (friction > 0.0) & (v_new * v < 0.0)
            v_new = np.where(stick | cross, 0.0, v_new)
            v = v_new
            q = q + v * dt
            if use_filter:
                vf = vf + filter_alpha * (v - vf)
        ok = (np.abs(q) < DIVERGED) & (np.abs(v) < DIVERGED)
        bad |= ~ok.all(axis=1)
        if bad.all():
            break
