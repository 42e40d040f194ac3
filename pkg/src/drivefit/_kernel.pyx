# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch rollout of independent PD-controlled joints.

Semantics mirror ``drivefit._kernel_py.rollout_batch`` operation for
operation so both backends produce the same floating point results.
"""
from libc.math cimport floor, fabs, isfinite

import numpy as np

cdef double STICK_SPEED = 1e-6
cdef double DIVERGED = 1e6


cdef inline double _delayed_target(const double[:, ::1] targets, Py_ssize_t k,
                                   Py_ssize_t j, double delay) noexcept nogil:
    cdef double x = <double>k - delay
    cdef Py_ssize_t lo
    cdef double w
    if x <= 0.0:
        return targets[0, j]
    lo = <Py_ssize_t>floor(x)
    w = x - <double>lo
    if w == 0.0:
        return targets[lo, j]
    return (1.0 - w) * targets[lo, j] + w * targets[lo + 1, j]


cdef inline double _sat_upper(double speed, double tmax, double slope, double zero) noexcept nogil:
    cdef double b = slope * (zero - speed)
    if b > tmax:
        b = tmax
    if b < 0.0:
        b = 0.0
    return b


cdef inline double _command(double tgt, double q, double v, double vf, bint use_filter,
                            double b, double kp, double kd,
                            bint lim, double slo, double shi, double hlo, double hhi,
                            bint sat, double tmax, double slope, double zero) noexcept nogil:
    """Limit-safe target -> PD torque -> torque-speed envelope."""
    cdef double qhat = tgt
    cdef double frac, tau, hi, lo
    if lim:
        if qhat > hhi and q >= shi:
            frac = (q - shi) / (hhi - shi)
            if frac > 1.0:
                frac = 1.0
            qhat = qhat - frac * (qhat - hhi)
        elif qhat < hlo and q <= slo:
            frac = (slo - q) / (slo - hlo)
            if frac > 1.0:
                frac = 1.0
            qhat = qhat - frac * (qhat - hlo)
    if use_filter:
        tau = kp * (qhat - q + b) - kd * vf
    else:
        tau = kp * (qhat - q + b) - kd * v
    if sat:
        hi = _sat_upper(v, tmax, slope, zero)
        lo = -_sat_upper(-v, tmax, slope, zero)
        if tau > hi:
            tau = hi
        elif tau < lo:
            tau = lo
    return tau


def rollout_batch(const double[:, ::1] targets,
                  const double[::1] q0,
                  const double[::1] qd0,
                  const double[:, ::1] inertia,
                  const double[:, ::1] damping,
                  const double[:, ::1] friction,
                  const double[:, ::1] bias,
                  const double[:, ::1] p_gain,
                  const double[:, ::1] d_gain,
                  const double[::1] delay,
                  const double[:, ::1] envelope,
                  const double[:, ::1] limits,
                  double filter_alpha,
                  double dt,
                  int substeps,
                  double[:, :, ::1] q_out=None,
                  double[:, :, ::1] qd_out=None,
                  double[:, :, ::1] tau_out=None,
                  const double[:, ::1] q_ref=None,
                  double[::1] loss_out=None):
    """Simulate P candidate parameter sets over K control samples.

    ``delay`` is in control samples. ``envelope`` rows are
    (enabled, max_torque, corner_speed, zero_torque_speed) per joint and
    ``limits`` rows (enabled, soft_lo, soft_hi, hard_lo, hard_hi).
    Returns a boolean array flagging diverged candidates.
    """
    cdef Py_ssize_t P = inertia.shape[0]
    cdef Py_ssize_t n = inertia.shape[1]
    cdef Py_ssize_t K = targets.shape[0]
    cdef Py_ssize_t p, j, k, s
    cdef bint want_traj = q_out is not None
    cdef bint want_qd = qd_out is not None
    cdef bint want_tau = tau_out is not None
    cdef bint want_loss = loss_out is not None and q_ref is not None
    cdef bint use_filter = filter_alpha > 0.0
    cdef double q, v, vf, v_new, tgt, tau, net, e, tf
    cdef bint sat, lim
    cdef double tmax, corner, zero, slope, slo, shi, hlo, hhi
    diverged_arr = np.zeros(P, dtype=np.uint8)
    cdef unsigned char[::1] bad = diverged_arr
    # per-candidate state for the joint currently being integrated
    scratch = np.zeros((10, P))
    cdef double[::1] qs = scratch[0]
    cdef double[::1] vs = scratch[1]
    cdef double[::1] vfs = scratch[2]
    cdef double[::1] tgts = scratch[3]
    cdef double[::1] hs = scratch[4]
    cdef double[::1] bs = scratch[5]
    cdef double[::1] kps = scratch[6]
    cdef double[::1] kds = scratch[7]
    cdef double[::1] ds = scratch[8]
    cdef double[::1] tfs = scratch[9]
    # squared errors are summed over time per joint, then over joints in order
    acc_arr = np.zeros((2, P))
    cdef double[::1] acc = acc_arr[0]
    cdef double[::1] acc_j = acc_arr[1]

    with nogil:
        for j in range(n):
            sat = envelope[j, 0] != 0.0
            tmax = envelope[j, 1]
            corner = envelope[j, 2]
            zero = envelope[j, 3]
            slope = tmax / (zero - corner) if sat else 0.0
            lim = limits[j, 0] != 0.0
            slo = limits[j, 1]
            shi = limits[j, 2]
            hlo = limits[j, 3]
            hhi = limits[j, 4]
            for p in range(P):
                qs[p] = q0[j]
                vs[p] = qd0[j]
                vfs[p] = qd0[j]
                hs[p] = dt / inertia[p, j]
                bs[p] = bias[p, j]
                kps[p] = p_gain[p, j]
                kds[p] = d_gain[p, j]
                ds[p] = damping[p, j]
                tfs[p] = friction[p, j]
                acc_j[p] = 0.0
            for k in range(K):
                for p in range(P):
                    if bad[p]:
                        continue
                    if want_traj:
                        q_out[p, k, j] = qs[p]
                    if want_qd:
                        qd_out[p, k, j] = vs[p]
                    if want_loss:
                        e = qs[p] - q_ref[k, j]
                        acc_j[p] = acc_j[p] + e * e
                    tgts[p] = _delayed_target(targets, k, j, delay[p])
                    if want_tau:
                        tau_out[p, k, j] = _command(tgts[p], qs[p], vs[p], vfs[p], use_filter, bias[p, j],
                                                    p_gain[p, j], d_gain[p, j], lim, slo, shi, hlo, hhi,
                                                    sat, tmax, slope, zero)
                if k == K - 1:
                    break
                for s in range(substeps):
                    for p in range(P):
                        q = qs[p]
                        v = vs[p]
                        vf = vfs[p]
                        tf = tfs[p]
                        tau = _command(tgts[p], q, v, vf, use_filter, bs[p], kps[p], kds[p],
                                       lim, slo, shi, hlo, hhi, sat, tmax, slope, zero)
                        # joint dynamics, semi-implicit Euler with Coulomb sticking
                        net = tau - ds[p] * v
                        if fabs(v) < STICK_SPEED:
                            if fabs(net) <= tf:
                                v_new = 0.0
                            elif net > 0.0:
                                v_new = v + (net - tf) * hs[p]
                            else:
                                v_new = v + (net + tf) * hs[p]
                        else:
                            if v > 0.0:
                                v_new = v + (net - tf) * hs[p]
                            else:
                                v_new = v + (net + tf) * hs[p]
                            if tf > 0.0 and v_new * v < 0.0:
                                v_new = 0.0
                        vs[p] = v_new
                        qs[p] = q + v_new * dt
                        if use_filter:
                            vfs[p] = vf + filter_alpha * (v_new - vf)
                for p in range(P):
                    if not (fabs(qs[p]) < DIVERGED and fabs(vs[p]) < DIVERGED):
                        bad[p] = 1
            for p in range(P):
                acc[p] = acc[p] + acc_j[p]
        if want_loss:
            for p in range(P):
                if bad[p]:
                    loss_out[p] = 1.0 / 0.0
                else:
                    loss_out[p] = acc[p] / <double>K
    return diverged_arr.astype(bool)
