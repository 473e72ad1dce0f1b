# cython: language_level=3
"""Compiled time-stepping kernels.

Same algorithms and signatures as ``heatdrift._pykernels``; see that module
for the state layout and semantics.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, fabs

from heatdrift.errors import InstabilityError

cnp.import_array()

cdef double NEG_TOL = 1e-12
cdef int N_MOMENTS = 9
cdef int LINEAR_CLASS[9]
LINEAR_CLASS[:] = [3, 2, 0, 1, 2, 0, 3, 2, 0]
cdef int NONNEG[4]
NONNEG[:] = [0, 2, 6, 8]


cdef void _phi123(double z, double* p1, double* p2, double* p3) noexcept nogil:
    cdef double t1, t2, t3, ez
    cdef int n
    if fabs(z) < 1.0:
        t1 = 1.0
        t2 = 0.5
        t3 = 1.0 / 6.0
        p1[0] = 0.0
        p2[0] = 0.0
        p3[0] = 0.0
        for n in range(20):
            p1[0] += t1
            p2[0] += t2
            p3[0] += t3
            t1 *= z / (n + 2)
            t2 *= z / (n + 3)
            t3 *= z / (n + 4)
        return
    ez = exp(z)
    p1[0] = (ez - 1.0) / z
    p2[0] = (ez - 1.0 - z) / (z * z)
    p3[0] = (ez - 1.0 - z - 0.5 * z * z) / (z * z * z)


cdef void _exprk_coef(double rate, double h, double* c) noexcept nogil:
    # c = [E, E2, a21, a31, a32, a41, a42, a51, a52, a54, b1, b4, b5], a/b scaled by h
    cdef double z = rate * h
    cdef double p1, p2, p3, q1, q2, q3, a52, a54
    _phi123(z, &p1, &p2, &p3)
    _phi123(0.5 * z, &q1, &q2, &q3)
    a52 = 0.5 * q2 - p3 + 0.25 * p2 - 0.5 * q3
    a54 = 0.25 * q2 - a52
    c[0] = exp(z)
    c[1] = exp(0.5 * z)
    c[2] = h * 0.5 * q1
    c[3] = h * (0.5 * q1 - q2)
    c[4] = h * q2
    c[5] = h * (p1 - 2.0 * p2)
    c[6] = h * p2
    c[7] = h * (0.5 * q1 - 2.0 * a52 - a54)
    c[8] = h * a52
    c[9] = h * a54
    c[10] = h * (p1 - 3.0 * p2 + 4.0 * p3)
    c[11] = h * (-p2 + 4.0 * p3)
    c[12] = h * (4.0 * p2 - 8.0 * p3)


cdef void _moment_nonlinear(double* y, double gamma, double rho, double fstar, double ku0,
                            double* out) noexcept nogil:
    cdef double su = y[0], suf = y[1], sf = y[2]
    cdef double mu = y[3], mu_ = y[4], mf = y[5]
    cdef double pu = y[6], puf = y[7], pf = y[8]
    cdef double ku = su / rho
    cdef double kf = suf / rho
    cdef double innov = mu_ - mu
    out[0] = 2.0 * suf + gamma - su * su / rho + 2.0 * ku0 * su
    out[1] = sf - su * suf / rho + ku0 * suf
    out[2] = -suf * suf / rho
    out[3] = fstar
    out[4] = mf - ku * innov + ku0 * mu_
    out[5] = -kf * innov
    out[6] = 2.0 * puf + gamma - 2.0 * ku * pu + rho * ku * ku + 2.0 * ku0 * pu
    out[7] = pf - ku * puf - kf * pu + rho * ku * kf + ku0 * puf
    out[8] = -2.0 * kf * puf + rho * kf * kf


cdef inline double _next_step(double t, double t_target, double h_min, double h_max, double growth) noexcept nogil:
    cdef double h = growth * t
    if h < h_min:
        h = h_min
    if h > h_max:
        h = h_max
    if t + h * (1.0 + 1e-9) >= t_target:
        h = t_target - t
    return h


def integrate_moments(double k2, double gamma, double rho, double fstar, double sigma_f0,
                      t_out, double h_min, double h_max, double growth):
    cdef double[::1] tout = np.ascontiguousarray(t_out, dtype=np.float64)
    cdef Py_ssize_t n_out = tout.shape[0]
    out_arr = np.empty((n_out, 9), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double y[9]
    cdef double u[9]
    cdef double n1[9]
    cdef double n2[9]
    cdef double n3[9]
    cdef double n4[9]
    cdef double n5[9]
    cdef double coef[4][13]
    cdef double rates[4]
    cdef double t = 0.0, h, t_target, ku0
    cdef double* cs
    cdef Py_ssize_t j
    cdef int i, q, bad = -1
    for i in range(9):
        y[i] = 0.0
    y[2] = sigma_f0
    with nogil:
        for j in range(n_out):
            t_target = tout[j]
            while t < t_target:
                h = _next_step(t, t_target, h_min, h_max, growth)
                ku0 = y[0] / rho
                rates[0] = 0.0
                rates[1] = -k2
                rates[2] = -(k2 + ku0)
                rates[3] = -2.0 * (k2 + ku0)
                for i in range(4):
                    _exprk_coef(rates[i], h, &coef[i][0])
                _moment_nonlinear(y, gamma, rho, fstar, ku0, n1)
                for i in range(9):
                    cs = &coef[LINEAR_CLASS[i]][0]
                    u[i] = cs[1] * y[i] + cs[2] * n1[i]
                _moment_nonlinear(u, gamma, rho, fstar, ku0, n2)
                for i in range(9):
                    cs = &coef[LINEAR_CLASS[i]][0]
                    u[i] = cs[1] * y[i] + cs[3] * n1[i] + cs[4] * n2[i]
                _moment_nonlinear(u, gamma, rho, fstar, ku0, n3)
                for i in range(9):
                    cs = &coef[LINEAR_CLASS[i]][0]
                    u[i] = cs[0] * y[i] + cs[5] * n1[i] + cs[6] * (n2[i] + n3[i])
                _moment_nonlinear(u, gamma, rho, fstar, ku0, n4)
                for i in range(9):
                    cs = &coef[LINEAR_CLASS[i]][0]
                    u[i] = cs[1] * y[i] + cs[7] * n1[i] + cs[8] * (n2[i] + n3[i]) + cs[9] * n4[i]
                _moment_nonlinear(u, gamma, rho, fstar, ku0, n5)
                for i in range(9):
                    cs = &coef[LINEAR_CLASS[i]][0]
                    y[i] = cs[0] * y[i] + cs[10] * n1[i] + cs[11] * n4[i] + cs[12] * n5[i]
                t += h
                for q in range(4):
                    i = NONNEG[q]
                    if y[i] < 0.0:
                        if y[i] < -NEG_TOL:
                            bad = i
                            break
                        y[i] = 0.0
                if bad >= 0:
                    break
            if bad >= 0:
                break
            for i in range(9):
                out[j, i] = y[i]
    if bad >= 0:
        raise InstabilityError(
            f"variance component {bad} = {y[bad]:.3e} < 0 at t = {t:.6g}; step too large", t=t
        )
    return out_arr


cdef inline void _stationary_rhs(double s, double m, double p, double a, double fstar,
                                 double* ds, double* dm, double* dp) noexcept nogil:
    ds[0] = -a * s * s
    dm[0] = -a * s * (m - fstar)
    dp[0] = -2.0 * a * s * p + a * s * s


def integrate_stationary(double k2, double rho, double fstar, double sigma_f0,
                         t_out, double h_min, double h_max, double growth):
    cdef double[::1] tout = np.ascontiguousarray(t_out, dtype=np.float64)
    cdef Py_ssize_t n_out = tout.shape[0]
    out_arr = np.empty((n_out, 3), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double a = 1.0 / (rho * k2 * k2)
    cdef double s = sigma_f0, m = 0.0, p = 0.0
    cdef double s1, m1, p1, s2, m2, p2, s3, m3, p3, s4, m4, p4
    cdef double t = 0.0, h, t_target
    cdef Py_ssize_t j
    cdef bint bad = False
    with nogil:
        for j in range(n_out):
            t_target = tout[j]
            while t < t_target:
                h = _next_step(t, t_target, h_min, h_max, growth)
                _stationary_rhs(s, m, p, a, fstar, &s1, &m1, &p1)
                _stationary_rhs(s + 0.5 * h * s1, m + 0.5 * h * m1, p + 0.5 * h * p1, a, fstar, &s2, &m2, &p2)
                _stationary_rhs(s + 0.5 * h * s2, m + 0.5 * h * m2, p + 0.5 * h * p2, a, fstar, &s3, &m3, &p3)
                _stationary_rhs(s + h * s3, m + h * m3, p + h * p3, a, fstar, &s4, &m4, &p4)
                s = s + h / 6.0 * (s1 + 2.0 * s2 + 2.0 * s3 + s4)
                m = m + h / 6.0 * (m1 + 2.0 * m2 + 2.0 * m3 + m4)
                p = p + h / 6.0 * (p1 + 2.0 * p2 + 2.0 * p3 + p4)
                t += h
                if s < 0.0 or p < 0.0:
                    if s < -NEG_TOL or p < -NEG_TOL:
                        bad = True
                        break
                    if s < 0.0:
                        s = 0.0
                    if p < 0.0:
                        p = 0.0
            if bad:
                break
            out[j, 0] = s
            out[j, 1] = m
            out[j, 2] = p
    if bad:
        raise InstabilityError(f"negative variance at t = {t:.6g}", t=t)
    return out_arr


cdef inline void _riccati(double su, double suf, double sf, double k2, double gamma, double rho,
                          double* dsu, double* dsuf, double* dsf) noexcept nogil:
    dsu[0] = -2.0 * k2 * su + 2.0 * suf + gamma - su * su / rho
    dsuf[0] = -k2 * suf + sf - su * suf / rho
    dsf[0] = -suf * suf / rho


cdef inline void _riccati_rk4(double* su, double* suf, double* sf, double k2, double gamma,
                              double rho, double h) noexcept nogil:
    cdef double a1, b1, c1, a2, b2, c2, a3, b3, c3, a4, b4, c4
    _riccati(su[0], suf[0], sf[0], k2, gamma, rho, &a1, &b1, &c1)
    _riccati(su[0] + 0.5 * h * a1, suf[0] + 0.5 * h * b1, sf[0] + 0.5 * h * c1, k2, gamma, rho, &a2, &b2, &c2)
    _riccati(su[0] + 0.5 * h * a2, suf[0] + 0.5 * h * b2, sf[0] + 0.5 * h * c2, k2, gamma, rho, &a3, &b3, &c3)
    _riccati(su[0] + h * a3, suf[0] + h * b3, sf[0] + h * c3, k2, gamma, rho, &a4, &b4, &c4)
    su[0] = su[0] + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    suf[0] = suf[0] + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
    sf[0] = sf[0] + h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)


def riccati_rk4(double su, double suf, double sf, double k2, double gamma, double rho, double h):
    _riccati_rk4(&su, &suf, &sf, k2, gamma, rho, h)
    return su, suf, sf


def filter_path(double k2, double gamma, double rho, double sigma_f0, h, dy, record):
    cdef double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef double[::1] dyv = np.ascontiguousarray(dy, dtype=np.float64)
    cdef long long[::1] rec = np.ascontiguousarray(record, dtype=np.int64)
    cdef Py_ssize_t n_steps = hv.shape[0]
    cdef Py_ssize_t n_rec = rec.shape[0]
    out_arr = np.empty((n_rec, 5), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double ub = 0.0, fb = 0.0, su = 0.0, suf = 0.0, sf = sigma_f0
    cdef double hn, ku, kf, innov, decay, weight, ub_new, t = 0.0
    cdef Py_ssize_t n, r = 0
    cdef bint bad = False
    with nogil:
        while r < n_rec and rec[r] == 0:
            out[r, 0] = ub; out[r, 1] = fb; out[r, 2] = su; out[r, 3] = suf; out[r, 4] = sf
            r += 1
        for n in range(n_steps):
            hn = hv[n]
            ku = su / rho
            kf = suf / rho
            innov = ub * hn - dyv[n]
            decay = exp(-k2 * hn)
            weight = -expm1(-k2 * hn) / k2
            ub_new = decay * ub + weight * (fb - ku * innov / hn)
            fb = fb - kf * innov
            ub = ub_new
            _riccati_rk4(&su, &suf, &sf, k2, gamma, rho, hn)
            t += hn
            if su < 0.0 or sf < 0.0:
                if su < -NEG_TOL or sf < -NEG_TOL:
                    bad = True
                    break
                if su < 0.0:
                    su = 0.0
                if sf < 0.0:
                    sf = 0.0
            while r < n_rec and rec[r] == n + 1:
                out[r, 0] = ub; out[r, 1] = fb; out[r, 2] = su; out[r, 3] = suf; out[r, 4] = sf
                r += 1
    if bad:
        raise InstabilityError(f"negative posterior variance at t = {t:.6g}", t=t)
    return out_arr


def stationary_path(double k2, double rho, double sigma_f0, h, dy, record):
    cdef double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef double[::1] dyv = np.ascontiguousarray(dy, dtype=np.float64)
    cdef long long[::1] rec = np.ascontiguousarray(record, dtype=np.int64)
    cdef Py_ssize_t n_steps = hv.shape[0]
    cdef Py_ssize_t n_rec = rec.shape[0]
    out_arr = np.empty((n_rec, 2), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double a = 1.0 / (rho * k2 * k2)
    cdef double fb = 0.0, sf = sigma_f0, hn, kf, s1, s2, s3, s4
    cdef Py_ssize_t n, r = 0
    with nogil:
        while r < n_rec and rec[r] == 0:
            out[r, 0] = fb; out[r, 1] = sf
            r += 1
        for n in range(n_steps):
            hn = hv[n]
            kf = sf / (rho * k2)
            fb = fb - kf * (fb * hn / k2 - dyv[n])
            s1 = -a * sf * sf
            s2 = -a * (sf + 0.5 * hn * s1) * (sf + 0.5 * hn * s1)
            s3 = -a * (sf + 0.5 * hn * s2) * (sf + 0.5 * hn * s2)
            s4 = -a * (sf + hn * s3) * (sf + hn * s3)
            sf = sf + hn / 6.0 * (s1 + 2.0 * s2 + 2.0 * s3 + s4)
            while r < n_rec and rec[r] == n + 1:
                out[r, 0] = fb; out[r, 1] = sf
                r += 1
    return out_arr


def ou_path(a, b, c, xi, double u0):
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef double[::1] xv = np.ascontiguousarray(xi, dtype=np.float64)
    cdef Py_ssize_t n, n_steps = av.shape[0]
    u_arr = np.empty(n_steps + 1, dtype=np.float64)
    cdef double[::1] u = u_arr
    cdef double x = u0
    u[0] = u0
    with nogil:
        for n in range(n_steps):
            x = av[n] * x + bv[n] + cv[n] * xv[n]
            u[n + 1] = x
    return u_arr
