"""Pure-Python implementations of the time-stepping kernels.

This module mirrors ``_ckernels.pyx`` function by function and is used when
the compiled extension is unavailable. Both must produce the same numbers up
to floating-point reassociation.

Moment state layout (9 components)::

    0 sigma_u   1 sigma_uf   2 sigma_f
    3 mu        4 m_u        5 m_f
    6 p_u       7 p_uf       8 p_f
"""

import math

import numpy as np

from heatdrift.errors import InstabilityError

NEG_TOL = 1e-12
N_MOMENTS = 9
# Linear-part class of each moment component: 0 none, 1 -k^2,
# 2 -(k^2 + ku0), 3 -2 (k^2 + ku0).
LINEAR_CLASS = (3, 2, 0, 1, 2, 0, 3, 2, 0)
NONNEG = (0, 2, 6, 8)


def phi123(z):
    """Return ``(phi1, phi2, phi3)`` at ``z``, using a series near zero."""
    if abs(z) < 1.0:
        # phi_j(z) = sum_n z^n / (n + j)!
        t1, t2, t3 = 1.0, 0.5, 1.0 / 6.0
        p1 = p2 = p3 = 0.0
        for n in range(20):
            p1 += t1
            p2 += t2
            p3 += t3
            t1 *= z / (n + 2)
            t2 *= z / (n + 3)
            t3 *= z / (n + 4)
        return p1, p2, p3
    ez = math.exp(z)
    p1 = (ez - 1.0) / z
    p2 = (ez - 1.0 - z) / (z * z)
    p3 = (ez - 1.0 - z - 0.5 * z * z) / (z * z * z)
    return p1, p2, p3


def exprk_coefficients(rate, h):
    """Weights of the 5-stage exponential Runge-Kutta scheme of stiff order 4.

    Hochbruck & Ostermann's method for ``y' = rate*y + N(y)``, with stage
    nodes ``(0, 1/2, 1/2, 1, 1/2)``. Returns
    ``(E, E2, a21, a31, a32, a41, a42, a51, a52, a54, b1, b4, b5)`` where the
    ``a``/``b`` weights already include the factor ``h``.
    """
    z = rate * h
    p1, p2, p3 = phi123(z)
    q1, q2, q3 = phi123(0.5 * z)
    a52 = 0.5 * q2 - p3 + 0.25 * p2 - 0.5 * q3
    a54 = 0.25 * q2 - a52
    coef = (
        0.5 * q1,
        0.5 * q1 - q2,
        q2,
        p1 - 2.0 * p2,
        p2,
        0.5 * q1 - 2.0 * a52 - a54,
        a52,
        a54,
        p1 - 3.0 * p2 + 4.0 * p3,
        -p2 + 4.0 * p3,
        4.0 * p2 - 8.0 * p3,
    )
    return (math.exp(z), math.exp(0.5 * z)) + tuple(h * c for c in coef)


def moment_nonlinear(y, gamma, rho, fstar, ku0):
    """Remainder of the moment system after the frozen linear part.

    The linear part integrated exactly is ``-m_i (k^2 + ku0) y_i`` for the
    filter-damped components and ``-k^2 mu`` for the signal mean, where
    ``ku0 = sigma_u / rho`` is frozen at the start of the step. The remainder
    returned here adds ``m_i ku0 y_i`` back so the full right-hand side is
    unchanged.
    """
    su, suf, sf, mu, mu_, mf, pu, puf, pf = y
    ku = su / rho
    kf = suf / rho
    innov = mu_ - mu
    return [
        2.0 * suf + gamma - su * su / rho + 2.0 * ku0 * su,
        sf - su * suf / rho + ku0 * suf,
        -suf * suf / rho,
        fstar,
        mf - ku * innov + ku0 * mu_,
        -kf * innov,
        2.0 * puf + gamma - 2.0 * ku * pu + rho * ku * ku + 2.0 * ku0 * pu,
        pf - ku * puf - kf * pu + rho * ku * kf + ku0 * puf,
        -2.0 * kf * puf + rho * kf * kf,
    ]


def _check_nonneg(y, t):
    for i in NONNEG:
        if y[i] < 0.0:
            if y[i] < -NEG_TOL:
                raise InstabilityError(
                    f"variance component {i} = {y[i]:.3e} < 0 at t = {t:.6g}; step too large", t=t
                )
            y[i] = 0.0


def _next_step(t, t_target, h_min, h_max, growth):
    h = growth * t
    if h < h_min:
        h = h_min
    if h > h_max:
        h = h_max
    if t + h * (1.0 + 1e-9) >= t_target:
        h = t_target - t
    return h


def integrate_moments(k2, gamma, rho, fstar, sigma_f0, t_out, h_min, h_max, growth):
    """Integrate the 9-component moment system with an exponential integrator.

    The stiff linear part (see ``moment_nonlinear``) is integrated exactly and
    the remainder by the stiff-order-4 scheme of ``exprk_coefficients``.

    The step is ``clip(growth * t, h_min, h_max)``, shortened to land on every
    requested output time. Initial state: all zero except ``sigma_f = sigma_f0``.

    Returns an array of shape ``(len(t_out), 9)``.
    """
    t_out = np.asarray(t_out, dtype=float)
    out = np.empty((len(t_out), N_MOMENTS))
    y = [0.0] * N_MOMENTS
    y[2] = sigma_f0
    t = 0.0
    rng9 = range(N_MOMENTS)
    for j, t_target in enumerate(t_out):
        while t < t_target:
            h = _next_step(t, t_target, h_min, h_max, growth)
            ku0 = y[0] / rho
            rates = (0.0, -k2, -(k2 + ku0), -2.0 * (k2 + ku0))
            coef = [exprk_coefficients(r, h) for r in rates]
            cs = [coef[LINEAR_CLASS[i]] for i in rng9]
            n1 = moment_nonlinear(y, gamma, rho, fstar, ku0)
            u2 = [cs[i][1] * y[i] + cs[i][2] * n1[i] for i in rng9]
            n2 = moment_nonlinear(u2, gamma, rho, fstar, ku0)
            u3 = [cs[i][1] * y[i] + cs[i][3] * n1[i] + cs[i][4] * n2[i] for i in rng9]
            n3 = moment_nonlinear(u3, gamma, rho, fstar, ku0)
            u4 = [cs[i][0] * y[i] + cs[i][5] * n1[i] + cs[i][6] * (n2[i] + n3[i]) for i in rng9]
            n4 = moment_nonlinear(u4, gamma, rho, fstar, ku0)
            u5 = [
                cs[i][1] * y[i] + cs[i][7] * n1[i] + cs[i][8] * (n2[i] + n3[i]) + cs[i][9] * n4[i]
                for i in rng9
            ]
            n5 = moment_nonlinear(u5, gamma, rho, fstar, ku0)
            y = [cs[i][0] * y[i] + cs[i][10] * n1[i] + cs[i][11] * n4[i] + cs[i][12] * n5[i] for i in rng9]
            t += h
            _check_nonneg(y, t)
        out[j] = y
    return out


def _stationary_rhs(y, a, fstar):
    s, m, p = y
    return [-a * s * s, -a * s * (m - fstar), -2.0 * a * s * p + a * s * s]


def integrate_stationary(k2, rho, fstar, sigma_f0, t_out, h_min, h_max, growth):
    """Classical RK4 for the stationary drift problem ``(sigma_f, m_f, p_f)``.

    Returns an array of shape ``(len(t_out), 3)``.
    """
    t_out = np.asarray(t_out, dtype=float)
    out = np.empty((len(t_out), 3))
    a = 1.0 / (rho * k2 * k2)
    y = [sigma_f0, 0.0, 0.0]
    t = 0.0
    for j, t_target in enumerate(t_out):
        while t < t_target:
            h = _next_step(t, t_target, h_min, h_max, growth)
            k1 = _stationary_rhs(y, a, fstar)
            k2_ = _stationary_rhs([y[i] + 0.5 * h * k1[i] for i in range(3)], a, fstar)
            k3 = _stationary_rhs([y[i] + 0.5 * h * k2_[i] for i in range(3)], a, fstar)
            k4 = _stationary_rhs([y[i] + h * k3[i] for i in range(3)], a, fstar)
            y = [y[i] + h / 6.0 * (k1[i] + 2.0 * k2_[i] + 2.0 * k3[i] + k4[i]) for i in range(3)]
            t += h
            if y[0] < 0.0 or y[2] < 0.0:
                if min(y[0], y[2]) < -NEG_TOL:
                    raise InstabilityError(f"negative variance at t = {t:.6g}", t=t)
                y[0] = max(y[0], 0.0)
                y[2] = max(y[2], 0.0)
        out[j] = y
    return out


def _riccati(su, suf, sf, k2, gamma, rho):
    return (
        -2.0 * k2 * su + 2.0 * suf + gamma - su * su / rho,
        -k2 * suf + sf - su * suf / rho,
        -suf * suf / rho,
    )


def riccati_rk4(su, suf, sf, k2, gamma, rho, h):
    """One classical RK4 step of the posterior covariance equations."""
    a1, b1, c1 = _riccati(su, suf, sf, k2, gamma, rho)
    a2, b2, c2 = _riccati(su + 0.5 * h * a1, suf + 0.5 * h * b1, sf + 0.5 * h * c1, k2, gamma, rho)
    a3, b3, c3 = _riccati(su + 0.5 * h * a2, suf + 0.5 * h * b2, sf + 0.5 * h * c2, k2, gamma, rho)
    a4, b4, c4 = _riccati(su + h * a3, suf + h * b3, sf + h * c3, k2, gamma, rho)
    return (
        su + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        suf + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
        sf + h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4),
    )


def filter_path(k2, gamma, rho, sigma_f0, h, dy, record):
    """Run the extended-state Kalman-Bucy filter along one observation path.

    Parameters
    ----------
    h, dy : array, shape (n,)
        Step sizes and observation increments.
    record : int array
        Sorted step indices in ``[0, n]`` at which the state is stored.

    Returns
    -------
    array, shape (len(record), 5)
        Columns ``ubar, fbar, sigma_u, sigma_uf, sigma_f``.
    """
    h = np.asarray(h, dtype=float)
    dy = np.asarray(dy, dtype=float)
    record = np.asarray(record, dtype=np.int64)
    out = np.empty((len(record), 5))
    ub = fb = 0.0
    su = suf = 0.0
    sf = float(sigma_f0)
    r = 0
    n_rec = len(record)
    while r < n_rec and record[r] == 0:
        out[r] = (ub, fb, su, suf, sf)
        r += 1
    for n in range(len(h)):
        hn = h[n]
        ku = su / rho
        kf = suf / rho
        innov = ub * hn - dy[n]
        decay = math.exp(-k2 * hn)
        weight = -math.expm1(-k2 * hn) / k2
        ub_new = decay * ub + weight * (fb - ku * innov / hn)
        fb = fb - kf * innov
        ub = ub_new
        su, suf, sf = riccati_rk4(su, suf, sf, k2, gamma, rho, hn)
        if su < 0.0 or sf < 0.0:
            if min(su, sf) < -NEG_TOL:
                raise InstabilityError(f"negative posterior variance at step {n + 1}", t=float(np.sum(h[: n + 1])))
            su = max(su, 0.0)
            sf = max(sf, 0.0)
        while r < n_rec and record[r] == n + 1:
            out[r] = (ub, fb, su, suf, sf)
            r += 1
    return out


def stationary_path(k2, rho, sigma_f0, h, dy, record):
    """Drift-only filter along one path; columns ``fbar, sigma_f``."""
    h = np.asarray(h, dtype=float)
    dy = np.asarray(dy, dtype=float)
    record = np.asarray(record, dtype=np.int64)
    out = np.empty((len(record), 2))
    a = 1.0 / (rho * k2 * k2)
    fb = 0.0
    sf = float(sigma_f0)
    r = 0
    n_rec = len(record)
    while r < n_rec and record[r] == 0:
        out[r] = (fb, sf)
        r += 1
    for n in range(len(h)):
        hn = h[n]
        kf = sf / (rho * k2)
        fb = fb - kf * (fb * hn / k2 - dy[n])
        s1 = -a * sf * sf
        s2 = -a * (sf + 0.5 * hn * s1) ** 2
        s3 = -a * (sf + 0.5 * hn * s2) ** 2
        s4 = -a * (sf + hn * s3) ** 2
        sf = sf + hn / 6.0 * (s1 + 2.0 * s2 + 2.0 * s3 + s4)
        while r < n_rec and record[r] == n + 1:
            out[r] = (fb, sf)
            r += 1
    return out


def ou_path(a, b, c, xi, u0):
    """Linear recursion ``u[n+1] = a[n] u[n] + b[n] + c[n] xi[n]``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    xi = np.asarray(xi, dtype=float)
    u = np.empty(len(a) + 1)
    u[0] = u0
    x = float(u0)
    for n in range(len(a)):
        x = a[n] * x + b[n] + c[n] * xi[n]
        u[n + 1] = x
    return u
