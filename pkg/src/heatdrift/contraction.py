"""Posterior contraction: per-mode radii, the l2 total with tail control, rate fits."""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import ndtr
from scipy.stats import norm

from heatdrift.errors import FitError, ParameterError, TruncationError
from heatdrift.frequentist import integrate_moment_system, monte_carlo_fbar
from heatdrift.slow_manifold import K_STAR
from heatdrift.spectral import make_truth


@dataclass
class ContractionTrace:
    t: np.ndarray
    phi_sq_total: np.ndarray
    K_used: np.ndarray
    tail_bound: np.ndarray
    sigma_sum: np.ndarray
    p_sum: np.ndarray
    bias_sq_sum: np.ndarray
    slope_running: np.ndarray = None
    slope: float = math.nan
    window: tuple = (math.nan, math.nan)


def phi_sq_mode(sigma_f, p_f, m_f, F_star):
    return sigma_f + p_f + (m_f - F_star) ** 2


def theoretical_exponent(alpha, beta):
    return -2.0 * min(alpha, beta) / (2.0 * alpha + 5.0)


def variance_exponent(alpha):
    return -2.0 * alpha / (2.0 * alpha + 5.0)


def bias_exponent(alpha, beta):
    return -2.0 * beta / (2.0 * alpha + 5.0)


def closed_form_components(t, k, alpha, rho, F_star):
    """``(sigma_f, p_f, bias^2)`` of the drift-only closed forms, broadcast over ``t`` and ``k``."""
    k = np.asarray(k, dtype=float)
    s0 = k ** (-2.0 * alpha - 1.0)
    a = rho * k**4
    x = s0 * t / a
    sf = s0 / (1.0 + x)
    pf = a * s0 * s0 * t / (a + s0 * t) ** 2
    bias = F_star / (1.0 + x)
    return sf, pf, bias * bias


def tail_bound(K, alpha, beta, delta, c_bar):
    """Integral-test bound on ``sum_{k>K} phi_t(k)^2``, valid for every ``t``.

    Uses ``sigma_f + p_f <= 2 sigma_0`` and ``|bias| <= |F*|``.
    """
    K = float(K)
    s_bias = 2.0 * beta + 2.0 * delta
    return K ** (-2.0 * alpha) / alpha + c_bar**2 * K ** (-s_bias) / s_bias


def choose_K(partial_sum, config, c_bar, rtol, K_limit):
    """Smallest power of two ``K`` (capped at ``K_limit``) with ``tail_bound <= rtol * partial_sum(K)``."""
    K = 1
    while True:
        tb = tail_bound(K, config.alpha, config.beta, config.delta, c_bar)
        if tb <= rtol * partial_sum(K):
            return K, tb
        if K >= K_limit:
            raise TruncationError(
                f"tail bound {tb:.3e} exceeds rtol={rtol} x partial sum "
                f"{partial_sum(K):.3e} at K={K} (limit {K_limit}); raise k_max"
            )
        K = min(2 * K, K_limit)


def phi_sq_total(t, config, rtol=1e-3, K_limit=None, dynamic_upto=0):
    """Truncated l2 contraction radius with an analytic tail bound.

    Parameters
    ----------
    t : array of times
    config : ModelConfig
        ``k_max`` caps the truncation unless ``K_limit`` is given.
    rtol : float
        Required ratio of tail bound to partial sum.
    dynamic_upto : int
        Modes ``k <= dynamic_upto`` come from the full moment equations
        instead of the closed forms (``K_STAR`` gives the default split).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if not rtol > 0:
        raise ParameterError(f"rtol must be > 0, got {rtol}")
    K_limit = int(K_limit or config.k_max)
    # |c_k| <= 1 in both truth modes, so the tail bound may use c_bar = 1
    # without generating coefficients beyond the evaluated prefix.
    c_bar = 1.0
    n_eval = min(K_limit, 1024)
    F = make_truth(config.beta, config.delta, max(n_eval, dynamic_upto), config.truth_mode, config.seed).coeffs

    dyn = {}
    for k in range(1, min(dynamic_upto, K_limit) + 1):
        y = integrate_moment_system(k, config, t, F[k - 1])
        dyn[k] = (y[:, 2], y[:, 8], (y[:, 5] - F[k - 1]) ** 2)

    n = len(t)
    res = {name: np.empty(n) for name in ("total", "K", "tail", "s", "p", "b")}
    for i, ti in enumerate(t):
        while True:
            ks = np.arange(1, n_eval + 1, dtype=float)
            sf, pf, b2 = closed_form_components(ti, ks, config.alpha, config.rho, F[:n_eval])
            for k, (dsf, dpf, db2) in dyn.items():
                sf[k - 1], pf[k - 1], b2[k - 1] = dsf[i], dpf[i], db2[i]
            cums = np.cumsum(sf + pf + b2)
            try:
                K, tb = choose_K(lambda K: cums[K - 1], config, c_bar, rtol, n_eval)
                break
            except TruncationError:
                if n_eval >= K_limit:
                    raise
                n_eval = min(4 * n_eval, K_limit)
                F = make_truth(config.beta, config.delta, n_eval, config.truth_mode, config.seed).coeffs
        res["total"][i] = cums[K - 1]
        res["K"][i] = K
        res["tail"][i] = tb
        res["s"][i] = np.sum(sf[:K])
        res["p"][i] = np.sum(pf[:K])
        res["b"][i] = np.sum(b2[:K])
    return ContractionTrace(
        t=t,
        phi_sq_total=res["total"],
        K_used=res["K"].astype(np.int64),
        tail_bound=res["tail"],
        sigma_sum=res["s"],
        p_sum=res["p"],
        bias_sq_sum=res["b"],
    )


def fit_rate(t, values, window=None, min_decades=3.0):
    """Least-squares slope of ``log values`` against ``log t`` inside ``window``."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window if window is not None else (t[t > 0].min(), t.max())
    mask = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12)) & (t > 0) & (values > 0)
    if mask.sum() < 3:
        raise FitError(f"fewer than 3 usable points in window [{lo:g}, {hi:g}]")
    lt, lv = np.log10(t[mask]), np.log10(values[mask])
    span = lt.max() - lt.min()
    if span < min_decades - 1e-9:
        raise FitError(f"fit window spans {span:.2f} decades, need {min_decades}")
    slope, _ = np.polyfit(lt, lv, 1)
    return float(slope)


def running_slope(t, values, decades=1.0):
    """Slope over the trailing ``decades`` ending at each point; ``nan`` where too short."""
    t = np.asarray(t, dtype=float)
    out = np.full(len(t), np.nan)
    for i in range(len(t)):
        if t[i] <= 0:
            continue
        lo = t[i] / 10**decades
        if t[0] > lo * (1 + 1e-12):
            continue
        try:
            out[i] = fit_rate(t[: i + 1], values[: i + 1], (lo, t[i]), min_decades=decades)
        except FitError:
            pass
    return out


def default_schedule(t):
    return np.log(np.e + np.asarray(t, dtype=float))


def phi_mode_closed(t, k, config, F_star):
    sf, pf, b2 = closed_form_components(np.asarray(t, dtype=float), k, config.alpha, config.rho, F_star)
    return np.sqrt(sf + pf + b2)


def exceedance_probability(fbar, sigma_f, F_star, radius):
    """Gaussian posterior mass ``P(|F - F*| >= radius)`` for each posterior mean in ``fbar``."""
    sd = math.sqrt(sigma_f)
    if radius <= 0:
        return np.ones_like(fbar)
    if sd == 0:
        return (np.abs(fbar - F_star) >= radius).astype(float)
    d = fbar - F_star
    return ndtr((-radius - d) / sd) + ndtr((d - radius) / sd)


def wilson_interval(p, n, z=None):
    z = norm.ppf(0.975) if z is None else z
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return centre - half, centre + half


def contraction_mc_check(k, config, t_eval, replicas, schedule=default_schedule, F_star=None):
    """Average posterior exceedance probability of the ball of radius ``M_t phi_t(k)``.

    Returns a dict with ``t``, ``prob`` (path average), ``lo``/``hi`` (Wilson
    95% bounds) and ``radius``.
    """
    if F_star is None:
        F_star = make_truth(config.beta, config.delta, k, config.truth_mode, config.seed)[k]
    t_eval = np.asarray(t_eval, dtype=float)
    mc = monte_carlo_fbar(k, config, t_eval, replicas, F_star=F_star, keep=True)
    phi = phi_mode_closed(t_eval, k, config, F_star)
    M = np.asarray(schedule(t_eval), dtype=float) * np.ones_like(t_eval)
    prob = np.empty(len(t_eval))
    lo = np.empty(len(t_eval))
    hi = np.empty(len(t_eval))
    for i in range(len(t_eval)):
        prob[i] = exceedance_probability(mc["fbar"][i], mc["sigma_f"][i], F_star, M[i] * phi[i]).mean()
        lo[i], hi[i] = wilson_interval(prob[i], replicas)
    return {"t": t_eval, "prob": prob, "lo": lo, "hi": hi, "radius": M * phi}


def regime_split_total(t, config, rtol=1e-3, k_star=K_STAR, K_limit=None):
    """Total radius with full moment equations for ``k <= k_star``, closed forms above."""
    return phi_sq_total(t, config, rtol=rtol, K_limit=K_limit, dynamic_upto=k_star)
