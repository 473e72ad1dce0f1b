"""Drift-only inference problem ``dY = k^-2 F dt + sqrt(rho) dV``.

Its posterior variance, data-averaged mean and estimator variance all have
closed forms, which makes it the main oracle for the dynamic filter.
"""

from dataclasses import dataclass
import math

import numpy as np

from heatdrift import rng
from heatdrift._backend import kernels
from heatdrift.errors import ParameterError
from heatdrift.filter_core import record_indices
from heatdrift.io import ModeTrace
from heatdrift.simulator import ModeTruthPath, check_grid
from heatdrift.spectral import prior_variance, truth_from_config


@dataclass(frozen=True)
class StationaryState:
    fbar: float
    sigma_f: float
    m_f: float
    p_f: float


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def sigma_f_closed(t, k, alpha, rho):
    s0 = prior_variance(k, alpha)
    t = np.asarray(t, dtype=float)
    return _scalar(s0 / (s0 * t / (rho * float(k) ** 4) + 1.0))


def mean_bias_closed(t, k, alpha, rho, F_star):
    """Data-averaged posterior mean ``F (1 - sigma_f / sigma_0)``."""
    s0 = prior_variance(k, alpha)
    x = s0 * np.asarray(t, dtype=float) / (rho * float(k) ** 4)
    return _scalar(F_star * x / (1.0 + x))


def p_f_closed(t, k, alpha, rho):
    s0 = prior_variance(k, alpha)
    t = np.asarray(t, dtype=float)
    a = rho * float(k) ** 4
    return _scalar(a * s0 * s0 * t / (a + s0 * t) ** 2)


def stationary_closed_trace(k, config, t_out, F_star=None):
    if F_star is None:
        F_star = truth_from_config(config, k)[k]
    t = np.asarray(t_out, dtype=float)
    sf = sigma_f_closed(t, k, config.alpha, config.rho)
    cols = {
        "sigma_f": sf,
        "k_f": sf / (config.rho * float(k) ** 2),
        "m_f": mean_bias_closed(t, k, config.alpha, config.rho, F_star),
        "p_f": p_f_closed(t, k, config.alpha, config.rho),
    }
    cols["fbar"] = cols["m_f"]
    return ModeTrace(k=int(k), t=t, variant="stationary", columns=cols)


def stationary_trace(k, config, t_out, F_star=None):
    """Integrate ``(sigma_f, m_f, p_f)`` numerically with RK4.

    ``fbar`` holds the data-averaged mean ``m_f``; ``k_f`` is the drift gain
    ``sigma_f / (rho k^2)`` of this problem.
    """
    if F_star is None:
        F_star = truth_from_config(config, k)[k]
    t = np.asarray(t_out, dtype=float)
    y = kernels.integrate_stationary(
        float(k) ** 2,
        config.rho,
        float(F_star),
        prior_variance(k, config.alpha),
        t,
        config.step(k),
        math.inf,
        config.step_growth,
    )
    cols = {"sigma_f": y[:, 0], "m_f": y[:, 1], "p_f": y[:, 2]}
    cols["fbar"] = cols["m_f"]
    cols["k_f"] = cols["sigma_f"] / (config.rho * float(k) ** 2)
    return ModeTrace(k=int(k), t=t, variant="stationary", columns=cols)


def simulate_stationary(k, F_star_k, rho, t_grid, seed):
    """Observation increments ``k^-2 F h + sqrt(rho h) eta``; ``u`` is all zero."""
    t, h = check_grid(t_grid)
    eta = rng.stream(seed, rng.OBS_NOISE, k).standard_normal(len(h))
    dy = F_star_k * h / float(k) ** 2 + np.sqrt(rho * h) * eta
    return ModeTruthPath(k=int(k), t=t, u=np.zeros(len(t)), dy=dy)


def run_stationary_filter(k, observations, config, t_out=None):
    if observations.k != k:
        raise ParameterError(f"observations are for mode {observations.k}, not {k}")
    t, h = check_grid(observations.t)
    if len(observations.dy) != len(h):
        raise ParameterError("observation increments do not match the grid")
    rec = np.arange(len(t)) if t_out is None else record_indices(t, t_out)
    out = kernels.stationary_path(float(k) ** 2, config.rho, prior_variance(k, config.alpha), h, observations.dy, rec)
    cols = {"fbar": out[:, 0], "sigma_f": out[:, 1]}
    cols["k_f"] = cols["sigma_f"] / (config.rho * float(k) ** 2)
    return ModeTrace(k=int(k), t=t[rec], variant="stationary", columns=cols)


def variance_sum(t, alpha, rho, K):
    """``sum_{k<=K} sigma_f(k)`` from the closed form, for each ``t``."""
    k = np.arange(1, int(K) + 1, dtype=float)
    s0 = k ** (-2.0 * alpha - 1.0)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.array([np.sum(s0 / (s0 * ti / (rho * k**4) + 1.0)) for ti in t])
