"""Reduced models of the covariance and bias dynamics.

For large ``k`` (``eps = k^-2`` small) the state variance and cross
covariance are slaved to the drift variance; for small ``k`` they settle to
the quasi-equilibrium constants ``C0`` and ``C1``.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np

from heatdrift.io import ModeTrace
from heatdrift.spectral import prior_variance, truth_from_config
from heatdrift.stationary import p_f_closed

K_STAR = 4


class ApplicabilityWarning(UserWarning):
    """A large-``k`` approximation was requested for a mode below ``k*``."""


@dataclass(frozen=True)
class SmallKConstants:
    C0: float
    C1: float


@dataclass(frozen=True)
class ReducedState:
    sigma_f_red: float
    m_f_red: float
    epsilon: float
    kappa: float


def reduced_sigma_f(t, k, alpha, rho):
    eps = float(k) ** -2
    s0 = prior_variance(k, alpha)
    t = np.asarray(t, dtype=float)
    out = rho * s0 / (eps * eps * s0 * t + rho)
    return float(out) if out.ndim == 0 else out


def reduced_bias(t, k, alpha, rho, F_star):
    """Reduced data-averaged drift mean ``(1 - sigma_f / sigma_0) F``."""
    s0 = prior_variance(k, alpha)
    return (1.0 - reduced_sigma_f(t, k, alpha, rho) / s0) * F_star


def small_k_constants(gamma, rho):
    C0 = -rho + math.sqrt(rho * rho + rho * gamma)
    return SmallKConstants(C0=C0, C1=1.0 / (1.0 + C0 / rho))


def small_k_sigma_f(t, k, alpha, gamma, rho):
    """Drift variance under the small-``k`` reduced gain ``C1^2 sigma_f / rho``."""
    c1 = small_k_constants(gamma, rho).C1
    s0 = prior_variance(k, alpha)
    t = np.asarray(t, dtype=float)
    out = s0 / (1.0 + c1 * c1 * s0 * t / rho)
    return float(out) if out.ndim == 0 else out


def reduced_state(t, k, alpha, rho, F_star):
    eps = float(k) ** -2
    sf = reduced_sigma_f(t, k, alpha, rho)
    return ReducedState(sf, reduced_bias(t, k, alpha, rho, F_star), eps, eps * eps * sf / rho)


def slow_manifold_covariance(sigma_f, k, gamma):
    """First-order slow-manifold point ``(eps gamma / 2, eps sigma_f)``."""
    eps = float(k) ** -2
    if np.ndim(sigma_f):
        return eps * gamma / 2.0, eps * np.asarray(sigma_f, dtype=float)
    return eps * gamma / 2.0, eps * float(sigma_f)


def _fast_forcing(x_u, x_uf, y, gamma, rho):
    # f(x, y) with the fast linear part A = diag(2, 1) split off (times 1/eps).
    return 2.0 * x_uf + gamma - x_u * x_u / rho, y - x_u * x_uf / rho


def slow_manifold_second_order(y, dy_dt, k, gamma, rho, k_star=K_STAR):
    """Second-order slow-manifold approximation of ``(sigma_u, sigma_uf)``.

    With ``x = (sigma_u, sigma_uf)``, ``y = sigma_f`` and the fast system
    ``eps x' = -A x + eps f(x, y)``, ``A = diag(2, 1)``, the correction is
    ``eps A^-1 f(x1, y) + eps^2 A^-2 D_y f(0, y) y'``. Since ``D_y f = (0, 1)``
    only the cross covariance picks up the ``y'`` term.
    """
    if k < k_star:
        warnings.warn(
            f"slow-manifold expansion used at k={k} < k*={k_star}; eps={float(k) ** -2:.3g} is not small",
            ApplicabilityWarning,
            stacklevel=2,
        )
    eps = float(k) ** -2
    y = np.asarray(y, dtype=float)
    dy_dt = np.asarray(dy_dt, dtype=float)
    x1_u = eps * gamma / 2.0
    x1_uf = eps * y
    f_u, f_uf = _fast_forcing(x1_u, x1_uf, y, gamma, rho)
    su = eps * f_u / 2.0
    suf = eps * f_uf + eps * eps * dy_dt
    if su.ndim == 0:
        return float(su), float(suf)
    return su, suf


def reduced_trace(k, config, t_out, F_star=None):
    """``reduced`` ModeTrace: closed-form drift variance and bias, slaved covariances."""
    if F_star is None:
        F_star = truth_from_config(config, k)[k]
    t = np.asarray(t_out, dtype=float)
    eps = float(k) ** -2
    sf = reduced_sigma_f(t, k, config.alpha, config.rho)
    su = np.full_like(t, eps * config.gamma / 2.0)
    suf = eps * sf
    cols = {
        "sigma_u": su,
        "sigma_uf": suf,
        "sigma_f": sf,
        "k_u": su / config.rho,
        "k_f": suf / config.rho,
        "m_f": reduced_bias(t, k, config.alpha, config.rho, F_star),
        "p_f": p_f_closed(t, k, config.alpha, config.rho),
    }
    cols["fbar"] = cols["m_f"]
    return ModeTrace(k=int(k), t=t, variant="reduced", columns=cols)
