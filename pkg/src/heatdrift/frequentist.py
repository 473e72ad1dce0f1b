"""Data-averaged behaviour of the filter: bias, estimator variance, Lyapunov check.

The posterior covariance, the bias system and the frequentist covariance are
integrated as one 9-component system so that the gains entering the last two
are evaluated consistently inside every stage of the integrator.
"""

from dataclasses import dataclass
import math

import numpy as np

from heatdrift._backend import kernels
from heatdrift.errors import ParameterError
from heatdrift.io import ModeTrace
from heatdrift.simulator import PathBatch
from heatdrift.spectral import prior_variance, truth_from_config

MOMENT_NAMES = ("sigma_u", "sigma_uf", "sigma_f", "mu", "m_u", "m_f", "p_u", "p_uf", "p_f")


@dataclass(frozen=True)
class FrequentistMoments:
    mu: float
    m_u: float
    m_f: float
    p_u: float
    p_uf: float
    p_f: float


@dataclass(frozen=True)
class DeltaP:
    d_u: float
    d_uf: float
    d_f: float

    @classmethod
    def between(cls, fm, pm):
        """Difference between frequentist and posterior covariances."""
        return cls(fm.p_u - pm.sigma_u, fm.p_uf - pm.sigma_uf, fm.p_f - pm.sigma_f)


def bias_rhs(fm, gains, F_star, k):
    """Derivatives of ``(mu, m_u, m_f)``."""
    e = float(k) ** 2
    innov = fm.m_u - fm.mu
    return (
        -e * fm.mu + F_star,
        -e * fm.m_u + fm.m_f - gains.k_u * innov,
        -gains.k_f * innov,
    )


def freq_cov_rhs(fm, gains, k, gamma, rho):
    """Derivatives of ``(p_u, p_uf, p_f)``; linear in ``p`` for given gains."""
    e = float(k) ** 2
    ku, kf = gains.k_u, gains.k_f
    return (
        -2.0 * e * fm.p_u + 2.0 * fm.p_uf + gamma - 2.0 * ku * fm.p_u + rho * ku * ku,
        -e * fm.p_uf + fm.p_f - ku * fm.p_uf - kf * fm.p_u + rho * ku * kf,
        -2.0 * kf * fm.p_uf + rho * kf * kf,
    )


def lyapunov(delta, k_f):
    """``V = d_f^2/2 + K_f d_uf^2 + K_f^2 d_u^2 / 2``. Works elementwise on arrays."""
    return 0.5 * delta.d_f**2 + k_f * delta.d_uf**2 + 0.5 * k_f**2 * delta.d_u**2


def integrate_moment_system(k, config, t_out, F_star, sigma_f0=None):
    """Integrate the joint covariance/bias/frequentist system of mode ``k``.

    Returns an array of shape ``(len(t_out), 9)`` ordered as ``MOMENT_NAMES``.
    """
    t_out = np.asarray(t_out, dtype=float)
    if t_out.ndim != 1 or np.any(np.diff(t_out) < 0) or (len(t_out) and t_out[0] < 0):
        raise ParameterError("output times must be nonnegative and nondecreasing")
    if sigma_f0 is None:
        sigma_f0 = prior_variance(k, config.alpha)
    return kernels.integrate_moments(
        float(k) ** 2,
        config.gamma,
        config.rho,
        float(F_star),
        float(sigma_f0),
        t_out,
        config.step(k),
        math.inf,
        config.step_growth,
    )


def moment_trace(k, config, t_out, F_star=None, sigma_f0=None):
    """``dynamic`` ModeTrace with posterior, bias, frequentist columns and ``V``.

    ``ubar`` and ``fbar`` hold the data-averaged posterior means ``m_u`` and
    ``m_f`` since no observation path is involved.
    """
    if F_star is None:
        F_star = truth_from_config(config, max(k, 1))[k]
    y = integrate_moment_system(k, config, t_out, F_star, sigma_f0)
    cols = dict(zip(MOMENT_NAMES, y.T))
    cols["ubar"] = cols["m_u"]
    cols["fbar"] = cols["m_f"]
    cols["k_u"] = cols["sigma_u"] / config.rho
    cols["k_f"] = cols["sigma_uf"] / config.rho
    d = DeltaP(cols["p_u"] - cols["sigma_u"], cols["p_uf"] - cols["sigma_uf"], cols["p_f"] - cols["sigma_f"])
    cols["V"] = lyapunov(d, cols["k_f"])
    return ModeTrace(k=int(k), t=np.asarray(t_out, dtype=float), variant="dynamic", columns=cols)


def detect_t_star(t, k_f, tol=0.1):
    """First output time after which ``k_f * t`` stays within ``tol`` for a decade.

    Returns ``None`` when no such time exists inside the trace.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(k_f, dtype=float) * t
    for i in range(len(t)):
        if t[i] <= 0 or s[i] <= 0:
            continue
        j = np.searchsorted(t, 10.0 * t[i], side="right")
        if 10.0 * t[i] > t[-1] * (1 + 1e-12):
            return None
        window = s[i:j]
        if np.all(np.abs(window / s[i] - 1.0) <= tol):
            return float(t[i])
    return None


def lyapunov_increments(trace, t_star):
    """Increments ``V[n+1] - V[n]`` on the sampled grid for ``t[n] >= t_star``."""
    t = trace.t
    V = trace["V"]
    mask = t[:-1] >= t_star
    return np.diff(V)[mask]


def monte_carlo_fbar(k, config, t_eval, replicas, F_star=None, seed=None, stationary=False, keep=False):
    """Empirical distribution of the posterior drift mean over observation paths.

    Simulates ``replicas`` independent truth/observation paths on the fixed
    grid ``h = config.step(k)`` and filters them in lockstep. The covariance
    is shared by all replicas since it does not depend on the data.

    Returns a dict with ``t``, ``mean``, ``var``, ``se_mean``, ``se_var`` and
    ``sigma_f`` (the posterior variance at each time). With ``keep=True`` the
    raw ``fbar`` samples, shape ``(len(t_eval), replicas)``, are included.
    """
    if replicas < 2:
        raise ParameterError("need at least two replicas")
    t_eval = np.asarray(t_eval, dtype=float)
    h = config.step(k)
    steps = np.rint(t_eval / h).astype(np.int64)
    if np.any(np.abs(steps * h - t_eval) > 1e-9 * np.maximum(1.0, t_eval)) or np.any(np.diff(steps) <= 0):
        raise ParameterError(f"evaluation times must be increasing multiples of the step {h}")
    if F_star is None:
        F_star = truth_from_config(config, k)[k]
    seed = config.seed if seed is None else seed
    k2 = float(k) ** 2
    rho, gamma = config.rho, config.gamma
    batch = PathBatch(k, F_star, gamma, rho, replicas, seed, stationary=stationary)
    sf = prior_variance(k, config.alpha)
    su = suf = 0.0
    ub = np.zeros(replicas)
    fb = np.zeros(replicas)
    decay = math.exp(-k2 * h)
    weight = -math.expm1(-k2 * h) / k2
    a_st = 1.0 / (rho * k2 * k2)
    out = {name: np.empty(len(t_eval)) for name in ("mean", "var", "se_mean", "se_var", "sigma_f")}
    samples = np.empty((len(t_eval), replicas)) if keep else None
    j = 0
    for n in range(1, steps[-1] + 1):
        dy = batch.step(h)
        if stationary:
            kf = sf / (rho * k2)
            fb -= kf * (fb * h / k2 - dy)
            sf = _stationary_rk4(sf, a_st, h)
        else:
            ku, kf = su / rho, suf / rho
            innov = ub * h - dy
            ub = decay * ub + weight * (fb - ku * innov / h)
            fb = fb - kf * innov
            su, suf, sf = kernels.riccati_rk4(su, suf, sf, k2, gamma, rho, h)
        if n == steps[j]:
            mean = fb.mean()
            dev = fb - mean
            var = dev.var(ddof=1)
            m4 = np.mean(dev**4)
            out["mean"][j] = mean
            out["var"][j] = var
            out["se_mean"][j] = math.sqrt(var / replicas)
            out["se_var"][j] = math.sqrt(max(m4 - var * var, 0.0) / replicas)
            out["sigma_f"][j] = sf
            if keep:
                samples[j] = fb
            j += 1
    out["t"] = t_eval
    if keep:
        out["fbar"] = samples
    return out


def _stationary_rk4(s, a, h):
    s1 = -a * s * s
    s2 = -a * (s + 0.5 * h * s1) ** 2
    s3 = -a * (s + 0.5 * h * s2) ** 2
    s4 = -a * (s + h * s3) ** 2
    return s + h / 6.0 * (s1 + 2.0 * s2 + 2.0 * s3 + s4)
