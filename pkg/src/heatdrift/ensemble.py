"""Interacting-particle form of the mean-field Kalman-Bucy filter.

Gains and the innovation use empirical ensemble moments. The innovation is
the deterministic transport form ``(U_i + mean U) h / 2 - dY``; no perturbed
observations are drawn.
"""

from dataclasses import dataclass
import math

import numpy as np

from heatdrift import rng
from heatdrift.errors import ParameterError
from heatdrift.io import ENSEMBLE_COLUMNS, write_csv
from heatdrift.spectral import prior_variance


@dataclass
class Ensemble:
    U: np.ndarray
    F: np.ndarray
    k: int

    def __post_init__(self):
        if len(self.U) < 2 or len(self.U) != len(self.F):
            raise ParameterError("an ensemble needs N >= 2 particles with matching U and F")

    @property
    def N(self):
        return len(self.U)

    def moments(self):
        """``(mean_u, mean_f, var_u, cov_uf, var_f)`` with ``1/(N-1)`` normalisation."""
        mu, mf = self.U.mean(), self.F.mean()
        du, df = self.U - mu, self.F - mf
        n1 = self.N - 1
        return mu, mf, float(du @ du) / n1, float(du @ df) / n1, float(df @ df) / n1


def init_ensemble(N, k, alpha, seed):
    """``U_i = 0`` and ``F_i ~ N(0, k^(-2 alpha - 1))`` i.i.d."""
    if N < 2:
        raise ParameterError(f"ensemble size must be >= 2, got {N}")
    sd = math.sqrt(prior_variance(k, alpha))
    F = sd * rng.stream(seed, rng.ENSEMBLE_INIT, k).standard_normal(int(N))
    return Ensemble(U=np.zeros(int(N)), F=F, k=int(k))


def step_ensemble(e, dY, h, gamma, rho, noise):
    """One Euler-Maruyama step of the particle system.

    ``noise`` is a ``numpy.random.Generator`` supplying the model-noise
    increments, one per particle.
    """
    _, _, var_u, cov_uf, _ = e.moments()
    ku, kf = var_u / rho, cov_uf / rho
    ubar = e.U.mean()
    dI = 0.5 * (e.U + ubar) * h - dY
    dW = math.sqrt(h) * noise.standard_normal(e.N)
    U = e.U + (-(e.k**2) * e.U + e.F) * h + math.sqrt(gamma) * dW - ku * dI
    F = e.F - kf * dI
    return Ensemble(U=U, F=F, k=e.k)


def run_ensemble(k, config, N, dy, h, t_record, seed=None):
    """Drive an ensemble with observation increments ``dy`` on a uniform grid.

    ``t_record`` lists times (multiples of ``h``) at which moments are kept.
    Returns a dict of arrays keyed by the ensemble CSV column names.
    """
    seed = config.seed if seed is None else seed
    dy = np.asarray(dy, dtype=float)
    steps = np.rint(np.asarray(t_record, dtype=float) / h).astype(np.int64)
    if np.any(steps > len(dy)) or np.any(steps < 0) or np.any(np.diff(steps) <= 0):
        raise ParameterError("record times must be increasing and covered by the observations")
    e = init_ensemble(N, k, config.alpha, seed)
    noise = rng.stream(seed, rng.ENSEMBLE_NOISE, k)
    rows = np.empty((len(steps), 5))
    j = 0
    while j < len(steps) and steps[j] == 0:
        rows[j] = e.moments()
        j += 1
    for n in range(1, steps[-1] + 1 if len(steps) else 0):
        e = step_ensemble(e, dy[n - 1], h, config.gamma, config.rho, noise)
        if n == steps[j]:
            rows[j] = e.moments()
            j += 1
    out = {name: rows[:, i] for i, name in enumerate(ENSEMBLE_COLUMNS[3:])}
    out["k"] = np.full(len(steps), int(k))
    out["t"] = steps * h
    out["N"] = np.full(len(steps), int(N))
    return out


def write_ensemble_csv(path, table):
    cols = [table[c] for c in ENSEMBLE_COLUMNS]
    write_csv(path, ENSEMBLE_COLUMNS, zip(*cols))
