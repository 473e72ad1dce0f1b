"""Per-mode Kalman-Bucy filter for the joint state and drift.

The posterior covariance obeys a closed deterministic Riccati system; the
posterior means are driven by observation increments. Covariance steps use
classical RK4 and the stiff ``-k^2 ubar`` term of the mean is integrated
exactly.
"""

from dataclasses import dataclass, replace
import math

import numpy as np

from heatdrift._backend import kernels
from heatdrift.errors import InstabilityError, ParameterError
from heatdrift.io import ModeTrace
from heatdrift.simulator import ModeTruthPath, check_grid
from heatdrift.spectral import prior_variance

NEG_TOL = 1e-12
CS_TOL = 1e-10


@dataclass(frozen=True)
class Gains:
    k_u: float
    k_f: float


@dataclass(frozen=True)
class PosteriorMoments:
    ubar: float
    fbar: float
    sigma_u: float
    sigma_uf: float
    sigma_f: float

    def gains(self, rho):
        return Gains(self.sigma_u / rho, self.sigma_uf / rho)

    @classmethod
    def initial(cls, k, alpha):
        """Zero state, zero means, prior drift variance."""
        return cls(0.0, 0.0, 0.0, 0.0, prior_variance(k, alpha))


def riccati_rhs(m, k, gamma, rho):
    """Time derivative ``(sigma_u', sigma_uf', sigma_f')`` of the posterior covariance."""
    e = float(k) ** 2
    su, suf, sf = m.sigma_u, m.sigma_uf, m.sigma_f
    return (
        -2.0 * e * su + 2.0 * suf + gamma - su * su / rho,
        -e * suf + sf - su * suf / rho,
        -suf * suf / rho,
    )


def advance_covariance(m, k, gamma, rho, h):
    """One RK4 step of the covariance; means are left untouched."""
    if not h > 0:
        raise ParameterError(f"step must be > 0, got {h}")
    su, suf, sf = kernels.riccati_rk4(m.sigma_u, m.sigma_uf, m.sigma_f, float(k) ** 2, gamma, rho, h)
    if su < 0.0 or sf < 0.0:
        if min(su, sf) < -NEG_TOL:
            raise InstabilityError(
                f"negative posterior variance ({su:.3e}, {sf:.3e}) after step h={h}", k=k
            )
        su, sf = max(su, 0.0), max(sf, 0.0)
    return replace(m, sigma_u=su, sigma_uf=suf, sigma_f=sf)


def advance_mean(m, dY, k, rho, h):
    """Advance ``(ubar, fbar)`` across one observation increment ``dY``.

    Gains are frozen at the start of the step. The linear decay of ``ubar``
    is applied exactly; the forcing ``fbar - K_u * innovation / h`` enters
    through the matching exponential weight.
    """
    k2 = float(k) ** 2
    g = m.gains(rho)
    innov = m.ubar * h - dY
    decay = math.exp(-k2 * h)
    weight = -math.expm1(-k2 * h) / k2
    ubar = decay * m.ubar + weight * (m.fbar - g.k_u * innov / h)
    fbar = m.fbar - g.k_f * innov
    return replace(m, ubar=ubar, fbar=fbar)


def record_indices(t_grid, t_out):
    """Indices of the grid points closest to each requested output time."""
    t_grid = np.asarray(t_grid, dtype=float)
    t_out = np.asarray(t_out, dtype=float)
    idx = np.clip(np.searchsorted(t_grid, t_out), 0, len(t_grid) - 1)
    left = np.clip(idx - 1, 0, None)
    closer = np.abs(t_grid[left] - t_out) < np.abs(t_grid[idx] - t_out)
    idx = np.where(closer, left, idx)
    return np.unique(idx)


def run_filter(k, observations, config, t_out=None, sigma_f0=None):
    """Filter one observation path and return a ``filter`` ModeTrace.

    ``t_out`` selects which grid points are kept (nearest grid point; default
    every point). ``sigma_f0`` overrides the prior variance.
    """
    if not isinstance(observations, ModeTruthPath):
        raise ParameterError("observations must be a ModeTruthPath")
    if observations.k != k:
        raise ParameterError(f"observations are for mode {observations.k}, not {k}")
    t, h = check_grid(observations.t)
    if len(observations.dy) != len(h):
        raise ParameterError("observation increments do not match the grid")
    if sigma_f0 is None:
        sigma_f0 = prior_variance(k, config.alpha)
    rec = np.arange(len(t)) if t_out is None else record_indices(t, t_out)
    out = kernels.filter_path(float(k) ** 2, config.gamma, config.rho, sigma_f0, h, observations.dy, rec)
    cols = dict(zip(("ubar", "fbar", "sigma_u", "sigma_uf", "sigma_f"), out.T))
    cols["k_u"] = cols["sigma_u"] / config.rho
    cols["k_f"] = cols["sigma_uf"] / config.rho
    return ModeTrace(k=int(k), t=t[rec], variant="filter", columns=cols)


def check_covariance_invariants(trace, tol=CS_TOL):
    """Return the list of invariant violations in a covariance trace."""
    su, suf, sf = trace["sigma_u"], trace["sigma_uf"], trace["sigma_f"]
    problems = []
    if np.any(su < 0) or np.any(sf < 0):
        problems.append("negative variance")
    if np.any(suf**2 > su * sf + tol):
        problems.append("Cauchy-Schwarz bound violated")
    if np.any(np.diff(sf) > 0):
        problems.append("sigma_f increased")
    return problems
