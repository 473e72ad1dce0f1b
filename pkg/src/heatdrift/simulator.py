"""Ground-truth signal and observation paths for a single mode.

The signal is an Ornstein-Uhlenbeck process advanced by its exact Gaussian
transition, so coarse steps carry no discretization bias for any ``k``.
"""

from dataclasses import dataclass
import math

import numpy as np

from heatdrift import rng
from heatdrift._backend import kernels
from heatdrift.errors import ParameterError


@dataclass(frozen=True)
class ModeTruthPath:
    k: int
    t: np.ndarray
    u: np.ndarray
    dy: np.ndarray

    def __post_init__(self):
        if len(self.dy) != len(self.t) - 1:
            raise ParameterError("dy must have one entry per step")

    @property
    def h(self):
        return np.diff(self.t)

    def rows(self):
        """Rows ``(k, t, u, dy)``; the last row has no increment and carries ``nan``."""
        dy = np.append(self.dy, np.nan)
        for i in range(len(self.t)):
            yield (self.k, self.t[i], self.u[i], dy[i])


def signal_mean(k, F_star_k, t):
    """Mean of the signal started at zero, ``(F/k^2)(1 - exp(-k^2 t))``."""
    k2 = float(k) ** 2
    t = np.asarray(t, dtype=float)
    out = -(F_star_k / k2) * np.expm1(-k2 * t)
    return float(out) if out.ndim == 0 else out


def ou_transition(k, F_star_k, gamma, h):
    """Coefficients ``(a, b, c)`` of ``U(t+h) = a U(t) + b + c xi`` with ``xi ~ N(0, 1)``."""
    k2 = float(k) ** 2
    h = np.asarray(h, dtype=float)
    a = np.exp(-k2 * h)
    b = -np.expm1(-k2 * h) * F_star_k / k2
    c = np.sqrt(-gamma * np.expm1(-2.0 * k2 * h) / (2.0 * k2))
    return a, b, c


def check_grid(t_grid):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) < 2:
        raise ParameterError("time grid needs at least two points")
    if t[0] != 0.0:
        raise ParameterError(f"time grid must start at 0, got {t[0]}")
    h = np.diff(t)
    if np.any(h <= 0):
        raise ParameterError("time grid must be strictly increasing (nonpositive step)")
    return t, h


def uniform_grid(t_end, h):
    """Grid ``0, h, 2h, ...`` whose last point is exactly ``t_end``."""
    n = max(1, int(math.ceil(t_end / h - 1e-9)))
    t = np.arange(n + 1, dtype=float) * h
    t[-1] = t_end
    return t


def simulate_mode(k, F_star_k, gamma, rho, t_grid, seed):
    """Simulate one signal path and its observation increments.

    Observation increments use the left-endpoint rule
    ``dY = U(t) h + sqrt(rho h) eta``. The signal and observation noises come
    from separate streams keyed by ``(seed, stream, k)``.
    """
    t, h = check_grid(t_grid)
    if not rho > 0:
        raise ParameterError(f"rho must be > 0, got {rho}")
    n = len(h)
    xi = rng.stream(seed, rng.SIGNAL_NOISE, k).standard_normal(n)
    eta = rng.stream(seed, rng.OBS_NOISE, k).standard_normal(n)
    a, b, c = ou_transition(k, F_star_k, gamma, h)
    u = kernels.ou_path(a, b, c, xi, 0.0)
    dy = u[:-1] * h + np.sqrt(rho * h) * eta
    return ModeTruthPath(k=int(k), t=t, u=u, dy=dy)


class PathBatch:
    """Step-by-step generator of ``R`` independent signal/observation paths.

    Used by the Monte Carlo checks, where storing ``R`` full paths would not
    fit in memory. Every replica shares the time grid; draws for one step are
    a vector of length ``R`` from the ``(seed, stream, k)`` streams.
    """

    def __init__(self, k, F_star_k, gamma, rho, replicas, seed, stationary=False):
        self.k = int(k)
        self.F = float(F_star_k)
        self.gamma = float(gamma)
        self.rho = float(rho)
        self.R = int(replicas)
        self.stationary = stationary
        self.u = np.zeros(self.R)
        self._sig = rng.stream(seed, rng.SIGNAL_NOISE, k)
        self._obs = rng.stream(seed, rng.OBS_NOISE, k)

    def step(self, h):
        """Advance by ``h`` and return the observation increments."""
        eta = self._obs.standard_normal(self.R)
        if self.stationary:
            return self.F * h / self.k**2 + math.sqrt(self.rho * h) * eta
        dy = self.u * h + math.sqrt(self.rho * h) * eta
        a, b, c = ou_transition(self.k, self.F, self.gamma, h)
        self.u = a * self.u + b + c * self._sig.standard_normal(self.R)
        return dy
