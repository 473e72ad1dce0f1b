"""Spectral problem definition: parameters, true drift, prior, sine synthesis."""

from dataclasses import dataclass, field, fields, replace
import math

import numpy as np

from heatdrift import rng
from heatdrift.errors import ParameterError

TRUTH_MODES = ("deterministic", "uniform-random")


@dataclass(frozen=True)
class ModelConfig:
    """Physical and statistical parameters of one experiment.

    Defaults reproduce the numerical experiment with unit noise levels and
    ``alpha = beta = 1/2``.
    """

    gamma: float = 1.0
    rho: float = 1.0
    alpha: float = 0.5
    beta: float = 0.5
    delta: float = 0.0
    k_max: int = 8
    dt_base: float = 1e-3
    t_end: float = 1e3
    seed: int = 0
    truth_mode: str = "deterministic"
    # Relative step growth h = growth * t of the long-horizon moment integrator.
    step_growth: float = 1e-3

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ParameterError(f"gamma must be >= 0, got {self.gamma}")
        if not self.rho > 0:
            raise ParameterError(f"rho must be > 0, got {self.rho}")
        if not self.alpha > 0:
            raise ParameterError(f"alpha must be > 0, got {self.alpha}")
        if not self.beta > 0:
            raise ParameterError(f"beta must be > 0, got {self.beta}")
        if not self.delta >= 0:
            raise ParameterError(f"delta must be >= 0, got {self.delta}")
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise ParameterError(f"k_max must be an integer >= 1, got {self.k_max}")
        if not self.dt_base > 0:
            raise ParameterError(f"dt_base must be > 0, got {self.dt_base}")
        if not self.t_end > 0:
            raise ParameterError(f"t_end must be > 0, got {self.t_end}")
        if self.truth_mode not in TRUTH_MODES:
            raise ParameterError(f"truth_mode must be one of {TRUTH_MODES}, got {self.truth_mode!r}")
        if not self.step_growth >= 0:
            raise ParameterError(f"step_growth must be >= 0, got {self.step_growth}")

    def with_(self, **changes):
        return replace(self, **changes)

    def step(self, k):
        """Fixed step used for stochastic paths of mode ``k``."""
        return min(self.dt_base, 0.1 / k**2)

    @classmethod
    def field_types(cls):
        return {f.name: f.type for f in fields(cls)}


@dataclass(frozen=True)
class PriorSpec:
    """Centred Gaussian prior with variance ``k**(-2 alpha - 1)`` per mode."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ParameterError(f"alpha must be > 0, got {self.alpha}")

    def variance(self, k):
        return prior_variance(k, self.alpha)

    mean = 0.0


@dataclass(frozen=True)
class DriftTruth:
    """True drift coefficients ``F*(k) = c_k k**(-beta - 1/2 - delta)``, k = 1..k_max."""

    coeffs: np.ndarray
    beta: float
    delta: float
    mode: str
    c: np.ndarray = field(repr=False)

    @property
    def k_max(self):
        return len(self.coeffs)

    def __getitem__(self, k):
        if k < 1 or k > len(self.coeffs):
            raise ParameterError(f"mode {k} outside 1..{len(self.coeffs)}")
        return float(self.coeffs[k - 1])

    @property
    def c_bar(self):
        return float(np.max(np.abs(self.c))) if len(self.c) else 0.0

    def sobolev_sum(self):
        """Truncated sum of ``F*(k)^2 k^(-2 beta)``."""
        k = np.arange(1, len(self.coeffs) + 1, dtype=float)
        return float(np.sum(self.coeffs**2 * k ** (-2 * self.beta)))

    def sobolev_bound(self):
        """Upper bound ``c_bar^2 sum k^(-1 - 2 delta)`` on the truncated Sobolev sum."""
        k = np.arange(1, len(self.coeffs) + 1, dtype=float)
        return float(self.c_bar**2 * np.sum(k ** (-1 - 2 * self.delta)))


def _check_exponents(beta, delta):
    if not beta > 0:
        raise ParameterError(f"beta must be > 0, got {beta}")
    if not delta >= 0:
        raise ParameterError(f"delta must be >= 0, got {delta}")


def truth_coefficients(c, beta, delta):
    _check_exponents(beta, delta)
    c = np.asarray(c, dtype=float)
    k = np.arange(1, len(c) + 1, dtype=float)
    return c * k ** (-beta - 0.5 - delta)


def uniform_c(seed, k_max):
    """i.i.d. U[-1, 1] amplitudes, one keyed stream per mode."""
    return np.array([rng.stream(seed, rng.TRUTH, k).uniform(-1.0, 1.0) for k in range(1, k_max + 1)])


def make_truth(beta, delta, k_max, mode="deterministic", seed=0):
    """Build the true drift sequence.

    Parameters
    ----------
    beta, delta : float
        Sobolev regularity and margin; ``beta > 0``, ``delta >= 0``.
    k_max : int
        Number of modes.
    mode : {"deterministic", "uniform-random"}
        ``c_k = 1`` or ``c_k ~ U[-1, 1]`` drawn from a stream keyed by
        ``(seed, k)``, so a coefficient does not depend on ``k_max``.
    seed : int
        Master seed for the random mode.
    """
    _check_exponents(beta, delta)
    if int(k_max) != k_max or k_max < 1:
        raise ParameterError(f"k_max must be an integer >= 1, got {k_max}")
    k_max = int(k_max)
    if mode == "deterministic":
        c = np.ones(k_max)
    elif mode == "uniform-random":
        c = uniform_c(seed, k_max)
    else:
        raise ParameterError(f"unknown truth mode {mode!r}")
    return DriftTruth(coeffs=truth_coefficients(c, beta, delta), beta=beta, delta=delta, mode=mode, c=c)


def truth_from_config(config, k_max=None):
    return make_truth(config.beta, config.delta, k_max or config.k_max, config.truth_mode, config.seed)


def prior_variance(k, alpha):
    """Prior variance ``k**(-2 alpha - 1)`` of drift mode ``k`` (scalar or array)."""
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr < 1):
        raise ParameterError(f"mode index must be >= 1, got {k}")
    if not alpha > 0:
        raise ParameterError(f"alpha must be > 0, got {alpha}")
    out = k_arr ** (-2.0 * alpha - 1.0)
    return float(out) if out.ndim == 0 else out


def synthesize(coeffs, x):
    """Evaluate ``sum_k coeffs[k-1] sin(k x)`` on the points ``x``."""
    coeffs = np.asarray(coeffs, dtype=float)
    x = np.asarray(x, dtype=float)
    k = np.arange(1, len(coeffs) + 1, dtype=float)
    vals = np.sin(np.multiply.outer(x, k)) @ coeffs
    # sin(k pi) is not exactly zero in floating point.
    on_boundary = (x == 0.0) | (x == math.pi)
    return np.where(on_boundary, 0.0, vals)
