import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatdrift import ModelConfig, ParameterError, PriorSpec, make_truth, prior_variance, synthesize
from heatdrift.spectral import uniform_c


def test_deterministic_truth_values(frozen):
    tr = make_truth(0.5, 0.0, 8)
    assert tr[1] == 1.0
    assert tr[2] == pytest.approx(frozen["closed"]["truth_k2"], rel=1e-15)


def test_zero_amplitudes_give_zero_truth():
    from heatdrift.spectral import truth_coefficients

    assert np.all(truth_coefficients(np.zeros(5), 1.3, 0.2) == 0.0)


@pytest.mark.parametrize("beta,delta", [(0.0, 0.0), (-1.0, 0.0), (0.5, -0.1)])
def test_bad_exponents(beta, delta):
    with pytest.raises(ParameterError):
        make_truth(beta, delta, 4)


def test_random_truth_independent_of_k_max():
    a = make_truth(0.5, 0.1, 5, "uniform-random", seed=3)
    b = make_truth(0.5, 0.1, 12, "uniform-random", seed=3)
    np.testing.assert_array_equal(a.coeffs, b.coeffs[:5])
    assert np.all(np.abs(a.c) <= 1)
    assert not np.array_equal(uniform_c(3, 5), uniform_c(4, 5))


@given(
    beta=st.floats(0.05, 3),
    delta=st.floats(0, 1),
    k_max=st.integers(1, 60),
    seed=st.integers(0, 2**31),
)
def test_sobolev_sum_bounded(beta, delta, k_max, seed):
    tr = make_truth(beta, delta, k_max, "uniform-random", seed)
    assert tr.sobolev_sum() <= tr.sobolev_bound() * (1 + 1e-12)


def test_prior_variance(frozen):
    assert prior_variance(1, 0.7) == 1.0
    assert prior_variance(2, 0.5) == frozen["closed"]["prior_k2"]
    assert prior_variance(4, 0.5) == frozen["closed"]["prior_k4"]
    assert prior_variance(3, 0.8) == 3.0 ** (-2 * 0.8 - 1)
    with pytest.raises(ParameterError):
        prior_variance(0, 0.5)


@given(alpha=st.floats(0.01, 5))
def test_prior_strictly_decreasing(alpha):
    p = PriorSpec(alpha)
    v = p.variance(np.arange(1, 30))
    assert v[0] == 1.0
    assert np.all(np.diff(v) < 0)


def test_synthesize_examples(frozen):
    assert synthesize([1.0], [math.pi / 2])[0] == pytest.approx(1.0, abs=1e-15)
    assert synthesize([0.0, 1.0], [math.pi / 4])[0] == pytest.approx(frozen["closed"]["synth_e2_pi4"], abs=1e-15)
    c = np.random.default_rng(0).normal(size=7)
    assert synthesize(c, [0.0, math.pi]).tolist() == [0.0, 0.0]


def test_parseval():
    k_max = 10
    c = make_truth(0.5, 0.0, k_max).coeffs
    n = 32 * k_max
    # Midpoint rule is exact for trigonometric polynomials of this degree.
    x = (np.arange(n) + 0.5) * math.pi / n
    integral = np.sum(synthesize(c, x) ** 2) * math.pi / n
    assert 2 / math.pi * integral == pytest.approx(np.sum(c**2), abs=1e-6)


@pytest.mark.parametrize(
    "field,value",
    [("rho", 0.0), ("alpha", 0.0), ("beta", -1.0), ("k_max", 0), ("dt_base", 0.0), ("t_end", -1.0), ("gamma", -0.1)],
)
def test_config_invariants(field, value):
    with pytest.raises(ParameterError):
        ModelConfig(**{field: value})


def test_step_rule():
    c = ModelConfig(dt_base=1e-3)
    assert c.step(1) == 1e-3
    assert c.step(20) == pytest.approx(0.1 / 400)
