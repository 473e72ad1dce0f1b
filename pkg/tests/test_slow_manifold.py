import math
import warnings

import numpy as np
import pytest

from heatdrift.frequentist import moment_trace
from heatdrift.slow_manifold import (
    ApplicabilityWarning,
    reduced_bias,
    reduced_sigma_f,
    reduced_trace,
    slow_manifold_covariance,
    slow_manifold_second_order,
    small_k_constants,
    small_k_sigma_f,
)
from heatdrift.contraction import fit_rate
from heatdrift.stationary import sigma_f_closed


def test_reduced_sigma_f(frozen):
    assert reduced_sigma_f(0.0, 5, 0.5, 1.0) == 5.0**-2
    assert reduced_sigma_f(64.0, 2, 0.5, 1.0) == pytest.approx(frozen["closed"]["reduced_k2_t64"], rel=1e-15)


def test_reduced_equals_stationary():
    t = np.logspace(-2, 8, 50)
    for k in (1, 3, 9):
        for alpha, rho in ((0.5, 1.0), (1.7, 0.3)):
            np.testing.assert_allclose(reduced_sigma_f(t, k, alpha, rho), sigma_f_closed(t, k, alpha, rho), rtol=1e-14)


def test_reduced_bias():
    assert reduced_bias(0.0, 2, 0.5, 1.0, 0.5) == 0.0
    assert reduced_bias(64.0, 2, 0.5, 1.0, 0.5) == pytest.approx(0.25, rel=1e-14)
    # t^-1 decay once t >> rho / (eps^2 sigma_0) = 64
    t = np.logspace(4, 7, 30)
    slope = fit_rate(t, np.abs(reduced_bias(t, 2, 0.5, 1.0, 0.5) - 0.5))
    assert slope == pytest.approx(-1, rel=0.05)


def test_small_k_constants(frozen):
    c = frozen["closed"]
    assert small_k_constants(0.0, 1.0) == small_k_constants(0.0, 1.0)
    z = small_k_constants(0.0, 2.0)
    assert (z.C0, z.C1) == (0.0, 1.0)
    s = small_k_constants(1.0, 1.0)
    assert s.C0 == pytest.approx(c["C0_rho1"], rel=1e-15)
    assert s.C1 == pytest.approx(c["C1_rho1"], rel=1e-15)
    assert small_k_constants(1.0, 4.0).C0 == pytest.approx(c["C0_rho4"], rel=1e-14)


def test_small_k_ratio_and_gain(base_config):
    t = np.logspace(2, 5, 30)
    tr = moment_trace(1, base_config, t)
    c = small_k_constants(1.0, 1.0)
    np.testing.assert_allclose(tr["sigma_uf"] / tr["sigma_f"], c.C1, atol=1e-2)
    np.testing.assert_allclose(tr["k_f"], c.C1 * tr["sigma_f"], rtol=0.02)
    np.testing.assert_allclose(tr["sigma_f"], small_k_sigma_f(t, 1, 0.5, 1.0, 1.0), rtol=0.05)


def test_first_order_point(frozen):
    su, suf = slow_manifold_covariance(0.3, 8, 1.0)
    assert su == frozen["closed"]["slow_sigma_u_k8"]
    assert slow_manifold_covariance(0.0, 8, 1.0)[1] == 0.0


def _errors(k, cfg, order):
    t = np.linspace(1, 100, 397)
    tr = moment_trace(k, cfg, t)
    su, suf, sf = tr["sigma_u"], tr["sigma_uf"], tr["sigma_f"]
    if order == 1:
        au, auf = slow_manifold_covariance(sf, k, 1.0)
    else:
        au, auf = slow_manifold_second_order(sf, -(suf**2), k, 1.0, 1.0)
    return max(np.max(np.abs(su - au)), np.max(np.abs(suf - auf)))


def test_first_order_bound(base_config):
    eps = 8.0**-2
    assert _errors(8, base_config, 1) <= 5 * eps**2


def test_second_order_improves(base_config):
    assert _errors(8, base_config, 2) * 3 <= _errors(8, base_config, 1)
    assert _errors(16, base_config, 2) < _errors(8, base_config, 2)


def test_error_shrinks_with_k(base_config):
    # Under the prior scaling sigma_0 = eps, both errors fall faster than eps.
    assert _errors(16, base_config, 1) < _errors(8, base_config, 1) / 4


def test_second_order_reduces_to_first_when_static():
    k, eps, y = 10, 0.01, 0.2
    su, suf = slow_manifold_second_order(y, 0.0, k, 1.0, 1.0)
    f_u = 2 * eps * y + 1 - (eps / 2) ** 2
    f_uf = y - (eps / 2) * eps * y
    assert su == pytest.approx(eps * f_u / 2, rel=1e-15)
    assert suf == pytest.approx(eps * f_uf, rel=1e-15)


def test_second_order_gamma_zero():
    eps = 9.0**-2
    su, suf = slow_manifold_second_order(0.5, 0.0, 9, 0.0, 1.0)
    # sigma_u vanishes at order eps; only the eps^2 coupling through sigma_uf remains.
    assert su == pytest.approx(eps * eps * 0.5, rel=1e-14)
    assert suf == pytest.approx(eps * 0.5 * (1 - 0.0), rel=1e-15)


def test_applicability_warning():
    with pytest.warns(ApplicabilityWarning):
        slow_manifold_second_order(1.0, 0.0, 2, 1.0, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        slow_manifold_second_order(1.0, 0.0, 4, 1.0, 1.0)


def test_reduced_trace(base_config):
    tr = reduced_trace(8, base_config, np.array([0.0, 10.0]))
    assert tr.variant == "reduced"
    assert tr["sigma_u"][0] == 1 / 128
    assert math.isclose(tr["sigma_uf"][1], tr["sigma_f"][1] / 64)
