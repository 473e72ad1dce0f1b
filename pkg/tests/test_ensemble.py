import math

import numpy as np
import pytest

from heatdrift import ModelConfig, ParameterError, rng
from heatdrift.ensemble import Ensemble, init_ensemble, run_ensemble, step_ensemble
from heatdrift.filter_core import PosteriorMoments, advance_mean
from heatdrift.simulator import simulate_mode, uniform_grid


def test_init_small():
    e = init_ensemble(2, 1, 0.5, seed=0)
    assert e.U.mean() == 0.0 and e.N == 2
    with pytest.raises(ParameterError):
        init_ensemble(1, 1, 0.5, seed=0)


@pytest.mark.parametrize("k,target", [(1, 1.0), (2, 0.25)])
def test_init_variance(k, target):
    N = 100_000
    e = init_ensemble(N, k, 0.5, seed=3)
    assert abs(e.F.var(ddof=1) - target) < 4 * target * math.sqrt(2 / N)


def test_frozen_gains_deterministic_flow():
    # Degenerate ensemble: all F equal and all U equal, so every gain is zero.
    e = Ensemble(U=np.full(5, 0.3), F=np.full(5, 0.8), k=2)
    out = step_ensemble(e, 0.0, 0.01, 0.0, 1.0, rng.stream(0, rng.ENSEMBLE_NOISE, 2))
    np.testing.assert_array_equal(out.F, e.F)
    np.testing.assert_allclose(out.U, 0.3 + (-4 * 0.3 + 0.8) * 0.01, rtol=1e-15)


def test_mean_update_consistent_with_filter():
    # One step: the ensemble mean follows advance_mean with empirical gains up to O(h).
    gen = np.random.default_rng(5)
    N, k, h = 50_000, 2, 1e-3
    e = Ensemble(U=gen.normal(0.1, 0.5, N), F=gen.normal(0.4, 0.3, N), k=k)
    mu, mf, vu, cuf, vf = e.moments()
    dY = 0.002
    out = step_ensemble(e, dY, h, 0.0, 1.0, rng.stream(1, rng.ENSEMBLE_NOISE, k))
    pm = advance_mean(PosteriorMoments(mu, mf, vu, cuf, vf), dY, k, 1.0, h)
    assert out.U.mean() == pytest.approx(pm.ubar, abs=10 * h * h + 1e-12)
    assert out.F.mean() == pytest.approx(pm.fbar, abs=1e-12)


def test_large_ensemble_tracks_riccati(frozen):
    cfg = ModelConfig()
    h = cfg.step(1)
    p = simulate_mode(1, 1.0, 1.0, 1.0, uniform_grid(1.0, h), cfg.seed)
    N = 20_000
    out = run_ensemble(1, cfg, N, p.dy, h, [1.0])
    su, suf, sf = frozen["moments"]["1"]["y"][0][:3]
    assert abs(out["var_u"][0] - su) < 4 * su * math.sqrt(2 / N)
    assert abs(out["cov_uf"][0] - suf) < 4 * math.sqrt((su * sf + suf**2) / N)
    assert abs(out["var_f"][0] - sf) < 4 * sf * math.sqrt(2 / N)


def test_record_validation():
    cfg = ModelConfig()
    with pytest.raises(ParameterError):
        run_ensemble(1, cfg, 10, np.zeros(10), 1e-3, [0.5])
