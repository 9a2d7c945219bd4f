import numpy as np
import pytest
from scipy.optimize import linprog

from torrent import datagen
from torrent.exceptions import NotConverged
from torrent.l1 import DEFAULT_LAMBDA_GRID, L1Config, l1_grid_fit, l1_solve

TOY_X = np.array([[1.0, 1.0, 1.0, 1.0]])
TOY_Y = np.array([2.0, 2.0, 2.0, 10.0])


def lp_oracle(X, y, lam):
    """min ||theta||_1 + lam ||b||_1  s.t.  X^T theta + b = y, as a linear program."""
    p, n = X.shape
    # variables: theta+, theta-, b+, b-  (all >= 0)
    c = np.concatenate([np.ones(2 * p), lam * np.ones(2 * n)])
    A = np.hstack([X.T, -X.T, np.eye(n), -np.eye(n)])
    res = linprog(c, A_eq=A, b_eq=y, bounds=(0, None), method="highs")
    assert res.status == 0
    theta = res.x[:p] - res.x[p:2 * p]
    return theta, res.fun


def test_zero_response():
    fit = l1_solve(np.random.default_rng(0).standard_normal((3, 20)), np.zeros(20), L1Config())
    assert np.all(fit.model == 0) and np.all(fit.corruption == 0)
    assert fit.converged


def test_toy_grid():
    best, fits = l1_grid_fit(TOY_X, TOY_Y, np.logspace(-2, 2, 9), ground_truth=[2.0])
    assert 1.9 <= best.model[0] <= 2.1
    assert len(fits) == 9


@pytest.mark.parametrize("lam", [0.5, 1.0, 4.0])
def test_toy_matches_lp(lam):
    fit = l1_solve(TOY_X, TOY_Y, L1Config(lam=lam))
    theta, _ = lp_oracle(TOY_X, TOY_Y, lam)
    assert fit.model[0] == pytest.approx(theta[0], abs=1e-3)
    assert 1.9 <= fit.model[0] <= 2.1


@pytest.mark.parametrize("seed", range(5))
def test_objective_matches_lp(seed):
    inst = datagen.gen_instance(datagen.InstanceSpec(p=4, n=40, alpha=0.2, sigma=0.05, seed=seed))
    lam = 0.7
    fit = l1_solve(inst.X, inst.y, L1Config(lam=lam, abs_tol=1e-9, rel_tol=1e-8, max_iters=50000))
    theta, opt = lp_oracle(inst.X, inst.y, lam)
    obj = np.sum(np.abs(fit.model)) + lam * np.sum(np.abs(fit.corruption))
    assert obj == pytest.approx(opt, rel=1e-5)
    assert obj >= opt - 1e-6 * (1 + opt)


def test_feasibility():
    inst = datagen.gen_instance(datagen.InstanceSpec(p=5, n=80, alpha=0.2, seed=3))
    cfg = L1Config(lam=2.0)
    fit = l1_solve(inst.X, inst.y, cfg)
    resid = inst.X.T @ fit.model + fit.corruption - inst.y
    assert np.linalg.norm(resid) <= 10 * cfg.abs_tol * (1 + np.linalg.norm(inst.y))


def test_unpacks_as_triple():
    model, corruption, iters = l1_solve(TOY_X, TOY_Y, L1Config(lam=2.0))
    assert model.shape == (1,) and corruption.shape == (4,) and iters >= 1


def test_clean_data_no_corruption_recovered():
    inst = datagen.gen_instance(datagen.InstanceSpec(p=5, n=200, seed=4))
    fit = l1_solve(inst.X, inst.y, L1Config(lam=10.0))
    assert np.max(np.abs(fit.corruption)) <= 1e-3 * np.max(np.abs(inst.y))
    assert np.linalg.norm(fit.model - inst.w_star) <= 1e-3


def test_clean_data_matches_least_squares_fit():
    from torrent.solvers import SolverConfig, torrent_solve

    inst = datagen.gen_instance(datagen.InstanceSpec(p=5, n=200, seed=5))
    fc = torrent_solve(inst.X, inst.y, SolverConfig(variant="FC", beta=0.1))
    fit = l1_solve(inst.X, inst.y, L1Config(lam=10.0))
    assert np.linalg.norm(fit.model - fc.model) <= 1e-3


def test_singleton_grid_is_single_solve():
    best, fits = l1_grid_fit(TOY_X, TOY_Y, [3.0])
    single = l1_solve(TOY_X, TOY_Y, L1Config(lam=3.0))
    np.testing.assert_array_equal(best.model, single.model)
    assert best.iters == single.iters and len(fits) == 1


def test_grid_selects_oracle_best():
    inst = datagen.gen_instance(datagen.InstanceSpec(p=5, n=100, alpha=0.2, seed=31))
    grid = np.logspace(-2, 2, 10)
    best, fits = l1_grid_fit(inst.X, inst.y, grid, ground_truth=inst.w_star)
    errors = [np.linalg.norm(f.model - inst.w_star) for f in fits]
    assert best is fits[int(np.argmin(errors))]


def test_grid_golden():
    inst = datagen.gen_instance(datagen.InstanceSpec(p=5, n=100, alpha=0.2, seed=31))
    best, _ = l1_grid_fit(inst.X, inst.y, np.logspace(-2, 2, 10), ground_truth=inst.w_star)
    assert best.lam == pytest.approx(35.93813663804626)
    assert np.linalg.norm(best.model - inst.w_star) == pytest.approx(6.74007764722628e-07, rel=1e-3)


def test_grid_without_ground_truth_uses_trimmed_residual():
    inst = datagen.gen_instance(datagen.InstanceSpec(p=5, n=100, alpha=0.2, seed=31))
    best, fits = l1_grid_fit(inst.X, inst.y, [0.01, 1.0, 10.0], beta=0.25)
    assert best.lam in (1.0, 10.0)
    assert np.linalg.norm(best.model - inst.w_star) <= 1e-3


def test_not_converged_carries_iterate():
    with pytest.raises(NotConverged) as info:
        l1_solve(TOY_X, TOY_Y, L1Config(lam=0.01, max_iters=3))
    assert info.value.result.iters == 3
    assert not info.value.result.converged


def test_callback_sees_every_iteration():
    seen = []
    fit = l1_solve(TOY_X, TOY_Y, L1Config(lam=2.0), callback=lambda k, th: seen.append(k))
    assert seen == list(range(1, fit.iters + 1))


def test_default_grid():
    assert len(DEFAULT_LAMBDA_GRID) == 20
    assert DEFAULT_LAMBDA_GRID[0] == pytest.approx(1e-3)
    assert DEFAULT_LAMBDA_GRID[-1] == pytest.approx(1e2)


@pytest.mark.parametrize("kw", [dict(lam=0.0), dict(admm_rho=-1.0), dict(abs_tol=0.0),
                                dict(max_iters=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        L1Config(**kw)


def test_empty_grid():
    with pytest.raises(ValueError):
        l1_grid_fit(TOY_X, TOY_Y, [])
