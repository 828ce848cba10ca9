import math

import numpy as np
import pytest

from lassoagg.design import Support
from lassoagg.errors import InvalidInputError
from lassoagg.path import SupportFamily
from lassoagg.pipelines import path_aggregate
from lassoagg.simulation import (TrialConfig, exhaustive_spa,
                                 generate_instance, monte_carlo, oi_rhs_crit,
                                 run_oracle_trial, soi_rhs_supports)
from lassoagg.weights import log_inv_weight


def test_generate_instance_invariants():
    inst = generate_instance(30, 12, 4, sigma=0.7, seed=5)
    assert inst.X.entries.shape == (30, 12)
    # exact unit column scaling
    assert np.allclose((inst.X.entries ** 2).sum(axis=0) / 30, 1.0, atol=1e-12)
    assert np.sum(inst.beta_star != 0.0) == 4
    assert set(np.unique(inst.beta_star[inst.beta_star != 0.0])) <= {-1.0, 1.0}
    assert np.allclose(inst.mu, inst.X.entries @ inst.beta_star, atol=1e-12)
    assert inst.y.shape == (30,)


def test_generate_instance_reproducible():
    a = generate_instance(10, 5, 2, 1.0, seed=9)
    b = generate_instance(10, 5, 2, 1.0, seed=9)
    assert np.array_equal(a.X.entries, b.X.entries)
    assert np.array_equal(a.y, b.y)
    c = generate_instance(10, 5, 2, 1.0, seed=10)
    assert not np.array_equal(a.y, c.y)


def test_generate_instance_equicorrelated_correlation():
    inst = generate_instance(10_000, 2, 0, sigma=1.0,
                             design_kind="equicorrelated", rho=0.9, seed=1)
    Xm = inst.X.entries
    corr = float(Xm[:, 0] @ Xm[:, 1]) / 10_000
    assert corr == pytest.approx(0.9, abs=0.05)


def test_generate_instance_orthonormal_gram():
    inst = generate_instance(12, 8, 3, sigma=0.5, design_kind="orthonormal", seed=2)
    G = inst.X.entries.T @ inst.X.entries / 12
    assert np.allclose(G, np.eye(8), atol=1e-10)
    with pytest.raises(InvalidInputError):
        generate_instance(5, 6, 1, 1.0, design_kind="orthonormal")


def test_generate_instance_s_zero_and_rademacher():
    inst = generate_instance(20, 6, 0, sigma=2.0, noise_kind="rademacher", seed=3)
    assert np.all(inst.beta_star == 0.0)
    assert np.all(inst.mu == 0.0)
    assert set(np.unique(np.abs(inst.y))) == {2.0}


def test_generate_instance_invalid_args():
    with pytest.raises(InvalidInputError):
        generate_instance(10, 4, 5, 1.0)
    with pytest.raises(InvalidInputError):
        generate_instance(10, 4, 1, 1.0, design_kind="equicorrelated", rho=1.0)
    with pytest.raises(InvalidInputError):
        generate_instance(10, 4, 1, 1.0, design_kind="toeplitz")
    with pytest.raises(InvalidInputError):
        generate_instance(10, 4, 1, 1.0, noise_kind="cauchy")


def test_soi_rhs_empty_support_hand_formula():
    # family = {empty}, mu = 0: rhs = 24*s2/n + 22*sigma^2*x/n
    inst = generate_instance(10, 4, 0, sigma=1.0, seed=7)
    fam = SupportFamily.from_supports([Support(())])
    rhs, terms, T = soi_rhs_supports(fam, np.zeros(10), inst.X, 0.5, 1.0, 3.0)
    assert T == Support(())
    assert terms == pytest.approx([24.0 * 0.5 / 10], rel=1e-12)
    assert rhs == pytest.approx(24.0 * 0.5 / 10 + 22.0 * 3.0 / 10, rel=1e-12)


def test_oi_rhs_hand_formula_with_bias():
    inst = generate_instance(10, 4, 0, sigma=1.0, seed=8)
    mu = inst.X.entries[:, 0] * 2.0  # exactly fit by T = {0}
    fam = SupportFamily.from_supports([Support(()), Support((0,))])
    rhs, terms, T = oi_rhs_crit(fam, mu, inst.X, 1.0, 1.0, 2.0)
    n, p = 10, 4
    t_empty = 3.0 * float(mu @ mu) / n + 26.0 / n
    t_zero = 0.0 + (26.0 + 104.0 * math.log(math.e * p)) / n
    assert terms == pytest.approx([t_empty, t_zero], rel=1e-10)
    assert T == fam.supports[int(np.argmin([t_empty, t_zero]))]
    assert rhs == pytest.approx(min(t_empty, t_zero) + 28.0 * 2.0 / n, rel=1e-10)


def test_rhs_requires_positive_x():
    inst = generate_instance(6, 3, 0, 1.0, seed=1)
    fam = SupportFamily.from_supports([Support(())])
    with pytest.raises(InvalidInputError):
        soi_rhs_supports(fam, np.zeros(6), inst.X, 1.0, 1.0, 0.0)


def test_noiseless_trial_holds():
    cfg = TrialConfig(n=30, p=10, s=2, sigma=0.0, x=1.0, method="q",
                      bound="soi_path", seed=4)
    check = run_oracle_trial(cfg)
    assert check.held
    assert check.lhs <= 1e-10  # exact recovery is available at tiny lambda


def test_trial_all_bounds_and_methods_run():
    for bound, method in [("soi_path", "q"), ("soi_supports", "q"),
                          ("oi_supports", "crit")]:
        cfg = TrialConfig(n=25, p=8, s=2, sigma=0.5, x=3.0, method=method,
                          bound=bound, seed=11)
        check = run_oracle_trial(cfg)
        assert check.rhs > 0
        assert check.lhs >= 0
        assert check.held == (check.lhs <= check.rhs)


def test_trial_sqrt_lasso_sigma_mode():
    cfg = TrialConfig(n=40, p=10, s=2, sigma=1.0, sigma_mode="sqrt_lasso", seed=6)
    check = run_oracle_trial(cfg)
    assert 0.0 < check.sigma_hat_sq < 10.0


def test_exhaustive_spa_p1_matches_two_vertex_problem():
    inst = generate_instance(15, 1, 1, sigma=0.5, seed=12)
    res = exhaustive_spa(inst.X, inst.y, 0.25, tol_gap=1e-12)
    assert res.converged
    assert res.theta_hat.theta.size == 2  # empty set and the singleton


def test_exhaustive_spa_weight_normalization_p3():
    # the 2^3 supports carry total prior mass one
    total = sum(math.comb(3, k) * math.exp(-log_inv_weight(3, k)) for k in range(4))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_exhaustive_spa_dominates_path_family():
    inst = generate_instance(16, 6, 2, sigma=0.5, seed=13)
    s2 = 0.25
    ex = exhaustive_spa(inst.X, inst.y, s2, tol_gap=1e-10)
    via_path = path_aggregate(inst.X, inst.y, s2, method="q",
                              agg_opts={"tol_gap": 1e-10})
    assert ex.objective <= via_path.result.objective + 1e-8


def test_exhaustive_spa_rejects_large_p():
    inst = generate_instance(12, 11, 0, 1.0, seed=1)
    with pytest.raises(InvalidInputError):
        exhaustive_spa(inst.X, inst.y, 1.0)


def test_monte_carlo_single_rep_equals_trial():
    cfg = TrialConfig(n=20, p=6, s=1, sigma=0.5, seed=21)
    report = monte_carlo(cfg, reps=1)
    check = run_oracle_trial(cfg)
    assert report["reps"] == 1
    assert report["mean_lhs"] == check.lhs
    assert report["mean_rhs"] == check.rhs
    assert report["held_rate"] == float(check.held)


def test_monte_carlo_parallelism_invariant():
    cfg = TrialConfig(n=20, p=6, s=1, sigma=0.5, seed=31)
    serial = monte_carlo(cfg, reps=6, parallelism=1)
    parallel = monte_carlo(cfg, reps=6, parallelism=4)
    assert serial["mean_lhs"] == parallel["mean_lhs"]
    assert serial["mean_rhs"] == parallel["mean_rhs"]
    assert serial["held_rate"] == parallel["held_rate"]
    assert serial["lhs_quantiles"] == parallel["lhs_quantiles"]


def test_monte_carlo_rejects_zero_reps():
    with pytest.raises(InvalidInputError):
        monte_carlo(TrialConfig(), reps=0)
