import json
import math

import numpy as np
import pytest
from scipy.stats import kendalltau, norm

from ssustat import ConfigError, u_statistic
from ssustat.exceptions import DataError, UnknownNameError
from ssustat.sim import (
    SimConfig,
    empirical_kolmogorov,
    gap_at,
    make_model,
    model_names,
    predicted_distance,
    predicted_gap,
    run_be_adversarial,
    run_experiment,
    run_mse_experiment,
    run_test_experiment,
    sd_ratio,
)
from ssustat.sim.adversarial import fit_sqrt_constant
from ssustat.sim.rng import seed_for, standard_normal, stream, uniform_open

BIG = 400_000


def big_sample(name, **params):
    return make_model(name, **params).generate(BIG, 0, np.random.default_rng(7))


@pytest.mark.parametrize("name, params", [
    ("var_model1", {}), ("var_model2", {}), ("mu2_model1", {"mu": 0.7}),
    ("mu2_model2", {"mu": 0.7}), ("linear_gauss", {"mu": 1.2}),
])
def test_model_moments(name, params):
    model = make_model(name, **params)
    ds = big_sample(name, **params)
    y = ds.labeled_y[:, 0]
    mom = model.oracle_moments()
    resid = y - model.cond_mean(ds.labeled_x)
    tol = 6 / math.sqrt(BIG)
    assert abs(np.mean(resid)) < tol * 3
    assert abs(np.var(resid) / mom["e_cond_var"] - 1) < 0.02
    if mom["var_cond_mean"] > 0:
        assert abs(np.var(model.cond_mean(ds.labeled_x)) / mom["var_cond_mean"] - 1) < 0.02
    if "mean" in mom:
        assert abs(np.mean(y) - mom["mean"]) < tol * 3
    else:
        assert abs(np.var(y) / model.psi - 1) < 0.02


def test_var_model_projection_moments():
    for name in ("var_model1", "var_model2"):
        model = make_model(name)
        ds = big_sample(name)
        mom = model.oracle_moments()
        y = ds.labeled_y[:, 0]
        ell1 = (y * y + model.psi) / 2
        assert abs(np.var(ell1) / mom["var_ell1"] - 1) < 0.03
        assert abs(np.var(model.psi1(ds.labeled_x)) / mom["sigma2_sq"] - 1) < 0.03
        # psi1 really is E[ell1 | X]
        assert abs(np.mean(ell1 - model.psi1(ds.labeled_x))) < 0.02


def test_rank_model_targets():
    ds = make_model("kendall_model", rho=0.5).generate(20000, 0, np.random.default_rng(2))
    tau = kendalltau(ds.labeled_y[:, 0], ds.labeled_y[:, 1]).statistic
    assert abs(tau - make_model("kendall_model", rho=0.5).psi) < 0.02
    model = make_model("wilcoxon_model", mu=0.4)
    ds = model.generate(3000, 0, np.random.default_rng(2))
    assert abs(u_statistic("wilcoxon", ds.labeled_y) - model.psi) < 0.02
    assert make_model("wilcoxon_model", mu=0).psi == 0.5


def test_prefix_stability():
    model = make_model("mu2_model1", mu=1.0)
    small = model.generate_rep(30, 50, 9, 4)
    large = model.generate_rep(60, 200, 9, 4)
    np.testing.assert_array_equal(small.labeled_x, large.labeled_x[:30])
    np.testing.assert_array_equal(small.labeled_y, large.labeled_y[:30])
    np.testing.assert_array_equal(small.unlabeled_x, large.unlabeled_x[:50])
    other = model.generate_rep(30, 50, 9, 5)
    assert not np.array_equal(small.labeled_x, other.labeled_x)


def test_streams():
    a = stream(1, 2, "labeled").integers(0, 2**62, size=4)
    b = stream(1, 2, 0).integers(0, 2**62, size=4)
    c = stream(1, 2, "unlabeled").integers(0, 2**62, size=4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert seed_for(3, 0, "density") == seed_for(3, 0, "density")
    u = uniform_open(stream(0, 0, 0), 100000)
    assert u.min() > 0 and u.max() < 1
    z = standard_normal(stream(0, 0, 0), 100000)
    assert abs(z.mean()) < 0.02 and abs(z.std() - 1) < 0.02


def test_unknown_model():
    with pytest.raises(UnknownNameError) as info:
        make_model("var_modle1")
    assert "var_model1" in str(info.value)
    assert "be_adversarial" in model_names()
    with pytest.raises(ConfigError):
        make_model("kendall_model", rho=1.0)


def test_single_rep_and_zero_regressor():
    cfg = SimConfig("linear_gauss", 20, 30, ["cross@const"], reps=1, base_seed=1,
                    model_params={"mu": 1.0})
    rep = run_mse_experiment(cfg)
    assert rep.metric("classical", "mse_ratio") == 1.0
    assert math.isclose(rep.metric("cross@const", "mse_ratio"), 1.0, rel_tol=1e-12)
    assert rep.metric("classical", "mean") == rep.metric("cross@const", "mean")


def test_mse_decomposition():
    cfg = SimConfig("var_model1", 40, 100, ["oracle", "cross@ols"], reps=60, base_seed=5)
    rep = run_mse_experiment(cfg)
    for row in rep.rows:
        assert math.isclose(row["mse"], row["variance"] + row["bias"] ** 2, rel_tol=1e-9)
        assert math.isclose(row["bias"], row["mean"] - row["psi"], abs_tol=1e-12)
        assert 0 <= row["kolmogorov"] <= 1


def test_determinism_across_jobs():
    base = dict(model="mu2_model1", n=30, m=60, estimators=["oracle", "cross@knn:k=3"],
                reps=12, base_seed=3, model_params={"mu": 0.5})
    a = run_mse_experiment(SimConfig(**base))
    b = run_mse_experiment(SimConfig(**base, jobs=3))
    c = run_mse_experiment(SimConfig(**base))
    assert a.results() == b.results() == c.results()


def test_m_sweep_reuses_draws():
    cfg = SimConfig("var_model1", 30, 0, ["oracle"], reps=5, base_seed=2,
                    sweep_param="m", sweep_values=[0, 40])
    rep = run_mse_experiment(cfg)
    # m = 0 collapses every estimator to the classical U-statistic
    assert rep.metric("oracle", "mean", "m=0") == rep.metric("classical", "mean", "m=0")
    assert rep.metric("classical", "mean", "m=0") == rep.metric("classical", "mean", "m=40")


def test_alpha_near_one_always_rejects():
    cfg = SimConfig("kendall_model", 60, 100, ["kendall-classical", "kendall-ss@knn:k=5"],
                    reps=40, base_seed=1, kind="test", alpha=0.999)
    rep = run_test_experiment(cfg)
    for row in rep.rows:
        assert row["rejection_rate"] >= 0.95


def test_kendall_classical_size():
    cfg = SimConfig("kendall_model", 500, 0, ["kendall-classical"], reps=2000, base_seed=11,
                    kind="test")
    rate = run_test_experiment(cfg).metric("kendall-classical", "rejection_rate")
    assert abs(rate - 0.05) <= 0.015


def test_classical_variance_matches_theory():
    # Var of the sample variance of N(0, 5.09): 2 sigma^4/(n-1)
    n = 200
    cfg = SimConfig("var_model1", n, 0, ["classical"], reps=2000, base_seed=4)
    var = run_mse_experiment(cfg).metric("classical", "variance")
    assert abs(var / (2 * 5.09**2 / (n - 1)) - 1) < 0.15


def test_kolmogorov_examples():
    q = norm.ppf((np.arange(1, 1001) - 0.5) / 1000)
    assert empirical_kolmogorov(q) < 0.01
    assert empirical_kolmogorov([0.0]) == 0.5
    assert gap_at([0.0], 0.0) == 0.5
    with pytest.raises(DataError):
        empirical_kolmogorov([])
    with pytest.raises(DataError):
        empirical_kolmogorov([np.nan])


def test_report_serialisation(tmp_path):
    cfg = SimConfig("linear_gauss", 20, 20, ["oracle"], reps=3, base_seed=1,
                    experiment="toy")
    rep = run_experiment(cfg)
    d = json.loads(rep.to_json())
    assert d["schema_version"] == 1 and d["config"]["experiment"] == "toy"
    lines = rep.to_csv().splitlines()
    assert lines[0] == "experiment,estimator,param,metric,value"
    assert all(line.startswith("toy,") for line in lines[1:])


def test_config_validation_and_round_trip():
    cfg = SimConfig.from_dict({"model": "mu2_model1", "n": 10, "m": 5,
                               "estimators": ["cross@ols"], "base_seed": 1,
                               "model_params": {"mu": 1.0}})
    assert cfg.estimators == ["classical", "cross@ols"]
    again = SimConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()
    bad = [
        {"model": "mu2_model1", "n": 10, "m": 5, "estimators": ["cross@ols"], "nn": 3},
        {"model": "mu2_model1", "n": 10, "estimators": ["cross@ols"]},
        {"model": "mu2_model1", "n": 0, "m": 5, "estimators": ["oracle"]},
        {"model": "mu2_model1", "n": 10, "m": 5, "estimators": ["oracle"], "alpha": 1.0},
        {"model": "mu2_model1", "n": 10, "m": 5, "estimators": ["cross@nope"]},
        {"model": "mu2_model1", "n": 10, "m": 5, "estimators": []},
        {"model": "mu2_model1", "n": 10, "m": 5, "estimators": ["oracle"], "sweep_param": "m"},
        {"model": "mu2_model1", "n": 10, "m": 5, "estimators": ["oracle"], "kind": "other"},
        {"model": "be_adversarial", "n": 10, "m": 5, "estimators": ["cross"],
         "kind": "adversarial"},
    ]
    for data in bad:
        with pytest.raises((ConfigError, UnknownNameError)):
            SimConfig.from_dict(data)
    with pytest.raises(ConfigError):
        run_mse_experiment(SimConfig("linear_gauss", 10, 5, ["oracle"], reps=2))


def test_be_predictions():
    assert sd_ratio(0.0, 100, 1000) == 1.0
    assert predicted_distance(0.0, 100, 1000) == 0.0
    assert predicted_gap(0.0, 100, 1000) == 0.0
    # s < 1 for small eps, so P(Z s <= 1) > Phi(1)
    assert predicted_gap(0.04, 1000, 10000) > 0
    d = [predicted_distance(e, 1000, 10000) for e in (0.01, 0.04, 0.16)]
    assert d[0] < d[1] < d[2]
    assert math.isclose(fit_sqrt_constant([0.0, 0.01, 0.04], [0.0, 0.01, 0.01]), 0.05)
    with pytest.raises(ConfigError):
        fit_sqrt_constant([0.0], [0.0])


def test_be_zero_eps_is_normal():
    cfg = SimConfig("be_adversarial", 100, 100, ["cross"], reps=2000, base_seed=1,
                    kind="adversarial", sweep_param="eps", sweep_values=[0.0, 0.25])
    rep, values = run_be_adversarial(cfg, return_values=True)
    assert values.shape == (2000, 2)
    assert rep.rows[0]["kolmogorov"] < 0.04
    assert abs(rep.rows[0]["variance"] - 1) < 0.1
    assert abs(rep.rows[1]["variance"] / sd_ratio(0.25, 100, 100) ** 2 - 1) < 0.1
