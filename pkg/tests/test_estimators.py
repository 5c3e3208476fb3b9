import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from ssustat import (
    DataError,
    FoldTooSmallError,
    NumericalFailure,
    SemiDataset,
    SemiSupervisedUStatistic,
    confidence_interval,
    get_kernel,
    lambda_hat,
    u_classical,
    u_cross,
    u_oracle,
    u_plug,
    u_single,
    u_statistic,
)
from ssustat.estimators import (
    LAMBDA_FLOOR,
    MomentSummary,
    aggregation_coef,
    control_variate_coef,
    cross_fit_models,
    cross_scores,
    ell1_hat_labeled,
    improvement_ratio,
    lambda_nm_f,
)
from ssustat.regress import ConstantRegressor, OLSRegressor

from oracles import naive_cross, naive_lambda

SCALAR = ["mean", "variance", "gini", "product", "wilcoxon"]


def random_ds(rng, n, m, d=2, q=1):
    X = rng.normal(size=(n, d))
    Y = X[:, :q] + 0.5 * rng.normal(size=(n, q))
    return SemiDataset(X, Y, rng.normal(size=(m, d)))


def test_oracle_hand_example():
    ds = SemiDataset([[1.0]], [2.0], [[3.0]])
    assert u_oracle(ds, "mean", lambda X: X[:, 0]) == 3.0


@pytest.mark.parametrize("name", SCALAR + ["kendall"])
def test_zero_and_constant_assistants_recover_u(name, rng):
    k = get_kernel(name)
    for _ in range(100):
        n, m = int(rng.integers(4, 30)), int(rng.integers(0, 30))
        ds = random_ds(rng, n, m, q=k.arity)
        u = u_statistic(k, ds.labeled_y)
        c = float(rng.normal())
        for spec in (ConstantRegressor(0.0), ConstantRegressor(c)):
            assert abs(u_cross(ds, k, spec, with_lambda=False).point - u) < 1e-10
            assert abs(u_plug(ds, k, spec, with_lambda=False).point - u) < 1e-10
        assert abs(u_oracle(ds, k, lambda X: np.full(len(X), c)) - u) < 1e-10


@pytest.mark.parametrize("name", SCALAR)
def test_m_zero_collapses(name, rng):
    k = get_kernel(name)
    for _ in range(20):
        ds = random_ds(rng, int(rng.integers(4, 40)), 0)
        u = u_statistic(k, ds.labeled_y)
        assert abs(u_cross(ds, k, "knn:k=2").point - u) < 1e-10
        assert abs(u_plug(ds, k, "ols").point - u) < 1e-10
        assert abs(u_oracle(ds, k, lambda X: np.sin(X[:, 0])) - u) < 1e-10


def test_cross_matches_brute_force_display(rng):
    for name in ("mean", "variance", "product", "gini"):
        k = get_kernel(name)
        for _ in range(30):
            n, m = int(rng.integers(4, 13)), int(rng.integers(0, 9))
            ds = random_ds(rng, n, m)
            f1, f2 = cross_fit_models(ds, k, "ols")
            g1 = lambda x: float(f1.predict(np.asarray(x).reshape(1, -1))[0])  # noqa: E731
            g2 = lambda x: float(f2.predict(np.asarray(x).reshape(1, -1))[0])  # noqa: E731
            ref = naive_cross(k, ds.labeled_y, ds.labeled_x, ds.unlabeled_x, g1, g2)
            est = u_cross(ds, k, "ols")
            assert abs(est.point - ref) < 1e-10


def test_lambda_hat_matches_brute_force_display(rng):
    for name in ("mean", "variance", "product", "gini", "wilcoxon"):
        k = get_kernel(name)
        for _ in range(20):
            n, m = int(rng.integers(4, 13)), int(rng.integers(0, 9))
            ds = random_ds(rng, n, m)
            s = rng.normal(size=n)
            e1 = ell1_hat_labeled(ds, k)
            ref = naive_lambda(k, ds.labeled_y, s, e1, m)
            got = lambda_hat(ds, k, s)
            if ref >= LAMBDA_FLOOR:
                assert math.isclose(got.lambda_hat, ref, rel_tol=1e-9, abs_tol=1e-10)
            else:
                assert got.clamped and got.lambda_hat == LAMBDA_FLOOR


def test_plug_hand_unrolled():
    X = np.array([[0.0], [1.0], [3.0]])
    y = np.array([1.0, 2.0, 4.0])
    ds = SemiDataset(X, y, [[2.0]])
    # OLS through (0,1),(1,2),(3,4) is y = 1 + x exactly
    f = [1.0, 2.0, 4.0, 3.0]
    want = np.mean(y) - sum(f[:3]) / 3 + sum(f) / 4
    assert math.isclose(u_plug(ds, "mean", "ols").point, want, rel_tol=1e-12)


def test_single_examples():
    ds = SemiDataset([[1.0], [2.0]], [5.0, 7.0], [[4.0]])
    zero = ConstantRegressor(0.0).fit([[0.0]], [0.0])
    const = ConstantRegressor(3.0).fit([[0.0]], [0.0])
    assert u_single(ds, "mean", zero).point == 6.0
    assert u_single(ds, "mean", const).point == 6.0
    ident = OLSRegressor().fit([[0.0], [1.0]], [0.0, 1.0])
    # 6 - (1 + 2)/2 + (1 + 2 + 4)/3
    assert math.isclose(u_single(ds, "mean", ident).point, 6 - 1.5 + 7 / 3, rel_tol=1e-12)


@given(st.floats(-1e3, 1e3))
def test_shift_invariance(c):
    g = np.random.default_rng(3)
    ds = random_ds(g, 20, 15)
    k = get_kernel("variance")
    f1, f2 = cross_fit_models(ds, k, "knn:k=3")
    s = cross_scores(ds, f1, f2)
    from ssustat.estimators import corrected_point

    u = u_statistic(k, ds.labeled_y)
    assert abs(corrected_point(u, 2, s + c, 20) - corrected_point(u, 2, s, 20)) < 1e-10
    base = u_oracle(ds, k, lambda X: X[:, 0] ** 2)
    assert abs(u_oracle(ds, k, lambda X: X[:, 0] ** 2 + c) - base) < 1e-10


def test_lambda_examples(rng):
    ds = random_ds(rng, 30, 0)
    k = get_kernel("variance")
    from ssustat import jackknife_sigma2

    s2 = jackknife_sigma2(k, ds.labeled_y)
    assert math.isclose(lambda_hat(ds, k, rng.normal(size=30)).lambda_hat, 4 * s2, rel_tol=1e-12)
    ds = random_ds(rng, 30, 70)
    s2 = jackknife_sigma2(k, ds.labeled_y)
    e1 = ell1_hat_labeled(ds, k)
    lh = lambda_hat(ds, k, e1)
    assert math.isclose(lh.tau_hat, -lh.sigma2_hat, rel_tol=1e-12)
    assert math.isclose(lh.lambda_hat, 4 * s2 * 30 / 100, rel_tol=1e-12)
    bad = lambda_hat(ds, k, e1 * 0 + 1e-9 * np.arange(30), ell1_values=e1)
    assert bad.lambda_hat >= LAMBDA_FLOOR


def test_lambda_floor_clamps():
    # raw Lambda >= 4 s2 n/(n+m), so it reaches the floor only when s2 and the residual vanish
    from ssustat.estimators import lambda_from_parts

    lh = lambda_from_parts(10, 10**6, 2, 0.0, 0.0)
    assert lh.clamped and lh.lambda_hat == LAMBDA_FLOOR
    ok = lambda_from_parts(10, 0, 2, 1.0, 0.0)
    assert not ok.clamped and ok.lambda_hat == 4.0
    ds = SemiDataset(np.arange(8.0).reshape(-1, 1), np.full(8, 2.0), np.zeros((5, 1)))
    est = u_cross(ds, "variance", "knn:k=2")
    assert est.diagnostics["clamped"] and est.lambda_hat == LAMBDA_FLOOR


@given(st.integers(1, 10**6), st.integers(0, 10**6), st.floats(0, 10), st.floats(0, 10))
def test_lambda_floor_property(n, m, s2, resid):
    from ssustat.estimators import lambda_from_parts

    lh = lambda_from_parts(n, m, 2, s2, resid)
    assert lh.lambda_hat >= LAMBDA_FLOOR
    assert lh.clamped == (4 * s2 + 4 * m * (resid - s2) / (n + m) < LAMBDA_FLOOR)


def test_lambda_nm_f_examples():
    mom = MomentSummary(var_ell1=3.0, var_f=2.0, cov_f_psi1=0.5)
    assert lambda_nm_f(10, 0, 2, mom) == 12.0
    at = MomentSummary.at_psi1(sigma1_sq=1.0, sigma2_sq=2.0)
    assert at.var_ell1 == at.sigma1_sq + at.sigma2_sq
    assert math.isclose(lambda_nm_f(10, 30, 2, at), 4 * 1.0 + 4 * 10 / 40 * 2.0)
    zero = MomentSummary(var_ell1=3.0, var_f=0.0, cov_f_psi1=0.0)
    assert lambda_nm_f(10, 999, 2, zero) == 12.0


@given(st.floats(-3, 3).filter(lambda e: abs(e) > 1e-3), st.floats(0.1, 5), st.floats(0.1, 5),
       st.floats(-1, 1))
def test_lambda_minimised_at_psi1(eps, s1, s2, corr):
    # f = psi1 + eps g with Var g = 1, Cov(g, psi1) = corr sqrt(s2)
    cov_g = corr * math.sqrt(s2)
    best = lambda_nm_f(100, 400, 2, MomentSummary.at_psi1(s1, s2))
    var_f = s2 + 2 * eps * cov_g + eps * eps
    other = lambda_nm_f(100, 400, 2, MomentSummary(s1 + s2, var_f, s2 + eps * cov_g))
    assert best <= other + 1e-12


def test_lambda_minimised_gaussian_linear_candidates():
    # Y = X + e, mean kernel: psi1 = x with sigma1^2 = sigma2^2 = 1;
    # candidates psi1 + eps g with g = x^2 - 1 (Var g = 2, Cov(g, x) = 0)
    best = lambda_nm_f(100, 900, 1, MomentSummary.at_psi1(1.0, 1.0))
    for eps in np.linspace(-1, 1, 11):
        if eps == 0:
            continue
        cand = MomentSummary(2.0, 1.0 + 2 * eps * eps, 1.0)
        assert best < lambda_nm_f(100, 900, 1, cand)


def test_ratio_and_coefficient_examples(rng):
    a = rng.normal(size=50)
    assert math.isclose(improvement_ratio(a, a), 1.0)
    assert math.isclose(improvement_ratio(a, 2 * a), 0.5)
    assert math.isclose(control_variate_coef(a, 2 * a), 0.5)
    with pytest.raises(NumericalFailure):
        improvement_ratio(a, np.ones(50))
    with pytest.raises(NumericalFailure):
        control_variate_coef(a, np.zeros(50))


def test_control_variate_population_case():
    g = np.random.default_rng(9)
    x = g.normal(size=200000)
    y = x + g.normal(size=200000)
    # ell1 = y for the mean kernel, psi1 = x
    assert abs(control_variate_coef(y, x) - 1.0) < 0.01


def test_aggregation(rng):
    a = rng.normal(size=60)
    f = rng.normal(size=60)
    coef, ridge = aggregation_coef(a, f)
    assert not ridge and math.isclose(coef[0], control_variate_coef(a, f))
    # empirically orthogonal centred columns
    q, _ = np.linalg.qr(rng.normal(size=(60, 2)) - rng.normal(size=(60, 2)).mean(0))
    F = q - q.mean(0)
    F[:, 1] -= F[:, 0] * (F[:, 0] @ F[:, 1]) / (F[:, 0] @ F[:, 0])
    coef, _ = aggregation_coef(a, F)
    np.testing.assert_allclose(coef, [control_variate_coef(a, F[:, 0]),
                                      control_variate_coef(a, F[:, 1])], rtol=1e-9)
    coef, ridge = aggregation_coef(a, np.column_stack([f, f]))
    assert ridge
    np.testing.assert_allclose(coef.sum(), control_variate_coef(a, f), rtol=1e-6)


def test_confidence_interval_examples():
    assert confidence_interval(1.5, 0.0, 10) == (1.5, 1.5)
    lo, hi = confidence_interval(0.0, 1.0, 100, 0.05)
    assert math.isclose(hi, 0.1959963984540054, rel_tol=1e-12) and lo == -hi
    lo, hi = confidence_interval(0.0, 1.0, 1, 0.5)
    assert math.isclose(hi, 0.6744897501960817, rel_tol=1e-12)
    with pytest.raises(DataError):
        confidence_interval(0.0, -1.0, 10)
    with pytest.raises(DataError):
        confidence_interval(0.0, 1.0, 10, alpha=1.0)


def test_estimate_invariants(rng):
    ds = random_ds(rng, 40, 60)
    for est in (u_classical(ds, "variance"), u_cross(ds, "variance", "knn:k=5"),
                u_plug(ds, "gini", "ols"), u_cross(ds, "variance", "ols", generic_ell1=True)):
        assert est.ci_low <= est.point <= est.ci_high
        width = 2 * norm.ppf(0.975) * math.sqrt(est.lambda_hat / est.n)
        assert math.isclose(est.ci_high - est.ci_low, width, rel_tol=1e-12)
        assert {"sigma2_hat", "tau_hat", "clamped", "improvement_ratio"} <= set(est.diagnostics)
        assert est.to_dict()["point"] == est.point


def test_generic_ell1_path(rng):
    ds = random_ds(rng, 24, 10)
    est = u_cross(ds, "variance", "ols", use_analytic_ell1=False, generic_ell1=True)
    assert np.isfinite(est.point) and est.lambda_hat > 0


def test_cross_needs_folds():
    ds = SemiDataset([[0.0], [1.0], [2.0]], [1.0, 2.0, 3.0])
    with pytest.raises(FoldTooSmallError):
        u_cross(ds, "mean", "ols")


def test_sklearn_facade(rng):
    ds = random_ds(rng, 30, 50)
    est = SemiSupervisedUStatistic(kernel="variance", method="cross", regressor="knn:k=3")
    est.fit(ds.labeled_x, ds.labeled_y, ds.unlabeled_x)
    assert est.point_ == u_cross(ds, "variance", "knn:k=3").point
    assert est.get_params()["regressor"] == "knn:k=3"
    from sklearn.base import clone

    assert clone(est).get_params() == est.get_params()
    with pytest.raises(DataError):
        SemiSupervisedUStatistic(method="nope").fit(ds.labeled_x, ds.labeled_y)
    single = SemiSupervisedUStatistic(kernel="mean", method="oracle",
                                      assistant=lambda X: X[:, 0]).fit(ds.labeled_x, ds.labeled_y,
                                                                      ds.unlabeled_x)
    assert single.estimate_.method == "oracle"


def _even_unbiased_values(reps):
    from ssustat.sim import make_model

    model = make_model("linear_gauss", mu=1.0)
    out = []
    for r in range(reps):
        ds = model.generate_rep(20, 40, 77, r)
        out.append(u_cross(ds, "mean", "knn:k=3", with_lambda=False).point)
    return np.array(out)


def test_cross_unbiased_even_sizes():
    vals = _even_unbiased_values(3000)
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - 1.0) < 3 * se


def test_oracle_more_efficient_than_u():
    from ssustat.sim import make_model

    model = make_model("linear_gauss", mu=0.5)
    u, o = [], []
    for r in range(2000):
        ds = model.generate_rep(50, 200, 5, r)
        u.append(u_statistic("mean", ds.labeled_y))
        o.append(u_oracle(ds, "mean", model.psi1))
    u, o = np.array(u), np.array(o)
    vu, vo = u.var(ddof=1), o.var(ddof=1)
    # standard error of a sample variance is about var * sqrt(2/(R-1))
    se = math.sqrt(2 / 1999) * math.hypot(vu, vo)
    assert vu - vo > 3 * se
