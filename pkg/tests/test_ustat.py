import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ssustat import DataError, get_kernel, jackknife_sigma2, u_statistic
from ssustat.ustat import u_leave_one_out, u_statistic_result

from oracles import naive_jackknife, naive_loo, naive_u

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize("name, sample, expected", [
    ("variance", [1, 2, 3], 1.0),
    ("mean", [2, 4], 3.0),
    ("kendall", [[1, 1], [2, 2], [3, 3]], 1.0),
])
def test_u_examples(name, sample, expected):
    assert u_statistic(name, sample) == expected


def test_loo_examples():
    np.testing.assert_allclose(u_leave_one_out("mean", [1, 2, 3]), [2.5, 2.0, 1.5])
    np.testing.assert_allclose(u_leave_one_out("variance", [1, 2, 3]), [0.5, 2.0, 0.5])
    np.testing.assert_allclose(u_leave_one_out("gini", [4, 4, 4, 4]), [0, 0, 0, 0])


def test_jackknife_examples():
    assert jackknife_sigma2("mean", [1, 2, 3]) == 1.0
    assert jackknife_sigma2("variance", [5, 5, 5, 5]) == 0.0
    # brute force: U = 1, deviations (-0.5, 1, -0.5), ((3-1)/4) * 1.5
    assert math.isclose(jackknife_sigma2("variance", [1, 2, 3]), 0.75, rel_tol=1e-15)
    assert math.isclose(naive_jackknife(get_kernel("variance"), [[1], [2], [3]]), 0.75)


@pytest.mark.parametrize("name", ["variance", "gini", "product", "kendall", "wilcoxon"])
def test_against_brute_force(name, rng):
    k = get_kernel(name)
    for n in (3, 5, 9):
        Y = np.round(rng.normal(size=(n, k.arity)), 1)
        assert math.isclose(u_statistic(k, Y), naive_u(k, Y), rel_tol=1e-12, abs_tol=1e-12)
        np.testing.assert_allclose(u_leave_one_out(k, Y), naive_loo(k, Y), atol=1e-12)
        assert math.isclose(jackknife_sigma2(k, Y), naive_jackknife(k, Y),
                            rel_tol=1e-10, abs_tol=1e-12)


def test_order3_against_brute_force(rng):
    from ssustat import Kernel, register_kernel

    k = register_kernel(Kernel("ustat_triple", 3,
                               lambda a, b, c: np.maximum(np.maximum(a[:, 0], b[:, 0]), c[:, 0])),
                        overwrite=True)
    Y = rng.normal(size=(7, 1))
    assert math.isclose(u_statistic(k, Y), naive_u(k, Y), rel_tol=1e-12)
    np.testing.assert_allclose(u_leave_one_out(k, Y), naive_loo(k, Y), atol=1e-12)


@pytest.mark.parametrize("name", ["variance", "gini", "kendall"])
def test_loo_weighted_identity(name, rng):
    k = get_kernel(name)
    n, r = 30, k.order
    res = u_statistic_result(k, rng.normal(size=(n, k.arity)), leave_one_out=True)
    lhs = math.comb(n - 1, r) * math.fsum(res.leave_one_out)
    rhs = (n - r) * math.comb(n, r) * res.value
    assert math.isclose(lhs, rhs, rel_tol=1e-9, abs_tol=1e-9)


@given(arrays(np.float64, st.integers(2, 60), elements=finite))
def test_jackknife_r1_is_sample_variance(y):
    jk = jackknife_sigma2("mean", y)
    var = float(np.var(y, ddof=1))
    assert math.isclose(jk, var, rel_tol=1e-12, abs_tol=1e-9)


def test_jackknife_r1_hundred_instances(rng):
    for _ in range(100):
        y = rng.normal(size=rng.integers(2, 80)) * rng.uniform(0.1, 10)
        assert math.isclose(jackknife_sigma2("mean", y), np.var(y, ddof=1), rel_tol=1e-12)


@given(arrays(np.float64, st.integers(2, 40), elements=finite), st.randoms())
def test_permutation_invariance(y, rand):
    perm = list(range(y.size))
    rand.shuffle(perm)
    for name in ("variance", "gini", "product", "wilcoxon"):
        assert math.isclose(u_statistic(name, y), u_statistic(name, y[perm]),
                            rel_tol=1e-12, abs_tol=1e-9)


def test_size_cap_and_override():
    with pytest.raises(DataError, match="size cap"):
        u_statistic("variance", np.zeros(5001))
    assert u_statistic("variance", np.zeros(5001), max_n=6000) == 0.0
    with pytest.raises(DataError):
        u_statistic("variance", [1.0])


def test_compensated_sum_keeps_digits():
    y = np.concatenate([[1e8], np.ones(3000)])
    assert u_statistic("mean", y) == (1e8 + 3000) / 3001


def test_variance_kernel_unbiased():
    g = np.random.default_rng(0)
    vals = np.array([u_statistic("variance", g.normal(size=30)) for _ in range(5000)])
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - 1.0) < 3 * se


@pytest.mark.parametrize("name, target", [("mean", 1.0), ("variance", 2.0)])
def test_monte_carlo_variance_of_u(name, target):
    g = np.random.default_rng(1)
    n = 1000
    vals = np.array([u_statistic(name, g.normal(size=n)) for _ in range(5000)])
    assert abs(vals.var(ddof=1) * n / target - 1) < 0.10
