"""Naive reference implementations used as test oracles.

Everything here is written straight from the defining sums with Python
loops; nothing is shared with the package except kernel evaluation.
"""

import itertools
import math

import numpy as np


def kernel_value(k, rows):
    return float(k.func(*[np.asarray(r, dtype=float).reshape(1, -1) for r in rows])[0])


def naive_u(k, Y):
    Y = np.asarray(Y, dtype=float).reshape(len(Y), -1)
    vals = [kernel_value(k, [Y[i] for i in c])
            for c in itertools.combinations(range(len(Y)), k.order)]
    return math.fsum(vals) / len(vals)


def naive_loo(k, Y):
    Y = np.asarray(Y, dtype=float).reshape(len(Y), -1)
    return np.array([naive_u(k, np.delete(Y, i, axis=0)) for i in range(len(Y))])


def naive_jackknife(k, Y):
    n = len(Y)
    loo = naive_loo(k, Y)
    u = naive_u(k, Y)
    return (n - 1) / k.order**2 * math.fsum((loo - u) ** 2)


def naive_corrected(k, Y, scores_lab, scores_unl):
    """``U - (r/n) sum_lab f + (r/(n+m)) sum_all f``."""
    n, m, r = len(scores_lab), len(scores_unl), k.order
    u = naive_u(k, Y)
    total = sum(scores_lab) + sum(scores_unl)
    return u - r / n * sum(scores_lab) + r / (n + m) * total


def naive_cross(k, Y, X_lab, X_unl, f1, f2):
    """Cross-fit display: ``f2`` scores fold-1 rows, ``f1`` scores fold-2 rows."""
    n, m = len(X_lab), len(X_unl)
    h, g = n // 2, m // 2
    lab = [f2(X_lab[i]) if i < h else f1(X_lab[i]) for i in range(n)]
    unl = [f2(X_unl[j]) if j < g else f1(X_unl[j]) for j in range(m)]
    return naive_corrected(k, Y, lab, unl)


def naive_lambda(k, Y, scores_lab, ell1_lab, m):
    """``r^2 s2 + r^2 m/(n+m) * tau`` with ``tau = var(f - ell1) - s2`` (1/n normalised)."""
    n, r = len(Y), k.order
    s2 = naive_jackknife(k, Y)
    d = [scores_lab[i] - ell1_lab[i] for i in range(n)]
    dbar = sum(d) / n
    tau = sum((di - dbar) ** 2 for di in d) / n - s2
    return r * r * s2 + r * r * m / (n + m) * tau


def naive_adapt(k, Y, n, N, ell1, ell2):
    """Six-term display summed over ordered pairs ``i != j`` of the stacked rows.

    ``ell1(i, j)`` is only queried for labeled ``i``.
    """
    total = 0.0
    for i in range(N):
        for j in range(N):
            if i == j:
                continue
            di, dj = float(i < n), float(j < n)
            term = di * dj / n**2 * ell2(i, j) + ell2(i, j) / N**2 - 2 * di / (n * N) * ell2(i, j)
            if di:
                term += 2 / (n * N) * ell1(i, j) - 2 * dj / n**2 * ell1(i, j)
                if dj:
                    term += kernel_value(k, [Y[i], Y[j]]) / n**2
            total += term
    return N / (N - 1) * total


def naive_kolmogorov(z):
    """Scan a fine grid plus both sides of every jump."""
    from scipy.stats import norm

    z = np.sort(np.asarray(z, dtype=float))
    best = 0.0
    for t in z:
        for side in (np.nextafter(t, -np.inf), t):
            best = max(best, abs(np.mean(z <= side) - norm.cdf(side)))
    return best
