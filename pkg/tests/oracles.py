"""Independent reference implementations used by the tests."""

from __future__ import annotations

import math


def knn_oracle(xs, ys, x_star, k, moment=1):
    """Brute force: sort every stored point by (Euclidean distance, arrival index).

    Squared differences are added in coordinate order, so the float distance
    is reproducible and exact ties are recognised.
    """
    def dist(p):
        s = 0.0
        for a, b in zip(p, x_star):
            s += (a - b) * (a - b)
        return math.sqrt(s)

    order = sorted(range(len(xs)), key=lambda i: (dist(xs[i]), i))
    chosen = order[:k]
    return math.fsum(ys[i] if moment == 1 else ys[i] * ys[i] for i in chosen) / k


def nw_oracle(xs, ys, x_star, h, moment=1):
    """Direct summation of Gaussian kernel weights; plain mean once the weights vanish."""
    num = den = 0.0
    for x, y in zip(xs, ys):
        d2 = math.fsum((a - b) ** 2 for a, b in zip(x, x_star))
        w = math.exp(-d2 / (2.0 * h * h))
        num += w * y ** moment
        den += w
    if den < 1e-12:
        return math.fsum(y ** moment for y in ys) / len(ys)
    return num / den


def sample_sd_mean(xs):
    """Mean over coordinates of the sample standard deviation (ddof=1)."""
    n, d = len(xs), len(xs[0])
    out = []
    for j in range(d):
        col = [x[j] for x in xs]
        m = math.fsum(col) / n
        out.append(math.sqrt(math.fsum((c - m) ** 2 for c in col) / (n - 1)))
    return math.fsum(out) / d
