"""Independent reference values used by several test modules."""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, stats


def gaussian_tv_exact(mu1, s1, mu2, s2, n):
    """Exact TV of ``N(mu1, s1^2)^n`` vs ``N(mu2, s2^2)^n``.

    Handles equal scales (closed form), equal means (chi-square sufficient
    statistic) and ``n = 1`` (direct quadrature).
    """
    if s1 == s2:
        return 2 * stats.norm.cdf(math.sqrt(n) * abs(mu1 - mu2) / (2 * s1)) - 1
    if mu1 == mu2:
        f1 = lambda s: stats.chi2.pdf(s / s1**2, n) / s1**2
        f2 = lambda s: stats.chi2.pdf(s / s2**2, n) / s2**2
        # S = sum (x - mu)^2; the two densities cross once
        hi = 60 * max(s1, s2) ** 2 * n
        r = (s2 / s1) ** 2
        cross = n * s1**2 * s2**2 * math.log(r) / (s2**2 - s1**2)
        return 0.5 * integrate.quad(lambda s: abs(f1(s) - f2(s)), 0, hi, points=[cross], limit=200)[0]
    if n != 1:
        raise ValueError("general case only for n = 1")
    lo = min(mu1 - 14 * s1, mu2 - 14 * s2)
    hi = max(mu1 + 14 * s1, mu2 + 14 * s2)
    g = lambda x: abs(stats.norm.pdf(x, mu1, s1) - stats.norm.pdf(x, mu2, s2))
    return 0.5 * integrate.quad(g, lo, hi, limit=400)[0]


def product_tv_bruteforce(p, q, n):
    """Exact TV of ``p^n`` vs ``q^n`` over a finite support by enumeration."""
    p, q = np.asarray(p, float), np.asarray(q, float)
    P, Q = p, q
    for _ in range(n - 1):
        P = np.multiply.outer(P, p)
        Q = np.multiply.outer(Q, q)
    return 0.5 * float(np.abs(P - Q).sum())
