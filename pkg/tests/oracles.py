"""Independent reference values, written without importing the package.

The rank-one oracle: with K = 1 on (0, 1) every solution is a constant
``c`` with ``c - f(c) = t``, because ``L0 u = int u`` is a constant.
"""

import math

import numpy as np


def pw(a_neg, A_pos):
    return lambda s: a_neg * s if s <= 0 else A_pos * s


def scalar_roots(f, t, lo=-1e3, hi=1e3, n=200_001):
    """All roots of ``c - f(c) = t`` on [lo, hi]: sign changes on a grid, then bisection."""
    cs = np.linspace(lo, hi, n)
    h = np.array([c - f(c) - t for c in cs])
    roots = [float(c) for c, v in zip(cs, h) if v == 0.0]
    for i in np.nonzero(h[:-1] * h[1:] < 0)[0]:
        a, b = cs[i], cs[i + 1]
        for _ in range(200):
            m = 0.5 * (a + b)
            if (a - f(a) - t) * (m - f(m) - t) <= 0:
                b = m
            else:
                a = m
        roots.append(0.5 * (a + b))
    return sorted(roots)


def scalar_picard(f, t, c0, M, steps=10_000, tol=1e-14):
    c = c0
    for _ in range(steps):
        nxt = c + (c - f(c) - t) / M
        if abs(nxt - c) < tol:
            return nxt
        c = nxt
    return c


def poly_rank2_lambda1(c0=1.0, c1=1.0):
    """Top eigenvalue of ``u -> int (c0 + c1 x y) u(y) dy`` on (0, 1).

    The range is span{1, x}; in that basis the operator acts as
    diag(c0, c1) @ G with G the moment matrix [[1, 1/2], [1/2, 1/3]].
    """
    Mx = np.diag([c0, c1]) @ np.array([[1.0, 0.5], [0.5, 1.0 / 3.0]])
    tr, det = np.trace(Mx), np.linalg.det(Mx)
    return 0.5 * (tr + math.sqrt(tr * tr - 4 * det))


LAMBDA_POLY = (4 + math.sqrt(13)) / 6


def gaussian_rowsum(x, amplitude=1.0, width=1.0, lo=0.0, hi=1.0):
    """``int_lo^hi amp exp(-(x-y)^2 / (2 width^2)) dy`` in closed form."""
    s = width * math.sqrt(2.0)
    return amplitude * width * math.sqrt(math.pi / 2) * (math.erf((hi - x) / s) - math.erf((lo - x) / s))
