"""Increasing nonlinearities ``f(x, s)`` and sampled audits of their growth hypotheses.

Both built-in families are independent of ``x``; the evaluation signature
keeps ``x`` so callers do not need to care.

``piecewise_linear(a_neg, A_pos)``
    ``f(s) = a_neg * s`` for ``s <= 0`` and ``A_pos * s`` for ``s > 0``.
``smooth_ap(a, A)``
    ``f(s) = a s + (A - a) log(1 + e^s)``, slope increasing from ``a`` to ``A``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .exceptions import HypothesisError

__all__ = [
    "Nonlinearity",
    "HypothesisReport",
    "eval_f",
    "slopes",
    "audit_hypotheses",
    "c1_offset",
    "NONLINEARITY_FAMILIES",
]

NONLINEARITY_FAMILIES = ("piecewise_linear", "smooth_ap")

TAIL_POINT = -1.0e4
TAIL_TOL = 1e-3


@dataclass(frozen=True)
class Nonlinearity:
    """A nonlinearity family plus the declared offset ``C`` of the superlinear bound.

    The slopes ``A`` (growth at ``+inf``) and ``a`` (growth at ``-inf``) are
    read off the family parameters.
    """

    family: str
    params: Mapping[str, float] = field(default_factory=dict)
    C: float = 0.0

    def __post_init__(self):
        if self.family not in NONLINEARITY_FAMILIES:
            raise ValueError(f"unknown nonlinearity family {self.family!r}; choose from {NONLINEARITY_FAMILIES}")
        params = {k: float(v) for k, v in dict(self.params).items()}
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "C", float(self.C))
        if self.family == "piecewise_linear":
            if set(params) != {"a_neg", "A_pos"}:
                raise ValueError(f"piecewise_linear needs a_neg and A_pos, got {sorted(params)}")
            if not (params["a_neg"] > 0 and params["A_pos"] > 0):
                raise ValueError("piecewise_linear slopes must be positive (f strictly increasing)")
        else:
            if set(params) != {"a", "A"}:
                raise ValueError(f"smooth_ap needs a and A, got {sorted(params)}")
            if not 0 < params["a"] < params["A"]:
                raise ValueError("smooth_ap needs 0 < a < A")
        if self.C < 0:
            raise ValueError("declared offset C must be nonnegative")

    @classmethod
    def piecewise_linear(cls, a_neg: float, A_pos: float, C: float = 0.0) -> "Nonlinearity":
        return cls("piecewise_linear", {"a_neg": a_neg, "A_pos": A_pos}, C)

    @classmethod
    def smooth_ap(cls, a: float, A: float, C: float = 0.0) -> "Nonlinearity":
        return cls("smooth_ap", {"a": a, "A": A}, C)

    @property
    def A(self) -> float:
        return self.params["A_pos"] if self.family == "piecewise_linear" else self.params["A"]

    @property
    def a(self) -> float:
        return self.params["a_neg"] if self.family == "piecewise_linear" else self.params["a"]

    @property
    def kinks(self) -> tuple[float, ...]:
        return (0.0,) if self.family == "piecewise_linear" else ()

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.family == "piecewise_linear":
            return np.where(s <= 0, self.params["a_neg"] * s, self.params["A_pos"] * s)
        a, A = self.params["a"], self.params["A"]
        return a * s + (A - a) * np.logaddexp(0.0, s)

    def exact_slope_range(self, lo: float, hi: float) -> tuple[float, float] | None:
        """Min and max chord slope over ``[lo, hi]`` when known in closed form."""
        if self.family != "piecewise_linear":
            return None
        branch = []
        if lo < 0:
            branch.append(self.params["a_neg"])
        if hi > 0:
            branch.append(self.params["A_pos"])
        return min(branch), max(branch)


def eval_f(nl: Nonlinearity, x, s):
    """``f(x, s)``; ``x`` is accepted for interface symmetry and ignored."""
    out = nl(s)
    return float(out) if np.ndim(out) == 0 else out


def slopes(nl: Nonlinearity, u: np.ndarray) -> np.ndarray:
    """Difference-quotient slopes of ``f`` at each entry of ``u``.

    Central quotient with step ``1e-6 (1 + |u|)``; within one step of a kink
    the right-hand quotient is used so piecewise families get a deterministic
    one-sided slope.
    """
    u = np.asarray(u, dtype=float)
    h = 1e-6 * (1.0 + np.abs(u))
    q = (nl(u + h) - nl(u - h)) / (2.0 * h)
    for kink in nl.kinks:
        near = np.abs(u - kink) < h
        if np.any(near):
            un, hn = u[near], h[near]
            q[near] = (nl(un + hn) - nl(un)) / hn
    return q


@dataclass(frozen=True)
class HypothesisReport:
    R: float
    rowsum_sup: float
    lambda1: float
    # superlinear growth: A > sup k and f(s) >= A s - C for s >= 0
    f1_pass: bool
    A: float
    C: float
    f1_margin: float
    # sublinear tail: f(s)/s -> a < lambda1 at -inf
    f2_pass: bool
    a: float
    tail_error: float
    # strict monotonicity on [-R, R]
    f3_pass: bool
    sigma: float
    gamma: float
    # uniqueness regime: sigma > sup k
    f4_pass: bool

    def as_dict(self) -> dict:
        return {
            "R": self.R,
            "rowsum_sup": self.rowsum_sup,
            "lambda1": self.lambda1,
            "f1": {"passed": self.f1_pass, "A": self.A, "C": self.C, "worst_margin": self.f1_margin},
            "f2": {"passed": self.f2_pass, "a": self.a, "tail_error": self.tail_error},
            "f3": {"passed": self.f3_pass, "sigma": self.sigma},
            "f4": {"passed": self.f4_pass},
            "gamma": self.gamma,
        }


def _sampled_slope_range(nl: Nonlinearity, lo: float, hi: float, sample_count: int) -> tuple[float, float]:
    # Chord slopes over any pair are convex combinations of adjacent ones, so
    # adjacent pairs give the exact extremes over the sample set.
    s = np.linspace(lo, hi, sample_count)
    q = np.diff(nl(s)) / np.diff(s)
    return float(q.min()), float(q.max())


def audit_hypotheses(
    nl: Nonlinearity,
    rowsum_sup: float,
    lambda1: float,
    R: float,
    sample_count: int = 2001,
) -> HypothesisReport:
    """Sample-based certificates for the growth and monotonicity hypotheses."""
    if not R > 0:
        raise ValueError("R must be positive")
    if sample_count < 1000:
        raise ValueError("sample_count must be at least 1000")
    if 2 * R / (sample_count - 1) < 1e-9:
        sample_count = int(2 * R / 1e-9) + 1

    s_pos = np.linspace(0.0, 10.0 * R, sample_count)
    margin = float(np.min(nl(s_pos) - (nl.A * s_pos - nl.C)))
    f1 = nl.A > rowsum_sup and margin >= 0

    tail_error = float(abs(nl(TAIL_POINT) / TAIL_POINT - nl.a))
    f2 = 0 < nl.a < lambda1 and tail_error <= TAIL_TOL

    exact = nl.exact_slope_range(-R, R)
    sigma, gamma = exact if exact is not None else _sampled_slope_range(nl, -R, R, sample_count)

    return HypothesisReport(
        R=float(R),
        rowsum_sup=float(rowsum_sup),
        lambda1=float(lambda1),
        f1_pass=bool(f1),
        A=nl.A,
        C=nl.C,
        f1_margin=margin,
        f2_pass=bool(f2),
        a=nl.a,
        tail_error=tail_error,
        f3_pass=bool(sigma > 0),
        sigma=sigma,
        gamma=gamma,
        f4_pass=bool(sigma > rowsum_sup),
    )


def c1_offset(
    nl: Nonlinearity,
    epsilon: float,
    lambda1: float,
    R: float,
    sample_count: int = 20001,
) -> float:
    """Smallest ``C1 >= 0`` (on samples) with ``f(s) >= A s - C1`` and ``f(s) >= (a + eps) s - C1``.

    Sampling covers ``[-10 R, 10 R]``. Outside that window both lower bounds
    have slope on the safe side of the family's asymptotic slopes, which is
    checked here, so the sampled maximum is the global one.
    """
    if not 0 < epsilon < lambda1 - nl.a:
        raise HypothesisError(f"need 0 < epsilon < lambda1 - a = {lambda1 - nl.a!r}, got {epsilon!r}")
    slope_low = nl.a + epsilon
    if not nl.A > slope_low:
        raise HypothesisError(f"(a + epsilon) s - C1 cannot stay below f at +inf: A={nl.A} <= {slope_low}")
    if not nl.A > nl.a:
        raise HypothesisError(f"A s - C1 cannot stay below f at -inf: A={nl.A} <= a={nl.a}")
    s = np.linspace(-10.0 * R, 10.0 * R, sample_count)
    fs = nl(s)
    worst = max(0.0, float(np.max(nl.A * s - fs)), float(np.max(slope_low * s - fs)))
    return worst
