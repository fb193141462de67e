"""Solvers for the discrete problem ``M u = f(u) + t d + g1``.

``d`` is the forcing direction (``phi1`` or the constant 1). The residual
convention used throughout is ``G(u) = M u - f(u) - g``: a subsolution has
``G >= 0``, a supersolution ``G <= 0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .dispersal import DiscreteOperator, EigenPair, ForcingDecomposition, phi1_integral, shifted_solve
from .exceptions import ConvergenceError, HypothesisError
from .nonlinearity import Nonlinearity, audit_hypotheses, c1_offset, slopes

__all__ = [
    "ProblemInstance",
    "Bracket",
    "SolveReport",
    "MaxPrincipleVerdict",
    "residual_tolerance",
    "search_radius",
    "default_beta",
    "build_supersolution",
    "build_subsolution",
    "monotone_iterate",
    "picard_ft",
    "newton_deflated",
    "default_seeds",
    "check_max_principle",
    "C_FLOOR",
    "SIGN_TOL",
]

log = logging.getLogger(__name__)

C_FLOOR = 1e-6
SIGN_TOL = 1e-10


@dataclass(eq=False)
class ProblemInstance:
    op: DiscreteOperator
    eig: EigenPair
    nl: Nonlinearity
    forcing: ForcingDecomposition
    g: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.op.n
        if self.eig.phi1.shape != (n,) or self.forcing.g1.shape != (n,):
            raise ValueError("operator, eigenpair and forcing must live on the same grid")
        self.g = self.forcing.recompose()

    @property
    def t(self) -> float:
        return self.forcing.t

    def residual(self, u: np.ndarray) -> np.ndarray:
        return self.op.matrix @ u - self.nl(u) - self.g


@dataclass(eq=False)
class Bracket:
    sub: np.ndarray
    super: np.ndarray

    def validate(self, inst: ProblemInstance, tol: float = SIGN_TOL) -> None:
        if np.any(self.sub > self.super):
            i = int(np.argmax(self.sub - self.super))
            raise ValueError(f"bracket inverted at node {i}: sub={self.sub[i]!r} > super={self.super[i]!r}")
        if np.min(inst.residual(self.sub)) < -tol:
            raise ValueError("lower function is not a subsolution")
        if np.max(inst.residual(self.super)) > tol:
            raise ValueError("upper function is not a supersolution")


@dataclass(eq=False)
class SolveReport:
    solution: np.ndarray
    residual_inf: float
    iterations: int
    method: str
    t: float
    converged: bool
    certified: bool
    status: str = "converged"
    step_inf: float = float("nan")
    bracket: Bracket | None = None
    history: list | None = field(default=None, repr=False)


def residual_tolerance(inst: ProblemInstance, rel: float = 1e-8) -> float:
    """Certification threshold ``rel * (1 + ||g||_inf)`` for the residual."""
    return rel * (1.0 + float(np.max(np.abs(inst.g))))


def _report(inst, u, iterations, method, converged, status, step, res_tol, **extra) -> SolveReport:
    res = float(np.max(np.abs(inst.residual(u))))
    return SolveReport(
        solution=u,
        residual_inf=res,
        iterations=iterations,
        method=method,
        t=inst.t,
        converged=converged,
        certified=bool(converged and res <= res_tol),
        status=status,
        step_inf=step,
        **extra,
    )


def build_supersolution(inst: ProblemInstance, C_floor: float = C_FLOOR) -> np.ndarray:
    """Solve ``M w - A w = -||g||_inf - C`` with ``C`` floored at ``C_floor``.

    ``w`` is positive and strictly above every subsolution, in particular
    above every solution.
    """
    op, nl = inst.op, inst.nl
    if not nl.A > op.rowsum.sup:
        raise HypothesisError(f"superlinear slope A={nl.A!r} must exceed sup k = {op.rowsum.sup!r}")
    C = max(nl.C, C_floor)
    rhs = np.full(op.n, -float(np.max(np.abs(inst.g))) - C)
    w = shifted_solve(op, nl.A, rhs)
    if not np.all(w > 0):
        raise HypothesisError(f"supersolution not positive (min {w.min():.3e}); grid too coarse?")
    worst = float(np.max(inst.residual(w)))
    if worst > SIGN_TOL:
        raise HypothesisError(f"supersolution residual sign violated by {worst:.3e}; check f(s) >= A s - C")
    return w


def _ladder(inst: ProblemInstance, warm: np.ndarray | None):
    phi = inst.eig.phi1
    for k in range(41):
        yield 2.0**-k * phi
    yield np.zeros(inst.op.n)
    for k in range(41):
        yield -(2.0**k) * phi
    if warm is not None:
        yield np.asarray(warm, dtype=float)


def build_subsolution(
    inst: ProblemInstance,
    warm: np.ndarray | None = None,
    super_: np.ndarray | None = None,
) -> np.ndarray | None:
    """First candidate of the subsolution ladder with residual ``>= -SIGN_TOL``.

    Candidates: ``eps phi1`` for dyadic ``eps`` down to ``2^-40``, then 0,
    then ``-2^k phi1``, then ``warm`` (a solution at a larger ``t``).
    When ``super_`` is given, candidates above it are skipped. ``None``
    means every candidate failed; that is evidence of nonexistence, not proof.
    """
    for z in _ladder(inst, warm):
        if super_ is not None and np.any(z > super_):
            continue
        if np.min(inst.residual(z)) >= -SIGN_TOL:
            return z
    return None


def default_beta(inst: ProblemInstance, bracket: Bracket | None = None) -> float:
    """Shift for the monotone scheme.

    It must exceed ``sup k`` (inverse positivity) and the largest slope of
    ``f`` over the bracket range, otherwise ``s -> beta s - f(s)`` is not
    increasing and the iterates lose monotonicity.
    """
    beta = inst.op.rowsum.sup * (1 + 1e-6) + 1.0
    if bracket is not None:
        lo, hi = float(np.min(bracket.sub)), float(np.max(bracket.super))
        if hi > lo:
            exact = inst.nl.exact_slope_range(lo, hi)
            if exact is None:
                s = np.linspace(lo, hi, 4001)
                gamma = float(np.max(np.diff(inst.nl(s)) / np.diff(s)))
            else:
                gamma = exact[1]
            beta = max(beta, gamma * (1 + 1e-6))
    return beta


def monotone_iterate(
    inst: ProblemInstance,
    bracket: Bracket,
    start: str = "super",
    beta: float | None = None,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    record: bool = False,
) -> SolveReport:
    """Monotone scheme ``(M - beta) u_n = f(u_{n-1}) - beta u_{n-1} + g``.

    From the supersolution the iterates decrease, from the subsolution they
    increase, and both stay inside the bracket. Each step is checked; a
    violation raises :class:`ConvergenceError`.
    """
    if start not in ("super", "sub"):
        raise ValueError("start must be 'super' or 'sub'")
    if beta is None:
        beta = default_beta(inst, bracket)
    if not beta > inst.op.rowsum.sup:
        raise HypothesisError(f"beta={beta!r} must exceed sup k = {inst.op.rowsum.sup!r}")
    sign = -1.0 if start == "super" else 1.0
    u = np.array(bracket.super if start == "super" else bracket.sub, dtype=float)
    history = [u.copy()] if record else None
    res_tol = residual_tolerance(inst)
    step = float("inf")
    for it in range(1, max_iter + 1):
        u_new = shifted_solve(inst.op, beta, inst.nl(u) - beta * u + inst.g)
        slack = 1e-12 * (1.0 + float(np.max(np.abs(u))))
        if np.any(sign * (u_new - u) < -slack):
            i = int(np.argmin(sign * (u_new - u)))
            raise ConvergenceError(
                f"monotonicity lost at step {it}, node {i} ({u[i]!r} -> {u_new[i]!r}); beta too small?"
            )
        if np.any(u_new < bracket.sub - slack) or np.any(u_new > bracket.super + slack):
            raise ConvergenceError(f"iterate left the bracket at step {it}")
        step = float(np.max(np.abs(u_new - u)))
        u = u_new
        if record:
            history.append(u.copy())
        if step < tol:
            return _report(
                inst, u, it, f"monotone_from_{start}", True, "converged", step, res_tol,
                bracket=bracket, history=history,
            )
    raise ConvergenceError(f"monotone iteration did not converge in {max_iter} steps (last step {step:.3e})")


def search_radius(inst: ProblemInstance, w: np.ndarray | None = None) -> float:
    """Heuristic radius containing the solutions, used for seeds and slope audits.

    Upper side: the supersolution bounds every solution. Lower side: testing
    the equation against ``phi1`` and using ``f(s) >= (a + eps) s - C1`` bounds
    the ``phi1``-weighted mean of a negative solution; the radius converts that
    mean into a constant of the same weight.
    """
    if w is None:
        w = build_supersolution(inst)
    R = max(1.0, float(np.max(np.abs(w))))
    nl, lam = inst.nl, inst.eig.lambda1
    int_phi = phi1_integral(inst.op, inst.eig)
    projected = float(np.sum(inst.op.weights * inst.g * inst.eig.phi1))
    gap = lam - nl.a
    if gap > 0:
        eps = 0.5 * gap
        try:
            C1 = c1_offset(nl, eps, lam, R)
        except HypothesisError:
            C1 = nl.C
        bound = max(0.0, C1 * int_phi - projected) / ((gap - eps) * int_phi)
    else:
        bound = (abs(projected) + nl.C * int_phi) / (max(abs(gap), 1e-3 * lam) * int_phi)
    return max(R, bound)


def picard_ft(
    inst: ProblemInstance,
    u0,
    M_const: float,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    R: float | None = None,
) -> SolveReport:
    """Fixed-point iteration of ``u -> u + (M u - f(u) - g) / M_const``.

    Requires ``M_const`` above the largest slope of ``f`` on ``[-R, R]``.
    Not a global contraction: divergence (``||u|| > 10 R``) and running out
    of iterations are reported through ``status``, not raised.
    """
    if R is None:
        R = search_radius(inst)
    gamma = audit_hypotheses(inst.nl, inst.op.rowsum.sup, inst.eig.lambda1, R).gamma
    if not M_const > gamma:
        raise ValueError(f"M_const={M_const!r} must exceed the slope bound Gamma={gamma!r} on [-R, R]")
    u = np.array(np.broadcast_to(np.asarray(u0, dtype=float), (inst.op.n,)))
    res_tol = residual_tolerance(inst)
    step = float("inf")
    for it in range(1, max_iter + 1):
        u_new = u + inst.residual(u) / M_const
        step = float(np.max(np.abs(u_new - u)))
        u = u_new
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > 10.0 * R:
            return _report(inst, u, it, "picard_ft", False, "diverged", step, res_tol)
        if step < tol:
            return _report(inst, u, it, "picard_ft", True, "converged", step, res_tol)
    return _report(inst, u, max_iter, "picard_ft", False, "max_iter", step, res_tol)


def default_seeds(inst: ProblemInstance, R: float, known=()) -> list[np.ndarray]:
    n = inst.op.n
    seeds = [np.full(n, c) for c in (-2 * R, -R, -R / 2, 0.0, R / 2, R, 2 * R)]
    for u in known:
        delta = 0.1 * (1.0 + float(np.max(np.abs(u))))
        seeds.append(u + delta)
        seeds.append(u - delta)
    return seeds


def _is_duplicate(u: np.ndarray, others) -> bool:
    scale = 1e-4 * (1.0 + float(np.max(np.abs(u))))
    return any(float(np.max(np.abs(u - v))) <= scale for v in others)


def _deflation(u: np.ndarray, roots) -> tuple[float, np.ndarray]:
    """Factor ``prod (1/||u - r||_inf + 1)`` and the gradient of its logarithm."""
    D = 1.0
    grad = np.zeros_like(u)
    for r in roots:
        d = u - r
        j = int(np.argmax(np.abs(d)))
        dist = abs(d[j])
        if dist == 0.0:
            return float("inf"), grad
        D *= 1.0 / dist + 1.0
        grad[j] -= np.sign(d[j]) / (dist * (1.0 + dist))
    return D, grad


def _newton_from(inst, seed, roots, tol, max_iter, res_tol, R):
    M = inst.op.matrix
    u = np.array(seed, dtype=float)
    for it in range(max_iter + 1):
        G = inst.residual(u)
        gnorm = float(np.max(np.abs(G)))
        if gnorm <= 1e-3 * res_tol:
            return u, it, "converged"
        if it == max_iter:
            break
        J = M - np.diag(slopes(inst.nl, u))
        try:
            du = scipy.linalg.solve(J, -G)
        except (scipy.linalg.LinAlgError, ValueError):
            return u, it, "singular"
        D, dlog = _deflation(u, roots)
        denom = 1.0 - float(dlog @ du)
        step = du / denom if roots and abs(denom) > 1e-12 else du
        if float(np.max(np.abs(step))) < tol:
            return u, it, "converged"
        merit = D * gnorm
        lam = 1.0
        while lam >= 2.0**-20:
            trial = u + lam * step
            Dt, _ = _deflation(trial, roots)
            m_trial = Dt * float(np.max(np.abs(inst.residual(trial))))
            if m_trial < merit:
                break
            lam *= 0.5
        else:
            return u, it, "damping_failed"
        u = trial
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > 100.0 * R:
            return u, it, "diverged"
    return u, max_iter, "max_iter"


def _polish(inst, u, steps=4):
    best, best_res = u, float(np.max(np.abs(inst.residual(u))))
    for _ in range(steps):
        J = inst.op.matrix - np.diag(slopes(inst.nl, best))
        try:
            cand = best + scipy.linalg.solve(J, -inst.residual(best))
        except (scipy.linalg.LinAlgError, ValueError):
            break
        res = float(np.max(np.abs(inst.residual(cand))))
        if not res < best_res:
            break
        best, best_res = cand, res
    return best


def newton_deflated(
    inst: ProblemInstance,
    seeds=None,
    known=(),
    tol: float = 1e-10,
    max_iter: int = 100,
    R: float | None = None,
) -> list[SolveReport]:
    """Damped Newton from each seed, deflating ``known`` and every root found so far.

    Only new, residual-certified, deduplicated solutions are returned, in
    seed order. Seed failures are logged at debug level.
    """
    if R is None:
        R = search_radius(inst)
    known = [np.asarray(k, dtype=float) for k in known]
    if seeds is None:
        seeds = default_seeds(inst, R, known)
    res_tol = residual_tolerance(inst)
    roots = list(known)
    found: list[SolveReport] = []
    for idx, seed in enumerate(seeds):
        seed = np.array(np.broadcast_to(np.asarray(seed, dtype=float), (inst.op.n,)))
        u, its, status = _newton_from(inst, seed, roots, tol, max_iter, res_tol, R)
        if status != "converged":
            log.debug("seed %d: %s after %d Newton steps", idx, status, its)
            continue
        u = _polish(inst, u)
        rep = _report(inst, u, its, "newton", True, "converged", float("nan"), res_tol)
        if not rep.certified:
            log.debug("seed %d: residual %.3e above tolerance", idx, rep.residual_inf)
            continue
        if _is_duplicate(u, roots):
            continue
        roots.append(u)
        found.append(rep)
    return found


@dataclass(frozen=True)
class MaxPrincipleVerdict:
    applicable: bool
    c_exceeds_k: bool
    residual_nonpositive: bool
    holds: bool | None
    min_u: float
    max_abs_u: float
    counterexample: int | None

    @property
    def verdict(self) -> str:
        if not self.applicable:
            return "not applicable"
        return "holds" if self.holds else "violated"


def check_max_principle(op: DiscreteOperator, c, u, tol: float = 1e-12) -> MaxPrincipleVerdict:
    """Discrete maximum principle: ``c > k`` and ``M u - c u <= 0`` imply ``u > 0`` or ``u = 0``.

    The residual premise is tested up to ``tol``; entries of ``u`` smaller in
    size than ``tol / min(c - k)`` are what such a residual slack can produce
    and count as zero.
    """
    u = np.asarray(u, dtype=float)
    c = np.broadcast_to(np.asarray(c, dtype=float), u.shape)
    gap = c - op.rowsum.values
    c_ok = bool(np.all(gap > 0))
    lhs = op.matrix @ u - c * u
    r_ok = bool(np.all(lhs <= tol))
    min_u = float(np.min(u))
    max_abs = float(np.max(np.abs(u)))
    if not (c_ok and r_ok):
        return MaxPrincipleVerdict(False, c_ok, r_ok, None, min_u, max_abs, None)
    slack = tol / float(np.min(gap))
    holds = min_u > 0 or max_abs <= slack
    counterexample = None if holds else int(np.argmin(u))
    return MaxPrincipleVerdict(True, c_ok, r_ok, holds, min_u, max_abs, counterexample)
