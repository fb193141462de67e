"""Existence threshold, nonexistence bound and solution-count diagrams in ``t``.

A :class:`ProblemFamily` fixes operator, eigenpair, nonlinearity and the
orthogonal part ``g1`` of the forcing; ``family.at(t)`` gives the instance
with forcing ``t * d + g1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dispersal import DiscreteOperator, EigenPair, ForcingDecomposition, decompose_forcing, phi1_integral
from .exceptions import ConvergenceError, HypothesisError
from .nonlinearity import Nonlinearity, c1_offset
from .solver import (
    Bracket,
    ProblemInstance,
    SolveReport,
    build_subsolution,
    build_supersolution,
    default_seeds,
    monotone_iterate,
    newton_deflated,
    search_radius,
)

__all__ = [
    "ProblemFamily",
    "NonexistenceBound",
    "ThresholdBracket",
    "DiagramRow",
    "APDiagram",
    "nonexistence_bound",
    "probe_existence",
    "bracket_threshold",
    "diagram",
]

log = logging.getLogger(__name__)


@dataclass(eq=False)
class ProblemFamily:
    op: DiscreteOperator
    eig: EigenPair
    nl: Nonlinearity
    g1: np.ndarray
    mode: str = "eigen"

    @classmethod
    def from_forcing(cls, op, eig, nl, g, mode: str = "eigen") -> "ProblemFamily":
        dec = decompose_forcing(op, eig, g, mode)
        return cls(op, eig, nl, dec.g1, mode)

    @property
    def direction(self) -> np.ndarray:
        return self.eig.phi1 if self.mode == "eigen" else np.ones(self.op.n)

    def at(self, t: float) -> ProblemInstance:
        d = self.direction
        g = float(t) * d + self.g1
        return ProblemInstance(self.op, self.eig, self.nl, ForcingDecomposition(g, float(t), self.g1, self.mode, d))


@dataclass(frozen=True)
class NonexistenceBound:
    """No positive solution above ``m_positive``; no solution at all above ``m_all``."""

    m_positive: float
    m_all: float
    C1: float
    epsilon: float


def nonexistence_bound(family: ProblemFamily, epsilon: float | None = None) -> NonexistenceBound:
    """Thresholds from testing the equation against ``phi1``.

    In eigen mode ``m = C int(phi1)``. In constant mode the forcing direction
    is 1, so the test against ``phi1`` also picks up ``<g1, phi1>`` and
    ``m = C - <g1, phi1> / int(phi1)``.
    """
    op, eig, nl = family.op, family.eig, family.nl
    if not nl.A > op.rowsum.sup:
        raise HypothesisError(f"A={nl.A!r} must exceed sup k = {op.rowsum.sup!r}")
    if not 0 < nl.a < eig.lambda1:
        raise HypothesisError(f"tail slope a={nl.a!r} must lie in (0, lambda1={eig.lambda1!r})")
    if epsilon is None:
        epsilon = 0.5 * (eig.lambda1 - nl.a)
    R = search_radius(family.at(0.0))
    C1 = c1_offset(nl, epsilon, eig.lambda1, R)
    int_phi = phi1_integral(op, eig)
    if family.mode == "eigen":
        return NonexistenceBound(nl.C * int_phi, C1 * int_phi, C1, epsilon)
    shift = float(np.sum(op.weights * family.g1 * eig.phi1)) / int_phi
    return NonexistenceBound(nl.C - shift, C1 - shift, C1, epsilon)


def probe_existence(
    inst: ProblemInstance,
    warm: np.ndarray | None = None,
    use_ladder: bool = True,
    newton_max_iter: int = 100,
    monotone_max_iter: int = 10_000,
    extra_seeds=(),
) -> SolveReport | None:
    """Try to certify one solution at this ``t``.

    Sub/supersolution bracket plus monotone iteration first (``warm``, a
    solution at a larger ``t``, joins the subsolution ladder); Newton with the
    default seeds otherwise. ``None`` when every route fails.
    """
    w = build_supersolution(inst)
    if use_ladder:
        z = build_subsolution(inst, warm=warm, super_=w)
        if z is not None:
            try:
                rep = monotone_iterate(inst, Bracket(z, w), "super", max_iter=monotone_max_iter)
                if rep.certified:
                    return rep
            except ConvergenceError as exc:
                log.debug("monotone iteration failed at t=%r: %s", inst.t, exc)
    R = search_radius(inst, w)
    seeds = default_seeds(inst, R) + [np.asarray(s, dtype=float) for s in extra_seeds]
    found = newton_deflated(inst, seeds=seeds, max_iter=newton_max_iter, R=R)
    return found[0] if found else None


@dataclass(eq=False)
class ThresholdBracket:
    t_exist: float
    t_fail: float
    certificate: SolveReport
    bound: NonexistenceBound
    probes: list = field(default_factory=list, repr=False)

    @property
    def width(self) -> float:
        return self.t_fail - self.t_exist


def bracket_threshold(
    family: ProblemFamily,
    t_lo_hint: float = -1.0,
    tol_t: float = 1e-6,
    max_bisect: int = 60,
    max_doublings: int = 60,
    **probe_kw,
) -> ThresholdBracket:
    """Bisect for the solvability threshold between a certified ``t`` and a failed one.

    Starts failing at ``m_all + 1`` (above the nonexistence bound) and walks
    down from ``t_lo_hint`` with doubling steps until a solution is certified.
    The certified side carries its solution; the failing side is only the
    absence of a certificate.
    """
    bound = nonexistence_bound(family)
    probes: list[tuple[float, bool]] = []
    certified: list[tuple[float, np.ndarray]] = []

    def probe(t):
        # a solution at t' >= t is a subsolution at t; use the closest one
        warm = min((c for c in certified if c[0] >= t), default=None, key=lambda c: c[0])
        rep = probe_existence(family.at(t), warm=None if warm is None else warm[1], **probe_kw)
        probes.append((t, rep is not None))
        if rep is not None:
            certified.append((t, rep.solution))
        return rep

    t_fail = bound.m_all + 1.0
    if probe(t_fail) is not None:
        raise HypothesisError(
            f"certified a solution at t={t_fail!r} above the nonexistence bound m={bound.m_all!r}"
        )
    t = min(t_lo_hint, bound.m_all)
    step = max(1.0, abs(t))
    rep = probe(t)
    doublings = 0
    while rep is None:
        if doublings >= max_doublings:
            raise ConvergenceError(f"no solution certified down to t={t!r} after {max_doublings} doublings")
        t_fail = min(t_fail, t)
        t = t - step
        step *= 2.0
        doublings += 1
        rep = probe(t)
    t_exist, cert = t, rep

    for _ in range(max_bisect):
        if t_fail - t_exist <= tol_t:
            break
        mid = 0.5 * (t_exist + t_fail)
        rep = probe(mid)
        if rep is None:
            t_fail = mid
        else:
            t_exist, cert = mid, rep
    return ThresholdBracket(t_exist, t_fail, cert, bound, probes)


@dataclass(eq=False)
class DiagramRow:
    t: float
    solutions: list  # list[SolveReport], sorted by mean value

    @property
    def count(self) -> int:
        return len(self.solutions)

    def summaries(self) -> list[tuple[float, float, float]]:
        return [
            (float(r.solution.min()), float(r.solution.max()), float(np.max(np.abs(r.solution))))
            for r in self.solutions
        ]


@dataclass(eq=False)
class APDiagram:
    rows: list
    diagnostics: list = field(default_factory=list)


def diagram(family: ProblemFamily, t_values, seeds_config: dict | None = None) -> APDiagram:
    """Solutions found at each ``t``: one probe, then deflated Newton for more roots.

    ``t_values`` must be ascending. Rows are computed from the largest ``t``
    down so that each certified solution can serve as a subsolution for the
    next (smaller) ``t``. A row with no solution below a row with one breaks
    the monotone existence structure and is recorded as a diagnostic.

    ``seeds_config`` keys: ``newton_max_iter`` (100), ``use_ladder`` (True),
    ``seeds`` (constant seed values replacing the default ones).
    """
    cfg = {"newton_max_iter": 100, "use_ladder": True, "seeds": None}
    cfg.update(seeds_config or {})
    ts = [float(t) for t in t_values]
    if any(b < a for a, b in zip(ts, ts[1:])):
        raise ValueError("t_values must be sorted ascending")

    rows: dict[int, DiagramRow] = {}
    warm = None
    for idx in range(len(ts) - 1, -1, -1):
        inst = family.at(ts[idx])
        R = search_radius(inst)
        if cfg["seeds"] is not None:
            seeds = [np.full(inst.op.n, float(c)) for c in cfg["seeds"]]
            first = newton_deflated(inst, seeds=seeds, max_iter=cfg["newton_max_iter"], R=R)
            rep = first[0] if first else None
        else:
            rep = probe_existence(
                inst,
                warm=warm if cfg["use_ladder"] else None,
                use_ladder=cfg["use_ladder"],
                newton_max_iter=cfg["newton_max_iter"],
            )
        sols = []
        if rep is not None:
            sols.append(rep)
            if cfg["seeds"] is not None:
                seeds = [np.full(inst.op.n, float(c)) for c in cfg["seeds"]]
                seeds += default_seeds(inst, R, [rep.solution])[7:]
            else:
                seeds = None
            sols += newton_deflated(
                inst, seeds=seeds, known=[rep.solution], max_iter=cfg["newton_max_iter"], R=R
            )
            warm = rep.solution
        sols.sort(key=lambda r: float(np.mean(r.solution)))
        rows[idx] = DiagramRow(ts[idx], sols)

    ordered = [rows[i] for i in range(len(ts))]
    diagnostics = []
    for i, row in enumerate(ordered):
        if row.count == 0:
            later = next((r for r in ordered[i + 1 :] if r.count > 0), None)
            if later is not None:
                diagnostics.append(
                    f"monotonicity: no solution at t={row.t!r} but {later.count} at t={later.t!r} (solver miss)"
                )
    try:
        m_all = nonexistence_bound(family).m_all
    except HypothesisError:
        m_all = None
    if m_all is not None:
        for row in ordered:
            if row.count and row.t > m_all + 1e-8:
                diagnostics.append(f"nonexistence bound: solution certified at t={row.t!r} > m={m_all!r}")
    return APDiagram(ordered, diagnostics)
