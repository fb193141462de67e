import numpy as np
import pytest

from nonlocal_ap.ap_analysis import (
    ProblemFamily,
    bracket_threshold,
    diagram,
    nonexistence_bound,
    probe_existence,
)
from nonlocal_ap.exceptions import HypothesisError
from nonlocal_ap.nonlinearity import Nonlinearity
from nonlocal_ap.solver import build_supersolution

from builders import rank_one_family
from oracles import pw, scalar_roots

FAM = rank_one_family(101)


def test_nonexistence_bound_examples():
    b = nonexistence_bound(FAM)
    assert b.C1 == 0.0 and abs(b.m_all) <= 1e-12 and b.m_positive == 0.0
    b = nonexistence_bound(rank_one_family(101, C=1.0))
    assert b.m_positive == pytest.approx(1.0, abs=1e-12)
    assert b.m_all >= 0 and b.m_positive >= 0


def test_nonexistence_bound_requires_f2():
    with pytest.raises(HypothesisError):
        nonexistence_bound(rank_one_family(51, a_neg=1.5, A_pos=2.0))


def test_nonexistence_bound_constant_mode_shift():
    fam = rank_one_family(101)
    # the constant kernel has phi1 = 1, so both modes coincide
    const = ProblemFamily(fam.op, fam.eig, fam.nl, fam.g1, mode="constant")
    assert nonexistence_bound(const).m_all == pytest.approx(nonexistence_bound(fam).m_all, abs=1e-12)


def test_probe_examples():
    rep = probe_existence(FAM.at(-1.0))
    assert rep is not None and np.allclose(rep.solution, 1.0, atol=1e-8)
    assert probe_existence(FAM.at(0.5)) is None
    rep = probe_existence(FAM.at(0.0))
    assert rep is not None and np.max(np.abs(rep.solution)) <= 1e-8


def test_threshold_rank_one():
    br = bracket_threshold(FAM)
    assert br.t_exist <= 0.0 < br.t_fail
    assert br.width <= 1e-6
    assert br.t_fail <= br.bound.m_all + 1
    assert br.certificate.residual_inf <= 1e-8
    assert br.t_exist < br.t_fail


def test_threshold_shift_by_phi1_component():
    delta = 0.3
    fam = rank_one_family(101)
    # g1 = delta * phi1 is reabsorbed into t, so the threshold in t moves by -delta
    shifted = ProblemFamily(fam.op, fam.eig, fam.nl, delta * fam.eig.phi1)
    br = bracket_threshold(shifted, tol_t=1e-6)
    assert br.t_exist <= -delta < br.t_fail + 1e-12
    assert br.width <= 1e-6


def test_threshold_other_slopes():
    # pw(0.9, 1.5): c - f(c) = 0.1 c for c <= 0 and -0.5 c above, so roots exist only for t <= 0
    fam = rank_one_family(41, nl=Nonlinearity.piecewise_linear(0.9, 1.5))
    br = bracket_threshold(fam)
    assert br.t_exist <= 0.0 < br.t_fail and br.width <= 1e-6


def test_threshold_certified_above_bound_is_an_error(monkeypatch):
    import nonlocal_ap.ap_analysis as ap

    monkeypatch.setattr(ap, "nonexistence_bound", lambda fam: ap.NonexistenceBound(-5.0, -5.0, 0.0, 0.25))
    with pytest.raises(HypothesisError, match="above the nonexistence bound"):
        bracket_threshold(FAM)


def test_threshold_deterministic():
    a, b = bracket_threshold(FAM), bracket_threshold(FAM)
    assert (a.t_exist, a.t_fail) == (b.t_exist, b.t_fail)
    assert [p for p in a.probes] == [p for p in b.probes]


def test_diagram_rank_one():
    d = diagram(FAM, [-1.0, 0.0, 0.5])
    assert [r.count for r in d.rows] == [2, 1, 0]
    lo = sorted(s[0] for s in d.rows[0].summaries())
    assert np.allclose(lo, [-2.0, 1.0], atol=1e-8)
    assert d.diagnostics == []


def test_diagram_requires_sorted():
    with pytest.raises(ValueError):
        diagram(FAM, [0.0, -1.0])


def test_diagram_empty():
    d = diagram(FAM, [])
    assert d.rows == [] and d.diagnostics == []


def test_diagram_unique_under_f4():
    fam = rank_one_family(61, a_neg=1.5, A_pos=2.0)
    ts = [-2.0, -0.5, 0.0, 0.5, 2.0]
    d = diagram(fam, ts)
    f = pw(1.5, 2.0)
    for row in d.rows:
        assert row.count == len(scalar_roots(f, row.t, -100, 100)) == 1
        assert np.allclose(row.solutions[0].solution, scalar_roots(f, row.t, -100, 100)[0], atol=1e-8)


def test_diagram_reports_monotonicity_miss():
    nl = Nonlinearity.smooth_ap(0.5, 2.0)
    fam = rank_one_family(31, nl=nl)
    c0 = -3.0
    t2 = c0 - float(nl(c0))
    # the only seed is an exact root at t2 and one Newton step cannot reach a root at t1 < t2
    d = diagram(fam, [t2 - 5.0, t2], {"newton_max_iter": 1, "use_ladder": False, "seeds": [c0]})
    assert [r.count for r in d.rows] == [0, 1]
    assert any(msg.startswith("monotonicity") for msg in d.diagnostics)


def test_diagram_solutions_below_supersolution_and_bound():
    d = diagram(FAM, list(np.linspace(-2, 0.5, 6)))
    m_all = nonexistence_bound(FAM).m_all
    for row in d.rows:
        w = build_supersolution(FAM.at(row.t))
        for rep in row.solutions:
            assert np.all(rep.solution < w)
        if row.t > m_all + 1e-8:
            assert row.count == 0
