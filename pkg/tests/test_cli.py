import json
import subprocess
import sys

import numpy as np
import pytest

from nonlocal_ap.cli import main
from nonlocal_ap.config import ConfigError, RunConfig, build_problem

from oracles import LAMBDA_POLY

RANK_ONE = """
# constant kernel, piecewise-linear jumping nonlinearity
[domain]
lo = 0
hi = 1
n = 201
[kernel]
family = constant
[nonlinearity]
family = piecewise_linear
a_neg = 0.5
A_pos = 2
[forcing]
t = -1
[diagram]
t_values = -1, 0, 0.5
"""


def run(capsys, config_file, text, *args):
    path = config_file(text)
    code = main([args[0], "--config", str(path), *args[1:]])
    out, err = capsys.readouterr()
    return code, out, err


def with_keys(base, section, **kv):
    lines = base.splitlines()
    i = lines.index(f"[{section}]") if f"[{section}]" in lines else None
    extra = [f"{k} = {v}" for k, v in kv.items()]
    if i is None:
        return base + f"\n[{section}]\n" + "\n".join(extra) + "\n"
    return "\n".join(lines[: i + 1] + extra + lines[i + 1 :]) + "\n"


def test_eigen_constant(capsys, config_file):
    code, out, _ = run(capsys, config_file, RANK_ONE, "eigen")
    assert code == 0
    data = json.loads(out)
    assert data["lambda1"] == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(data["phi1"], 1.0, atol=1e-10)
    assert len(data["nodes"]) == len(data["weights"]) == 201
    assert list(data) == ["lambda1", "phi1", "residual", "nodes", "weights"]


def test_eigen_poly_rank2(capsys, config_file):
    text = "[domain]\nn = 801\n[kernel]\nfamily = poly_rank2\nc0 = 1\nc1 = 1\n"
    code, out, _ = run(capsys, config_file, text, "eigen")
    assert code == 0 and abs(json.loads(out)["lambda1"] - LAMBDA_POLY) <= 1e-6


def test_eigen_power_method(capsys, config_file):
    text = "[domain]\nn = 201\n[kernel]\nfamily = poly_rank2\n[solver]\neigen_method = power\n"
    code, out, _ = run(capsys, config_file, text, "eigen")
    assert code == 0 and abs(json.loads(out)["lambda1"] - LAMBDA_POLY) <= 1e-4


def test_asymmetric_table_exit_2(capsys, config_file, tmp_path):
    (tmp_path / "k.csv").write_text("n_nodes,3\n0,0,1\n1,1,1\n2,2,1\n0,1,1\n1,0,1\n1,2,1\n2,1,0.5\n")
    text = "[domain]\nn = 3\n[kernel]\nfamily = table\ntable = k.csv\n"
    for cmd in ("eigen", "check", "solve"):
        code, out, err = run(capsys, config_file, text, cmd)
        assert code == 2 and out == ""
        assert "(1, 2)" in err or "1" in err and "2" in err


def test_solve_rank_one(capsys, config_file):
    code, out, _ = run(capsys, config_file, RANK_ONE, "solve")
    assert code == 0
    data = json.loads(out)
    assert list(data) == ["t", "method", "residual_inf", "u"]
    assert data["t"] == -1 and np.allclose(data["u"], 1.0, atol=1e-8)


def test_solve_no_solution_exit_3(capsys, config_file):
    text = RANK_ONE.replace("t = -1", "t = 1")
    for method in ("auto", "monotone", "newton", "picard"):
        code, out, err = run(capsys, config_file, text, "solve", "--method", method)
        assert code == 3 and out == "" and "no solution" in err


def test_solve_picard(capsys, config_file):
    text = with_keys(RANK_ONE, "solver", picard_u0=0.5)
    code, out, _ = run(capsys, config_file, text, "solve", "--method", "picard")
    data = json.loads(out)
    assert code == 0 and data["method"] == "picard_ft" and np.allclose(data["u"], 1.0, atol=1e-8)


def test_solve_newton_and_monotone(capsys, config_file):
    for method, expect in (("monotone", 1.0), ("newton", -2.0)):
        code, out, _ = run(capsys, config_file, RANK_ONE, "solve", "--method", method)
        assert code == 0 and np.allclose(json.loads(out)["u"], expect, atol=1e-8)


def test_solve_csv(capsys, config_file):
    code, out, _ = run(capsys, config_file, RANK_ONE, "solve", "--format", "csv")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "node_index,x,u" and len(lines) == 202
    idx, x, u = lines[1].split(",")
    assert idx == "0" and float(x) == pytest.approx(0.5 / 201) and float(u) == pytest.approx(1.0)


def test_solve_csv_2d(capsys, config_file):
    text = "[domain]\nlo = 0, 0\nhi = 1, 1\nn = 6\n[forcing]\nt = -1\n"
    code, out, _ = run(capsys, config_file, text, "solve", "--format", "csv")
    assert code == 0 and out.splitlines()[0] == "node_index,x,y,u" and len(out.splitlines()) == 37


def test_threshold_rank_one(capsys, config_file, tmp_path):
    out_path = tmp_path / "th.json"
    code, out, _ = run(capsys, config_file, RANK_ONE, "threshold", "--out", str(out_path))
    assert code == 0 and out == ""
    data = json.loads(out_path.read_text())
    assert list(data) == ["t_exist", "t_fail", "m_positive", "m_all", "certificate_residual"]
    assert data["t_exist"] <= 0 < data["t_fail"] and data["t_fail"] - data["t_exist"] <= 1e-6


def test_threshold_with_offset(capsys, config_file):
    text = RANK_ONE.replace("A_pos = 2", "A_pos = 2\nC = 1")
    code, out, _ = run(capsys, config_file, text, "threshold")
    data = json.loads(out)
    assert code == 0 and data["m_positive"] == pytest.approx(1.0)
    assert data["t_fail"] <= data["m_all"] + 1


def test_threshold_degenerate_exit_4(capsys, config_file):
    text = with_keys(RANK_ONE, "solver", max_iter=1, newton_max_iter=0)
    text = with_keys(text, "threshold", max_doublings=3)
    text = text.replace("t = -1", "t = -1\ng1 = cosine")
    code, out, err = run(capsys, config_file, text, "threshold")
    assert code == 4 and out == "" and "degenerate" in err


def test_threshold_requires_f2_exit_2(capsys, config_file):
    text = RANK_ONE.replace("a_neg = 0.5", "a_neg = 1.5")
    code, _, err = run(capsys, config_file, text, "threshold")
    assert code == 2 and "hypothesis" in err


def test_diagram_counts(capsys, config_file):
    code, out, _ = run(capsys, config_file, RANK_ONE, "diagram")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "t,count,u_min_1,u_max_1,u_min_2,u_max_2"
    assert [row.split(",")[1] for row in lines[1:]] == ["2", "1", "0"]
    assert lines[3] == "0.5,0,,,,"


def test_diagram_empty_header_only(capsys, config_file):
    text = RANK_ONE.replace("t_values = -1, 0, 0.5", "t_values =")
    code, out, _ = run(capsys, config_file, text, "diagram")
    assert code == 0 and out == "t,count\n"


def test_diagram_monotonicity_diagnostic(capsys, caplog, config_file):
    c0 = -3.0
    t2 = float(c0 - (0.5 * c0 + 1.5 * np.log1p(np.exp(c0))))
    text = (
        "[domain]\nn = 31\n[nonlinearity]\nfamily = smooth_ap\na = 0.5\nA = 2\n"
        f"[diagram]\nt_values = {t2 - 5!r}, {t2!r}\nnewton_max_iter = 1\nuse_ladder = false\nseeds = {c0}\n"
    )
    code, out, err = run(capsys, config_file, text, "diagram")
    assert code == 0
    assert [row.split(",")[1] for row in out.splitlines()[1:3]] == ["0", "1"]
    assert any(line.startswith("# monotonicity") for line in out.splitlines())
    assert any("monotonicity" in r.getMessage() for r in caplog.records)


def test_diagram_svg(capsys, config_file, tmp_path):
    svg1, svg2 = tmp_path / "a.svg", tmp_path / "b.svg"
    for svg in (svg1, svg2):
        code, _, _ = run(capsys, config_file, RANK_ONE, "diagram", "--svg", str(svg))
        assert code == 0
    assert svg1.read_bytes().startswith(b"<?xml") and svg1.read_bytes() == svg2.read_bytes()


def test_check_slope_audit(capsys, config_file):
    code, out, _ = run(capsys, config_file, RANK_ONE, "check")
    data = json.loads(out)
    h = data["hypotheses"]
    assert code == 0
    assert h["f1"]["passed"] and h["f2"]["passed"] and h["f3"]["passed"] and not h["f4"]["passed"]
    assert h["f3"]["sigma"] == 0.5 and h["gamma"] == 2.0
    text = RANK_ONE.replace("a_neg = 0.5", "a_neg = 1.5")
    code, out, _ = run(capsys, config_file, text, "check")
    assert code == 0 and json.loads(out)["hypotheses"]["f4"]["passed"]


def test_check_gaussian_delta_diameter(capsys, config_file):
    text = "[domain]\nn = 101\n[kernel]\nfamily = gaussian\nwidth = 0.5\ndelta = 1\n"
    code, out, _ = run(capsys, config_file, text, "check")
    k2 = json.loads(out)["kernel"]["K2"]
    far = 1 - 1 / 101
    assert code == 0 and k2["passed"] and k2["min_value"] == pytest.approx(np.exp(-far**2 / 0.5), rel=1e-14)


def test_unknown_key_located(capsys, config_file):
    code, _, err = run(capsys, config_file, RANK_ONE.replace("a_neg = 0.5", "a_neg = 0.5\nslope = 3"), "solve")
    assert code == 1 and "slope" in err and ":12:" in err
    code, _, err = run(capsys, config_file, "[solvr]\n", "solve")
    assert code == 1 and "solvr" in err and ":1:" in err


def test_bad_values_exit_1(capsys, config_file):
    code, _, err = run(capsys, config_file, "[domain]\nn = abc\n", "eigen")
    assert code == 1 and "abc" in err
    code, _, _ = run(capsys, config_file, "[domain]\nn = 100\n[kernel]\nmax_nodes = 10\n", "eigen")
    assert code == 1
    code = main(["eigen", "--config", "/nonexistent/file.ini"])
    assert code == 1


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit):
        main(["solve", "--help"])
    out = capsys.readouterr().out
    for key in ("t_lo_hint [-1.0]", "A_pos [2.0]", "max_nodes [4096]", "eigen_method [eigh]"):
        assert key in out


def test_config_defaults_and_overrides():
    cfg = RunConfig.from_text("[forcing]\nt = 2.5  # inline comment\n")
    assert cfg.get_float("forcing", "t") == 2.5
    assert cfg.get_float("solver", "beta") is None
    assert cfg.get_bool("diagram", "use_ladder") is True
    with pytest.raises(ConfigError):
        RunConfig.from_text("[forcing]\nmode = sideways\n").get_bool("forcing", "mode")


def test_build_problem_projects_g1():
    cfg = RunConfig.from_text("[domain]\nn = 51\n[kernel]\nfamily = gaussian\n[forcing]\ng1 = linear\nt = -0.5\n")
    prob = build_problem(cfg)
    w, phi = prob.op.weights, prob.eig.phi1
    assert abs(np.sum(w * prob.family.g1 * phi)) <= 1e-12
    inst = prob.family.at(prob.t)
    assert np.allclose(inst.g, -0.5 * phi + prob.family.g1)


def test_entry_point_subprocess(config_file):
    path = config_file(RANK_ONE)
    runs = [
        subprocess.run([sys.executable, "-m", "nonlocal_ap.cli", "solve", "--config", str(path)],
                       capture_output=True, text=True)
        for _ in range(2)
    ]
    assert runs[0].returncode == 0 and runs[0].stdout == runs[1].stdout
