"""Command line front-end: ``nonlocal-ap {eigen,solve,threshold,diagram,check} --config FILE``.

Exit codes: 0 success, 1 runtime or configuration error, 2 hypothesis audit
failure, 3 no solution found, 4 threshold search degenerate.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import reports
from .ap_analysis import bracket_threshold, diagram, probe_existence
from .config import ConfigError, RunConfig, build_problem, schema_help
from .domain_kernel import audit_kernel
from .exceptions import ConvergenceError, HypothesisError, NonlocalAPError
from .nonlinearity import audit_hypotheses
from .solver import (
    Bracket,
    build_subsolution,
    build_supersolution,
    monotone_iterate,
    newton_deflated,
    picard_ft,
    search_radius,
)

EXIT_OK, EXIT_RUNTIME, EXIT_AUDIT, EXIT_NO_SOLUTION, EXIT_DEGENERATE = 0, 1, 2, 3, 4

log = logging.getLogger("nonlocal_ap")


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _audited_problem(cfg: RunConfig):
    try:
        bare = build_problem(cfg, with_operator=False)
    except HypothesisError as exc:
        raise _Exit(EXIT_AUDIT, f"kernel audit failed: {exc}") from None
    audit = audit_kernel(bare.grid, bare.kernel)
    if not audit.passed:
        raise _Exit(EXIT_AUDIT, "kernel audit failed: " + "; ".join(audit.failures()))
    return build_problem(cfg, with_operator=True)


def cmd_eigen(cfg: RunConfig, args) -> int:
    prob = _audited_problem(cfg)
    _emit(reports.dumps(reports.eigen_report(prob.op, prob.eig)), args.out)
    return EXIT_OK


def _solve(cfg: RunConfig, prob, method: str):
    inst = prob.family.at(prob.t)
    tol = cfg.get_float("solver", "tol")
    max_iter = cfg.get_int("solver", "max_iter")
    newton_iter = cfg.get_int("solver", "newton_max_iter")
    if method == "auto":
        return probe_existence(inst, newton_max_iter=newton_iter, monotone_max_iter=max_iter)
    if method == "monotone":
        w = build_supersolution(inst)
        z = build_subsolution(inst, super_=w)
        if z is None:
            return None
        try:
            rep = monotone_iterate(inst, Bracket(z, w), "super", cfg.get_float("solver", "beta"), tol, max_iter)
        except ConvergenceError as exc:
            log.warning("monotone iteration failed: %s", exc)
            return None
        return rep if rep.certified else None
    if method == "picard":
        R = search_radius(inst)
        M_const = cfg.get_float("solver", "picard_M")
        if M_const is None:
            M_const = 2.0 * audit_hypotheses(inst.nl, inst.op.rowsum.sup, inst.eig.lambda1, R).gamma
        rep = picard_ft(inst, cfg.get_float("solver", "picard_u0"), M_const, tol, max_iter, R)
        return rep if rep.certified else None
    if method == "newton":
        found = newton_deflated(inst, tol=tol, max_iter=newton_iter)
        return found[0] if found else None
    raise ConfigError(f"unknown method {method!r}")


def cmd_solve(cfg: RunConfig, args) -> int:
    prob = _audited_problem(cfg)
    method = args.method or cfg.raw("solver", "method")
    rep = _solve(cfg, prob, method)
    if rep is None:
        raise _Exit(EXIT_NO_SOLUTION, f"no solution found at t={prob.t!r} (method {method})")
    if args.format == "csv":
        _emit(reports.solution_csv(prob.op, rep), args.out)
    else:
        _emit(reports.dumps(reports.solution_report(rep)), args.out)
    return EXIT_OK


def cmd_threshold(cfg: RunConfig, args) -> int:
    prob = _audited_problem(cfg)
    newton_iter = cfg.get_int("solver", "newton_max_iter")
    try:
        br = bracket_threshold(
            prob.family,
            t_lo_hint=cfg.get_float("threshold", "t_lo_hint"),
            tol_t=cfg.get_float("threshold", "tol_t"),
            max_bisect=cfg.get_int("threshold", "max_bisect"),
            max_doublings=cfg.get_int("threshold", "max_doublings"),
            newton_max_iter=newton_iter,
            monotone_max_iter=cfg.get_int("solver", "max_iter"),
        )
    except ConvergenceError as exc:
        raise _Exit(EXIT_DEGENERATE, f"threshold search degenerate: {exc}") from None
    _emit(reports.dumps(reports.threshold_report(br)), args.out)
    return EXIT_OK


def _write_svg(diag, path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "nonlocal-ap"
    ts = [row.t for row in diag.rows]
    fig, (ax_count, ax_u) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
    ax_count.plot(ts, [row.count for row in diag.rows], marker="o")
    ax_count.set_ylabel("solutions")
    width = max((row.count for row in diag.rows), default=0)
    for k in range(width):
        pts = [(row.t, row.summaries()[k]) for row in diag.rows if row.count > k]
        ax_u.plot([p[0] for p in pts], [p[1][0] for p in pts], marker=".", label=f"min u ({k + 1})")
        ax_u.plot([p[0] for p in pts], [p[1][1] for p in pts], marker=".", label=f"max u ({k + 1})")
    ax_u.set_xlabel("t")
    ax_u.set_ylabel("u")
    if width:
        ax_u.legend(fontsize="small")
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_diagram(cfg: RunConfig, args) -> int:
    prob = _audited_problem(cfg)
    seeds = cfg.get_floats("diagram", "seeds")
    diag = diagram(
        prob.family,
        cfg.get_floats("diagram", "t_values"),
        {
            "newton_max_iter": cfg.get_int("diagram", "newton_max_iter"),
            "use_ladder": cfg.get_bool("diagram", "use_ladder"),
            "seeds": seeds or None,
        },
    )
    for msg in diag.diagnostics:
        log.warning(msg)
    _emit(reports.diagram_csv(diag), args.out)
    if args.svg:
        _write_svg(diag, args.svg)
    return EXIT_OK


def cmd_check(cfg: RunConfig, args) -> int:
    bare = build_problem(cfg, with_operator=False)
    audit = audit_kernel(bare.grid, bare.kernel)
    payload = {"kernel": audit.as_dict()}
    if audit.passed:
        prob = build_problem(cfg, with_operator=True)
        inst = prob.family.at(prob.t)
        try:
            R = search_radius(inst)
        except HypothesisError:
            R = 1.0
        report = audit_hypotheses(prob.nl, prob.op.rowsum.sup, prob.eig.lambda1, R)
        payload["hypotheses"] = report.as_dict()
    _emit(reports.dumps(payload), args.out)
    return EXIT_OK


COMMANDS = {
    "eigen": cmd_eigen,
    "solve": cmd_solve,
    "threshold": cmd_threshold,
    "diagram": cmd_diagram,
    "check": cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nonlocal-ap",
        description="Solvers for nonlocal dispersal equations L0 u = f(u) + t d + g1.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=schema_help(),
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__name__.replace("cmd_", "") + " subcommand",
                           formatter_class=argparse.RawDescriptionHelpFormatter, epilog=schema_help())
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--out", help="output path (default: stdout)")
        if name == "solve":
            p.add_argument("--method", choices=["monotone", "picard", "newton", "auto"],
                           help="overrides [solver] method")
            p.add_argument("--format", choices=["json", "csv"], default="json")
        if name == "diagram":
            p.add_argument("--svg", help="also plot counts and solution extrema to this SVG file")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = RunConfig.load(args.config)
        return COMMANDS[args.command](cfg, args)
    except _Exit as exc:
        print(f"nonlocal-ap: {exc}", file=sys.stderr)
        return exc.code
    except HypothesisError as exc:
        print(f"nonlocal-ap: hypothesis audit failed: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except (NonlocalAPError, OSError, MemoryError, ValueError) as exc:
        print(f"nonlocal-ap: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
