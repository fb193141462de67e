"""Run configuration: an INI-style file with ``[section]`` headers and ``#`` comments.

Every key, its default and meaning is listed in :data:`SCHEMA`; unknown
sections and keys are rejected with their file location.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ap_analysis import ProblemFamily
from .dispersal import DiscreteOperator, EigenPair, assemble, decompose_forcing, principal_eigenpair
from .domain_kernel import Domain, Grid, KernelSpec, build_grid, load_table_kernel
from .exceptions import NonlocalAPError
from .nonlinearity import Nonlinearity

__all__ = ["ConfigError", "RunConfig", "SCHEMA", "Problem", "build_problem", "schema_help"]


class ConfigError(NonlocalAPError, ValueError):
    pass


# section -> key -> (default, help)
SCHEMA: dict[str, dict[str, tuple[str, str]]] = {
    "domain": {
        "lo": ("0.0", "lower corner, one value per axis (comma separated)"),
        "hi": ("1.0", "upper corner, one value per axis"),
        "n": ("201", "nodes per axis; a single value applies to every axis"),
    },
    "kernel": {
        "family": ("constant", "constant | gaussian | poly_rank2 | table"),
        "c": ("1.0", "constant family: level"),
        "amplitude": ("1.0", "gaussian family: amplitude"),
        "width": ("1.0", "gaussian family: width"),
        "c0": ("1.0", "poly_rank2 family: K = c0 + c1 <x, y>"),
        "c1": ("1.0", "poly_rank2 family: K = c0 + c1 <x, y>"),
        "table": ("", "table family: CSV path, relative to the config file"),
        "delta": ("", "positivity radius for the K2 audit; empty = grid spacing"),
        "max_nodes": ("4096", "refuse to assemble more nodes than this"),
    },
    "nonlinearity": {
        "family": ("piecewise_linear", "piecewise_linear | smooth_ap"),
        "a_neg": ("0.5", "piecewise_linear: slope for s <= 0"),
        "A_pos": ("2.0", "piecewise_linear: slope for s > 0"),
        "a": ("0.5", "smooth_ap: slope at -inf"),
        "A": ("2.0", "smooth_ap: slope at +inf"),
        "C": ("0.0", "declared offset in f(s) >= A s - C for s >= 0"),
    },
    "forcing": {
        "mode": ("eigen", "eigen (g = t phi1 + g1) | constant (g = t + g1)"),
        "t": ("-1.0", "coefficient of the forcing direction"),
        "g1": ("zero", "profile for the orthogonal part: zero | linear | cosine"),
        "g1_scale": ("1.0", "multiplier of the g1 profile"),
        "g1_file": ("", "CSV with node_index,value rows; overrides g1"),
    },
    "solver": {
        "method": ("auto", "auto | monotone | picard | newton"),
        "tol": ("1e-10", "step-size stopping tolerance"),
        "max_iter": ("10000", "monotone and Picard iteration cap"),
        "newton_max_iter": ("100", "Newton steps per seed"),
        "picard_M": ("", "Picard constant; empty = 2 x slope bound on [-R, R]"),
        "picard_u0": ("0.0", "constant initial guess for Picard"),
        "beta": ("", "monotone shift; empty = automatic"),
        "eigen_method": ("eigh", "eigh | power"),
    },
    "threshold": {
        "t_lo_hint": ("-1.0", "first t probed for existence"),
        "tol_t": ("1e-6", "target bracket width"),
        "max_bisect": ("60", "bisection steps"),
        "max_doublings": ("60", "downward doublings before giving up"),
    },
    "diagram": {
        "t_values": ("", "ascending t values, comma separated"),
        "newton_max_iter": ("100", "Newton steps per seed"),
        "use_ladder": ("true", "use the sub/supersolution route before Newton"),
        "seeds": ("", "constant Newton seeds replacing the defaults"),
    },
}


def schema_help() -> str:
    lines = ["configuration keys (default in brackets):"]
    for section, keys in SCHEMA.items():
        lines.append(f"  [{section}]")
        for key, (default, text) in keys.items():
            lines.append(f"    {key} [{default or '-'}]: {text}")
    return "\n".join(lines)


def _locate(text: str, section: str, key: str | None) -> int | None:
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return lineno
        elif current == section and key is not None and "=" in line:
            if line.split("=", 1)[0].strip() == key:
                return lineno
    return None


@dataclass
class RunConfig:
    values: dict
    path: Path | None = None

    @classmethod
    def from_text(cls, text: str, path: Path | None = None) -> "RunConfig":
        parser = configparser.ConfigParser(
            comment_prefixes=("#",), inline_comment_prefixes=("#",), interpolation=None, default_section="\0"
        )
        parser.optionxform = str
        where = str(path) if path else "<config>"
        try:
            parser.read_string(text, source=where)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        values = {s: {k: d for k, (d, _) in keys.items()} for s, keys in SCHEMA.items()}
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"{where}:{_locate(text, section, None)}: unknown section [{section}]")
            for key, val in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(f"{where}:{_locate(text, section, key)}: unknown key '{key}' in [{section}]")
                values[section][key] = val.strip()
        return cls(values, path)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        return cls.from_text(path.read_text(encoding="utf-8"), path)

    def raw(self, section: str, key: str) -> str:
        return self.values[section][key]

    def _convert(self, section, key, conv):
        raw = self.raw(section, key)
        try:
            return conv(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {raw!r} is not valid") from None

    def get_float(self, section: str, key: str) -> float | None:
        return None if self.raw(section, key) == "" else self._convert(section, key, float)

    def get_int(self, section: str, key: str) -> int:
        return self._convert(section, key, int)

    def get_bool(self, section: str, key: str) -> bool:
        raw = self.raw(section, key).lower()
        if raw in ("1", "true", "yes", "on"):
            return True
        if raw in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a boolean")

    def get_floats(self, section: str, key: str) -> list[float]:
        raw = self.raw(section, key)
        if raw == "":
            return []
        return self._convert(section, key, lambda r: [float(v) for v in r.split(",") if v.strip()])

    def resolve(self, relpath: str) -> Path:
        p = Path(relpath)
        if not p.is_absolute() and self.path is not None:
            p = self.path.parent / p
        return p


@dataclass(eq=False)
class Problem:
    grid: Grid
    kernel: KernelSpec
    op: DiscreteOperator | None = None
    eig: EigenPair | None = None
    nl: Nonlinearity | None = None
    family: ProblemFamily | None = None
    t: float = 0.0


def build_domain(cfg: RunConfig) -> Domain:
    lo, hi = cfg.get_floats("domain", "lo"), cfg.get_floats("domain", "hi")
    counts = [int(v) for v in cfg.get_floats("domain", "n")]
    if len(lo) != len(hi):
        raise ConfigError("[domain] lo and hi need the same number of axes")
    if len(counts) == 1:
        counts = counts * len(lo)
    return Domain(tuple(zip(lo, hi)), tuple(counts))


def build_kernel(cfg: RunConfig, grid: Grid) -> KernelSpec:
    family = cfg.raw("kernel", "family")
    delta = cfg.get_float("kernel", "delta")
    if family == "constant":
        return KernelSpec.constant(cfg.get_float("kernel", "c"), delta)
    if family == "gaussian":
        return KernelSpec.gaussian(cfg.get_float("kernel", "amplitude"), cfg.get_float("kernel", "width"), delta)
    if family == "poly_rank2":
        return KernelSpec.poly_rank2(cfg.get_float("kernel", "c0"), cfg.get_float("kernel", "c1"), delta)
    if family == "table":
        if not cfg.raw("kernel", "table"):
            raise ConfigError("[kernel] table family needs a 'table' path")
        return load_table_kernel(cfg.resolve(cfg.raw("kernel", "table")), grid, delta)
    raise ConfigError(f"[kernel] unknown family {family!r}")


def build_nonlinearity(cfg: RunConfig) -> Nonlinearity:
    family = cfg.raw("nonlinearity", "family")
    C = cfg.get_float("nonlinearity", "C") or 0.0
    try:
        if family == "piecewise_linear":
            return Nonlinearity.piecewise_linear(
                cfg.get_float("nonlinearity", "a_neg"), cfg.get_float("nonlinearity", "A_pos"), C
            )
        if family == "smooth_ap":
            return Nonlinearity.smooth_ap(cfg.get_float("nonlinearity", "a"), cfg.get_float("nonlinearity", "A"), C)
    except ValueError as exc:
        raise ConfigError(f"[nonlinearity] {exc}") from None
    raise ConfigError(f"[nonlinearity] unknown family {family!r}")


def _g1_profile(cfg: RunConfig, grid: Grid) -> np.ndarray:
    if cfg.raw("forcing", "g1_file"):
        path = cfg.resolve(cfg.raw("forcing", "g1_file"))
        data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
        prof = np.zeros(grid.n)
        prof[data[:, 0].astype(int)] = data[:, 1]
        return prof
    kind = cfg.raw("forcing", "g1")
    lo = np.array([b[0] for b in grid.domain.bounds])
    hi = np.array([b[1] for b in grid.domain.bounds])
    xi = (grid.nodes - lo) / (hi - lo)
    if kind == "zero":
        return np.zeros(grid.n)
    if kind == "linear":
        return np.sum(xi - 0.5, axis=1)
    if kind == "cosine":
        return np.prod(np.cos(np.pi * xi), axis=1)
    raise ConfigError(f"[forcing] unknown g1 profile {kind!r}")


def build_problem(cfg: RunConfig, with_operator: bool = True) -> Problem:
    """Grid and kernel always; operator, eigenpair and family when requested."""
    grid = build_grid(build_domain(cfg))
    kernel = build_kernel(cfg, grid)
    prob = Problem(grid, kernel)
    if not with_operator:
        return prob
    prob.op = assemble(grid, kernel, max_nodes=cfg.get_int("kernel", "max_nodes"))
    prob.eig = principal_eigenpair(prob.op, method=cfg.raw("solver", "eigen_method"))
    prob.nl = build_nonlinearity(cfg)
    mode = cfg.raw("forcing", "mode")
    if mode not in ("eigen", "constant"):
        raise ConfigError(f"[forcing] unknown mode {mode!r}")
    profile = cfg.get_float("forcing", "g1_scale") * _g1_profile(cfg, grid)
    g1 = decompose_forcing(prob.op, prob.eig, profile, mode).g1
    prob.family = ProblemFamily(prob.op, prob.eig, prob.nl, g1, mode)
    prob.t = cfg.get_float("forcing", "t")
    return prob
