"""Deterministic JSON and CSV writers.

Every float is printed with 17 significant digits so that repeated runs
can be compared byte for byte.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .ap_analysis import APDiagram, ThresholdBracket
from .dispersal import DiscreteOperator, EigenPair
from .solver import SolveReport

__all__ = [
    "fmt",
    "dumps",
    "eigen_report",
    "solution_report",
    "solution_csv",
    "threshold_report",
    "diagram_csv",
]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _encode(obj, indent: int, level: int) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        # numeric arrays stay on one line
        return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        pad = " " * (indent * (level + 1))
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + " " * (indent * level) + "}"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def _nodes(op: DiscreteOperator):
    nodes = op.grid.nodes
    return nodes[:, 0] if nodes.shape[1] == 1 else nodes


def eigen_report(op: DiscreteOperator, eig: EigenPair) -> dict:
    return {
        "lambda1": eig.lambda1,
        "phi1": eig.phi1,
        "residual": eig.residual,
        "nodes": _nodes(op),
        "weights": op.weights,
    }


def solution_report(rep: SolveReport) -> dict:
    return {"t": rep.t, "method": rep.method, "residual_inf": rep.residual_inf, "u": rep.solution}


def solution_csv(op: DiscreteOperator, rep: SolveReport) -> str:
    axes = ["x", "y"][: op.grid.dim]
    lines = [",".join(["node_index", *axes, "u"])]
    for i, (p, u) in enumerate(zip(op.grid.nodes, rep.solution)):
        lines.append(",".join([str(i), *(fmt(c) for c in p), fmt(u)]))
    return "\n".join(lines) + "\n"


def threshold_report(br: ThresholdBracket) -> dict:
    return {
        "t_exist": br.t_exist,
        "t_fail": br.t_fail,
        "m_positive": br.bound.m_positive,
        "m_all": br.bound.m_all,
        "certificate_residual": br.certificate.residual_inf,
    }


def diagram_csv(diag: APDiagram) -> str:
    """``t,count,u_min_1,u_max_1,...``; short rows padded with empty fields.

    Diagnostics follow the data as ``#``-prefixed lines.
    """
    width = max((row.count for row in diag.rows), default=0)
    header = ["t", "count"]
    for k in range(1, width + 1):
        header += [f"u_min_{k}", f"u_max_{k}"]
    lines = [",".join(header)]
    for row in diag.rows:
        fields = [fmt(row.t), str(row.count)]
        for lo, hi, _ in row.summaries():
            fields += [fmt(lo), fmt(hi)]
        fields += [""] * (len(header) - len(fields))
        lines.append(",".join(fields))
    lines += [f"# {msg}" for msg in diag.diagnostics]
    return "\n".join(lines) + "\n"
