"""Box domains, midpoint quadrature grids and dispersal kernels.

A kernel ``K(x, y)`` is evaluated on grid nodes only; everything downstream
works with the dense node-by-node matrix. Four families are provided:

``constant``
    ``K = c``.
``gaussian``
    ``K = amplitude * exp(-|x - y|^2 / (2 width^2))``.
``poly_rank2``
    ``K = c0 + c1 * <x, y>``; on ``(0, 1)`` with ``c0 = c1 = 1`` this is ``1 + xy``.
``table``
    explicit values at the grid nodes, typically read from CSV with
    :func:`load_table_kernel`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .exceptions import DomainError, HypothesisError, KernelError

__all__ = [
    "Domain",
    "Grid",
    "KernelSpec",
    "RowSum",
    "KernelAudit",
    "build_grid",
    "eval_kernel",
    "kernel_matrix",
    "row_sums",
    "audit_kernel",
    "load_table_kernel",
    "KERNEL_FAMILIES",
]

KERNEL_FAMILIES = ("constant", "gaussian", "poly_rank2", "table")

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``prod_k [lo_k, hi_k]`` with a node count per axis."""

    bounds: tuple[tuple[float, float], ...]
    n_per_axis: tuple[int, ...]

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        counts = tuple(int(n) for n in self.n_per_axis)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "n_per_axis", counts)
        if len(bounds) not in (1, 2):
            raise DomainError(f"dimension must be 1 or 2, got {len(bounds)}")
        if len(counts) != len(bounds):
            raise DomainError("n_per_axis must have one entry per axis")
        for axis, (lo, hi) in enumerate(bounds):
            if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
                raise DomainError(f"axis {axis}: need finite lo < hi, got [{lo}, {hi}]")

    @classmethod
    def interval(cls, lo: float, hi: float, n: int) -> "Domain":
        return cls(((lo, hi),), (n,))

    @classmethod
    def box(cls, lo: Sequence[float], hi: Sequence[float], n: Sequence[int] | int) -> "Domain":
        if isinstance(n, int):
            n = (n,) * len(lo)
        return cls(tuple(zip(lo, hi)), tuple(n))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def measure(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.bounds]))

    @property
    def diameter(self) -> float:
        return float(math.sqrt(sum((hi - lo) ** 2 for lo, hi in self.bounds)))

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.n_per_axis))


@dataclass(frozen=True, eq=False)
class Grid:
    """Quadrature nodes (shape ``(n, dim)``) and positive weights."""

    domain: Domain
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def measure(self) -> float:
        return self.domain.measure

    @property
    def spacing(self) -> float:
        """Largest cell width over the axes."""
        return max((hi - lo) / n for (lo, hi), n in zip(self.domain.bounds, self.domain.n_per_axis))


def build_grid(domain: Domain) -> Grid:
    """Tensor midpoint rule; nodes are cell centres in row-major order."""
    if any(n < 2 for n in domain.n_per_axis):
        raise DomainError(f"need at least 2 nodes per axis, got {domain.n_per_axis}")
    axes = []
    widths = []
    for (lo, hi), n in zip(domain.bounds, domain.n_per_axis):
        h = (hi - lo) / n
        axes.append(lo + h * (np.arange(n) + 0.5))
        widths.append(h)
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    weights = np.full(nodes.shape[0], float(np.prod(widths)))
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return Grid(domain, nodes, weights)


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """A kernel family with its parameters and the declared positivity radius.

    ``delta=None`` means the audit uses the grid spacing, i.e. it asks only
    that nearest neighbours interact.
    """

    family: str
    params: Mapping[str, float] = field(default_factory=dict)
    delta: float | None = None
    table: np.ndarray | None = None
    table_nodes: np.ndarray | None = None
    _index: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise KernelError(f"unknown kernel family {self.family!r}; choose from {KERNEL_FAMILIES}")
        params = {k: float(v) for k, v in dict(self.params).items()}
        expected = {
            "constant": {"c"},
            "gaussian": {"amplitude", "width"},
            "poly_rank2": {"c0", "c1"},
            "table": set(),
        }[self.family]
        if set(params) != expected:
            raise KernelError(
                f"{self.family} kernel needs parameters {sorted(expected)}, got {sorted(params)}"
            )
        if self.family == "constant" and params["c"] < 0:
            raise KernelError("constant kernel level must be nonnegative")
        if self.family == "gaussian" and (params["amplitude"] < 0 or params["width"] <= 0):
            raise KernelError("gaussian kernel needs amplitude >= 0 and width > 0")
        if self.delta is not None and not self.delta > 0:
            raise KernelError(f"delta must be positive, got {self.delta}")
        object.__setattr__(self, "params", params)
        if self.family == "table":
            if self.table is None or self.table_nodes is None:
                raise KernelError("table kernel needs both values and nodes")
            values = np.array(self.table, dtype=float)
            nodes = np.array(self.table_nodes, dtype=float)
            if nodes.ndim == 1:
                nodes = nodes[:, None]
            if values.shape != (nodes.shape[0], nodes.shape[0]):
                raise KernelError(f"table shape {values.shape} does not match {nodes.shape[0]} nodes")
            if not np.all(np.isfinite(values)):
                raise KernelError("table contains non-finite values")
            if np.any(values < 0):
                i, j = np.argwhere(values < 0)[0]
                raise KernelError(f"negative table entry K[{i},{j}] = {values[i, j]}")
            values.setflags(write=False)
            nodes.setflags(write=False)
            object.__setattr__(self, "table", values)
            object.__setattr__(self, "table_nodes", nodes)
            object.__setattr__(self, "_index", {tuple(p): i for i, p in enumerate(nodes)})

    @classmethod
    def constant(cls, c: float = 1.0, delta: float | None = None) -> "KernelSpec":
        return cls("constant", {"c": c}, delta)

    @classmethod
    def gaussian(cls, amplitude: float = 1.0, width: float = 1.0, delta: float | None = None) -> "KernelSpec":
        return cls("gaussian", {"amplitude": amplitude, "width": width}, delta)

    @classmethod
    def poly_rank2(cls, c0: float = 1.0, c1: float = 1.0, delta: float | None = None) -> "KernelSpec":
        return cls("poly_rank2", {"c0": c0, "c1": c1}, delta)

    @classmethod
    def from_table(cls, values, nodes, delta: float | None = None) -> "KernelSpec":
        return cls("table", {}, delta, table=values, table_nodes=nodes)

    def _table_indices(self, pts: np.ndarray) -> np.ndarray:
        if np.array_equal(pts, self.table_nodes):
            return np.arange(pts.shape[0])
        idx = np.empty(pts.shape[0], dtype=int)
        for k, p in enumerate(pts):
            try:
                idx[k] = self._index[tuple(p)]
            except KeyError:
                raise KernelError(f"table kernel queried off-node at {tuple(p)}") from None
        return idx


def _as_points(x) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0:
        return pts.reshape(1, 1)
    if pts.ndim == 1:
        return pts[:, None]
    return pts


def kernel_matrix(spec: KernelSpec, xs, ys) -> np.ndarray:
    """Evaluate ``K(xs[i], ys[j])`` for arrays of points of shape ``(n, dim)``."""
    xs = _as_points(xs)
    ys = _as_points(ys)
    p = spec.params
    if spec.family == "constant":
        return np.full((xs.shape[0], ys.shape[0]), p["c"])
    if spec.family == "gaussian":
        # (x - y)^2 summed per axis; avoids the cancellation of |x|^2 + |y|^2 - 2xy
        d2 = np.zeros((xs.shape[0], ys.shape[0]))
        for k in range(xs.shape[1]):
            d2 += (xs[:, k, None] - ys[None, :, k]) ** 2
        return p["amplitude"] * np.exp(-d2 / (2.0 * p["width"] ** 2))
    if spec.family == "poly_rank2":
        return p["c0"] + p["c1"] * (xs @ ys.T)
    return spec.table[np.ix_(spec._table_indices(xs), spec._table_indices(ys))]


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """``K(x, y)`` for two single points (scalars in 1-D)."""
    return float(kernel_matrix(spec, np.atleast_1d(x)[None, :], np.atleast_1d(y)[None, :])[0, 0])


@dataclass(frozen=True, eq=False)
class RowSum:
    """Nodal values of ``k(x) = int K(x, y) dy``."""

    values: np.ndarray
    sup: float
    inf: float


def row_sums(grid: Grid, spec: KernelSpec, matrix: np.ndarray | None = None) -> RowSum:
    """Quadrature row sums ``k_i = sum_j w_j K(x_i, x_j)``.

    ``matrix`` may pass an already weighted operator matrix so that the row
    sums use exactly the same arithmetic as its rows.
    """
    if matrix is None:
        matrix = kernel_matrix(spec, grid.nodes, grid.nodes) * grid.weights[None, :]
    values = matrix.sum(axis=1)
    values.setflags(write=False)
    return RowSum(values, float(values.max()), float(values.min()))


@dataclass(frozen=True)
class KernelAudit:
    symmetry_defect: float
    symmetry_pair: tuple[int, int] | None
    symmetric: bool
    delta: float
    min_near: float
    min_near_pair: tuple[int, int] | None
    positive: bool
    n_components: int
    connected: bool

    @property
    def passed(self) -> bool:
        return self.symmetric and self.positive and self.connected

    def failures(self) -> list[str]:
        msgs = []
        if not self.symmetric:
            i, j = self.symmetry_pair
            msgs.append(f"K1 (symmetry) fails: |K[{i},{j}] - K[{j},{i}]| = {self.symmetry_defect:.3e}")
        if not self.positive:
            msgs.append(
                f"K2 (positivity within delta={self.delta:g}) fails: min K = {self.min_near:.3e}"
                f" at pair {self.min_near_pair}"
            )
        if not self.connected:
            msgs.append(f"positivity graph has {self.n_components} components")
        return msgs

    def as_dict(self) -> dict:
        return {
            "K1": {
                "passed": self.symmetric,
                "max_defect": self.symmetry_defect,
                "pair": list(self.symmetry_pair) if self.symmetry_pair else None,
            },
            "K2": {
                "passed": self.positive,
                "delta": self.delta,
                "min_value": self.min_near,
                "pair": list(self.min_near_pair) if self.min_near_pair else None,
            },
            "connectivity": {"passed": self.connected, "components": self.n_components},
        }


def audit_kernel(grid: Grid, spec: KernelSpec) -> KernelAudit:
    """Sampled check of symmetry, positivity within ``delta`` and connectivity."""
    K = kernel_matrix(spec, grid.nodes, grid.nodes)
    defect = np.abs(K - K.T)
    sym_flat = int(np.argmax(defect))
    sym_defect = float(defect.flat[sym_flat])
    sym_pair = tuple(int(v) for v in np.unravel_index(sym_flat, K.shape)) if sym_defect > 0 else None

    delta = grid.spacing if spec.delta is None else spec.delta
    # slack of a few ulps so that delta equal to a node distance includes that pair
    dist = np.sqrt(sum((grid.nodes[:, k, None] - grid.nodes[None, :, k]) ** 2 for k in range(grid.dim)))
    near = dist <= delta * (1 + 1e-12)
    masked = np.where(near, K, np.inf)
    min_flat = int(np.argmin(masked))
    min_near = float(masked.flat[min_flat])
    min_pair = tuple(int(v) for v in np.unravel_index(min_flat, K.shape))

    adjacency = csr_matrix((K > 0) & ~np.eye(grid.n, dtype=bool))
    n_comp, _ = connected_components(adjacency, directed=False)

    return KernelAudit(
        symmetry_defect=sym_defect,
        symmetry_pair=sym_pair,
        symmetric=sym_defect <= SYMMETRY_TOL,
        delta=float(delta),
        min_near=min_near,
        min_near_pair=min_pair,
        positive=min_near > 0,
        n_components=int(n_comp),
        connected=n_comp == 1,
    )


def load_table_kernel(path: str | Path, grid: Grid, delta: float | None = None) -> KernelSpec:
    """Read a table kernel CSV (``n_nodes,<count>`` then ``i,j,value`` rows).

    Missing pairs are zero. Negative entries raise :class:`KernelError`; an
    asymmetric table raises :class:`HypothesisError` naming the worst pair.
    The table is never repaired.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows or rows[0][0].strip() != "n_nodes" or len(rows[0]) != 2:
        raise KernelError(f"{path}: first line must be 'n_nodes,<count>'")
    n = int(rows[0][1])
    if n != grid.n:
        raise KernelError(f"{path}: table has {n} nodes but the grid has {grid.n}")
    values = np.zeros((n, n))
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise KernelError(f"{path}:{lineno}: expected i,j,value")
        i, j, v = int(row[0]), int(row[1]), float(row[2])
        if not (0 <= i < n and 0 <= j < n):
            raise KernelError(f"{path}:{lineno}: index out of range")
        if v < 0:
            raise KernelError(f"{path}:{lineno}: negative table entry K[{i},{j}] = {v}")
        values[i, j] = v
    defect = np.abs(values - values.T)
    if defect.max() > SYMMETRY_TOL:
        i, j = np.unravel_index(int(np.argmax(defect)), defect.shape)
        raise HypothesisError(
            f"{path}: table kernel is not symmetric: K[{i},{j}] = {values[i, j]!r}"
            f" but K[{j},{i}] = {values[j, i]!r}"
        )
    return KernelSpec.from_table(values, grid.nodes, delta)
