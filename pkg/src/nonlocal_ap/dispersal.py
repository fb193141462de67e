"""Nyström discretisation of the dispersal operator ``u -> int K(., y) u(y) dy``.

The matrix is ``M[i, j] = w_j K(x_i, x_j)``. It is not symmetric, but
``diag(w) M`` is, so the principal eigenpair is computed on the similar
symmetric matrix ``S = W^{1/2} K W^{1/2}``.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .domain_kernel import Grid, KernelSpec, RowSum, kernel_matrix, row_sums
from .exceptions import ConvergenceError, HypothesisError

__all__ = [
    "DiscreteOperator",
    "EigenPair",
    "ForcingDecomposition",
    "assemble",
    "apply",
    "principal_eigenpair",
    "shifted_solve",
    "decompose_forcing",
    "phi1_integral",
    "DEFAULT_MAX_NODES",
]

DEFAULT_MAX_NODES = 4096


@dataclass(eq=False)
class DiscreteOperator:
    grid: Grid
    kernel: KernelSpec
    matrix: np.ndarray
    rowsum: RowSum
    _factors: dict = field(default_factory=dict, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights

    def apply(self, u) -> np.ndarray:
        return apply(self, u)

    def shifted_solve(self, beta: float, rhs) -> np.ndarray:
        return shifted_solve(self, beta, rhs)

    def _lu(self, beta: float):
        with self._lock:
            lu = self._factors.get(beta)
            if lu is None:
                lu = scipy.linalg.lu_factor(self.matrix - beta * np.eye(self.n))
                # a handful of shifts per run; keep the cache small anyway
                if len(self._factors) >= 8:
                    self._factors.pop(next(iter(self._factors)))
                self._factors[beta] = lu
            return lu


def assemble(grid: Grid, spec: KernelSpec, max_nodes: int = DEFAULT_MAX_NODES) -> DiscreteOperator:
    """Dense Nyström matrix of the dispersal operator with its row sums attached."""
    if grid.n > max_nodes:
        raise MemoryError(f"{grid.n} nodes exceed the configured cap of {max_nodes}")
    matrix = kernel_matrix(spec, grid.nodes, grid.nodes) * grid.weights[None, :]
    matrix.setflags(write=False)
    return DiscreteOperator(grid, spec, matrix, row_sums(grid, spec, matrix))


def apply(op: DiscreteOperator, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (op.n,):
        raise ValueError(f"expected {op.n} nodal values, got shape {u.shape}")
    return op.matrix @ u


def shifted_solve(op: DiscreteOperator, beta: float, rhs) -> np.ndarray:
    """Solve ``(M - beta I) u = rhs``; requires ``beta > sup k``.

    Under that condition ``beta I - M`` is strictly diagonally dominant with
    nonpositive off-diagonal entries, so it is a nonsingular M-matrix and its
    inverse is entrywise nonnegative.
    """
    if not beta > op.rowsum.sup:
        raise HypothesisError(
            f"shift beta={beta!r} must exceed the maximal row sum {op.rowsum.sup!r}"
        )
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (op.n,):
        raise ValueError(f"expected {op.n} nodal values, got shape {rhs.shape}")
    return scipy.linalg.lu_solve(op._lu(float(beta)), rhs)


@dataclass(frozen=True, eq=False)
class EigenPair:
    lambda1: float
    phi1: np.ndarray
    residual: float


def _positivity_connected(op: DiscreteOperator) -> bool:
    adjacency = csr_matrix((op.matrix > 0) & ~np.eye(op.n, dtype=bool))
    n_comp, _ = connected_components(adjacency, directed=False)
    return n_comp == 1


def _power_iteration(S: np.ndarray, shift: float, tol: float, max_iter: int, v0: np.ndarray):
    v = v0 / np.linalg.norm(v0)
    lam = v @ S @ v
    for it in range(1, max_iter + 1):
        y = S @ v + shift * v
        v_new = y / np.linalg.norm(y)
        lam_new = v_new @ S @ v_new
        # the Rayleigh quotient settles long before the vector does; stop on the residual
        res = np.max(np.abs(S @ v_new - lam_new * v_new))
        if abs(lam_new - lam) <= tol * abs(lam_new) and res <= tol * (1 + abs(lam_new)):
            return lam_new, v_new, it
        v, lam = v_new, lam_new
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


def principal_eigenpair(
    op: DiscreteOperator,
    method: str = "eigh",
    tol: float = 1e-12,
    max_iter: int = 10_000,
) -> EigenPair:
    """Perron eigenpair ``(lambda1, phi1)`` with ``phi1 > 0`` and ``sum w phi1^2 = 1``.

    ``method="eigh"`` uses the LAPACK symmetric solver; ``method="power"``
    runs a shifted power iteration on the same symmetric matrix.
    """
    if not _positivity_connected(op):
        raise HypothesisError("positivity graph of the kernel is disconnected; Perron root need not be simple")
    sw = np.sqrt(op.weights)
    K = op.matrix / op.weights[None, :]
    S = sw[:, None] * K * sw[None, :]
    S = 0.5 * (S + S.T)
    if method == "eigh":
        vals, vecs = np.linalg.eigh(S)
        lam, v = float(vals[-1]), vecs[:, -1]
    elif method == "power":
        lam, v, _ = _power_iteration(S, 0.25 * op.rowsum.sup, tol, max_iter, sw.copy())
        lam = float(lam)
    else:
        raise ValueError(f"unknown eigen method {method!r}")
    phi = v / sw
    if phi[np.argmax(np.abs(phi))] < 0:
        phi = -phi
    phi = phi / np.sqrt(np.sum(op.weights * phi**2))
    if not np.all(phi > 0):
        raise ConvergenceError(f"principal eigenvector not strictly positive (min {phi.min():.3e})")
    residual = float(np.max(np.abs(op.matrix @ phi - lam * phi)))
    if residual > 1e-10 * (1 + lam):
        raise ConvergenceError(f"eigen residual {residual:.3e} above 1e-10 (1 + lambda1)")
    phi.setflags(write=False)
    return EigenPair(lam, phi, residual)


def phi1_integral(op: DiscreteOperator, eig: EigenPair) -> float:
    """Quadrature of ``int phi1``."""
    return float(np.sum(op.weights * eig.phi1))


@dataclass(frozen=True, eq=False)
class ForcingDecomposition:
    """``g = t * direction + g1`` with ``g1`` orthogonal to the direction.

    ``direction`` is ``phi1`` in eigen mode and the constant 1 in constant mode.
    """

    g: np.ndarray
    t: float
    g1: np.ndarray
    mode: str
    direction: np.ndarray

    def recompose(self, t: float | None = None) -> np.ndarray:
        return (self.t if t is None else t) * self.direction + self.g1

    def with_t(self, t: float) -> "ForcingDecomposition":
        return ForcingDecomposition(self.recompose(t), float(t), self.g1, self.mode, self.direction)


def decompose_forcing(
    op: DiscreteOperator,
    eig: EigenPair | None,
    g,
    mode: str = "eigen",
) -> ForcingDecomposition:
    g = np.asarray(g, dtype=float)
    if g.shape != (op.n,):
        raise ValueError(f"expected {op.n} nodal values, got shape {g.shape}")
    w = op.weights
    if mode == "eigen":
        if eig is None:
            raise ValueError("eigen mode needs the principal eigenpair")
        direction = eig.phi1
        t = float(np.sum(w * g * direction))
    elif mode == "constant":
        direction = np.ones(op.n)
        t = float(np.sum(w * g) / op.grid.measure)
    else:
        raise ValueError(f"unknown forcing mode {mode!r}")
    return ForcingDecomposition(g, t, g - t * direction, mode, direction)
