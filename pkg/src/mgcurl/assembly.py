"""Global sparse operators ``A = alpha * K + M`` over interior edge DOFs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .element import gauss_points, local_matrices, shape_values
from .mesh import GridHierarchy, GridLevel, cell_dofs

__all__ = [
    "SystemOperator",
    "LoadVector",
    "assemble_operator",
    "assemble_matrix",
    "assemble_load",
    "apply",
    "a_inner",
    "l2_inner",
    "dump_operator",
    "evaluate_field",
]


def assemble_matrix(level: GridLevel, local: np.ndarray) -> sp.csr_matrix:
    """Sum a 12x12 local matrix over all cells, dropping boundary rows/columns.

    Duplicates are summed in COO order, which is fixed, so the result is
    reproducible bit for bit.
    """
    dofs = cell_dofs(level, level.cells).astype(np.int64)
    rows = np.repeat(dofs, 12, axis=1)
    cols = np.tile(dofs, (1, 12))
    vals = np.broadcast_to(local.ravel(), rows.shape)
    keep = (rows >= 0) & (cols >= 0)
    n = level.num_dofs
    mat = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def _level_matrices(hierarchy: GridHierarchy, k: int) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    cache = hierarchy._operator_cache
    if k not in cache:
        level = hierarchy[k]
        loc = local_matrices(level.h)
        cache[k] = (assemble_matrix(level, loc.curlcurl), assemble_matrix(level, loc.mass))
    return cache[k]


@dataclass(frozen=True)
class SystemOperator:
    """The discrete operator of one level.

    ``matrix`` is ``alpha * curlcurl + mass`` in CSR form with sorted columns.
    """

    level: int
    alpha: float
    matrix: sp.csr_matrix
    mass: sp.csr_matrix
    curlcurl: sp.csr_matrix

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.size:
            raise ValueError(f"vector of length {x.shape[0]} for an operator of size {self.size}")
        return x

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ self._check(x)

    def a_inner(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(self._check(x) @ (self.matrix @ self._check(y)))

    def l2_inner(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(self._check(x) @ (self.mass @ self._check(y)))

    def curl_energy(self, x: np.ndarray) -> float:
        """``||curl x||^2`` without the coefficient."""
        x = self._check(x)
        return float(x @ (self.curlcurl @ x))


def assemble_operator(hierarchy: GridHierarchy, level: int, alpha: float) -> SystemOperator:
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    K, M = _level_matrices(hierarchy, level)
    A = (alpha * K + M).tocsr()
    A.sort_indices()
    return SystemOperator(level, float(alpha), A, M, K)


def apply(op: SystemOperator, x: np.ndarray) -> np.ndarray:
    return op.apply(x)


def a_inner(op: SystemOperator, x: np.ndarray, y: np.ndarray) -> float:
    return op.a_inner(x, y)


def l2_inner(op: SystemOperator, x: np.ndarray, y: np.ndarray) -> float:
    return op.l2_inner(x, y)


@dataclass(frozen=True)
class LoadVector:
    level: int
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def assemble_load(
    hierarchy: GridHierarchy,
    level: int,
    f: Callable[[np.ndarray], np.ndarray],
    order: int = 4,
) -> LoadVector:
    """Entries ``(f, phi_e)`` by tensor Gauss quadrature of ``order`` points per axis.

    ``f`` maps an ``(m, 3)`` array of physical points to ``(m, 3)`` values.
    """
    if order < 2:
        raise ValueError(f"quadrature order must be >= 2, got {order}")
    lev = hierarchy[level]
    h = lev.h
    pts, wts = gauss_points((h, h, h), order)
    phi = shape_values(pts, (h, h, h))  # (q, 12, 3)
    cells = lev.cells
    origins = lev.cell_origin(cells)
    xq = (origins[:, None, :] + pts[None, :, :]).reshape(-1, 3)
    fq = np.asarray(f(xq), dtype=float).reshape(len(cells), len(wts), 3)
    local = np.einsum("q,cqa,qea->ce", wts, fq, phi)
    dofs = cell_dofs(lev, cells).astype(np.int64)
    keep = dofs >= 0
    out = np.bincount(dofs[keep], weights=local[keep], minlength=lev.num_dofs)
    return LoadVector(level, out)


def evaluate_field(level: GridLevel, coeffs: np.ndarray, cells: np.ndarray, local_pts: np.ndarray) -> np.ndarray:
    """Values of a discrete field at local points of the given cells.

    Returns ``(len(cells), len(local_pts), 3)``.
    """
    h = level.h
    dofs = cell_dofs(level, cells).astype(np.int64)
    c = np.where(dofs >= 0, np.asarray(coeffs)[np.maximum(dofs, 0)], 0.0)
    phi = shape_values(local_pts, (h, h, h))
    return np.einsum("ce,qea->cqa", c, phi)


def dump_operator(op: SystemOperator, path) -> None:
    """Write ``row col value`` triplets (0-based, 17 significant digits)."""
    coo = op.matrix.tocoo()
    with open(path, "w") as fh:
        fh.write(f"% mgcurl operator level={op.level} alpha={op.alpha!r} size={op.size} nnz={coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v:.17g}\n")
