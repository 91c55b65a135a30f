"""Prolongation by natural injection of nested Nedelec spaces, and its transpose."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .element import shape_values
from .mesh import GridHierarchy, cell_dofs, transverse_axes

__all__ = ["ProlongationOperator", "build_prolongation", "restrict", "prolong", "injection_weights"]


def _fine_edges_in_cell() -> np.ndarray:
    """The 54 fine edges of a refined unit cell, as local fine lattice rows."""
    rows = []
    for d in range(3):
        t1, t2 = transverse_axes(d)
        for s in (0, 1):
            for a in (0, 1, 2):
                for b in (0, 1, 2):
                    lat = [0, 0, 0]
                    lat[d], lat[t1], lat[t2] = s, a, b
                    rows.append((d, *lat))
    return np.array(rows, dtype=np.int64)


@lru_cache(maxsize=1)
def injection_weights() -> tuple[np.ndarray, np.ndarray]:
    """``(W, fine_lattice)`` with ``W[i, e] = lambda_i(phi_e)`` on one coarse cell.

    ``W`` is ``(54, 12)``: each coarse basis function is sampled at the
    midpoint of every fine edge inside the closed coarse cell and the
    component along that fine edge is kept. All coarse cells are congruent
    so one table serves every cell and level.
    """
    fine = _fine_edges_in_cell()
    hf = 0.5
    mid = fine[:, 1:].astype(float) * hf
    mid[np.arange(len(fine)), fine[:, 0]] += 0.5 * hf
    phi = shape_values(mid, (1.0, 1.0, 1.0))  # (54, 12, 3)
    W = phi[np.arange(len(fine)), :, fine[:, 0]]
    W[np.abs(W) < 1e-15] = 0.0
    return W, fine


@dataclass(frozen=True)
class ProlongationOperator:
    """Sparse map from level ``k - 1`` DOFs to level ``k`` DOFs."""

    level: int
    matrix: sp.csr_matrix

    def prolong(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.matrix.shape[1]:
            raise ValueError("coarse vector has the wrong length")
        return self.matrix @ v

    def restrict(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if r.shape[0] != self.matrix.shape[0]:
            raise ValueError("fine functional has the wrong length")
        return self.matrix.T @ r


def build_prolongation(hierarchy: GridHierarchy, k: int) -> ProlongationOperator:
    if k < 1:
        raise ValueError("prolongation needs a fine level k >= 1")
    coarse, fine = hierarchy[k - 1], hierarchy[k]
    W, flat = injection_weights()
    cells = coarse.cells
    cdofs = cell_dofs(coarse, cells).astype(np.int64)  # (nc, 12)
    lat = 2 * cells[:, None, :] + flat[None, :, 1:]
    fdofs = fine.dof(flat[None, :, 0], lat[..., 0], lat[..., 1], lat[..., 2]).astype(np.int64)  # (nc, 54)

    fi, ce = np.nonzero(W)
    rows = fdofs[:, fi].ravel()
    cols = cdofs[:, ce].ravel()
    vals = np.broadcast_to(W[fi, ce], (len(cells), len(fi))).ravel()
    keep = (rows >= 0) & (cols >= 0)
    rows, cols, vals = rows[keep], cols[keep], vals[keep]

    # fine edges on coarse faces are reached from every adjacent coarse cell;
    # tangential continuity makes the duplicates equal, keep one of each
    key = rows * coarse.num_dofs + cols
    order = np.argsort(key, kind="stable")
    key, vals = key[order], vals[order]
    first = np.ones(len(key), dtype=bool)
    first[1:] = key[1:] != key[:-1]
    group = np.cumsum(first) - 1
    if np.any(vals != vals[np.flatnonzero(first)][group]):
        raise AssertionError("inconsistent injection weights across coarse cells")
    key, vals = key[first], vals[first]
    P = sp.csr_matrix(
        (vals, (key // coarse.num_dofs, key % coarse.num_dofs)),
        shape=(fine.num_dofs, coarse.num_dofs),
    )
    P.sort_indices()
    return ProlongationOperator(k, P)


def prolong(P: ProlongationOperator, v: np.ndarray) -> np.ndarray:
    return P.prolong(v)


def restrict(P: ProlongationOperator, r: np.ndarray) -> np.ndarray:
    """Fine-to-coarse map of functionals, the transpose of prolongation."""
    return P.restrict(r)
