"""Symmetric V-cycle, its error propagation operator, and a PCG driver."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sl

from . import kernels
from .assembly import SystemOperator, assemble_operator
from .mesh import GridHierarchy, build_hierarchy
from .smoothers import SmootherBlocks, apply_smoother, build_blocks, check_damping
from .transfer import ProlongationOperator, build_prolongation

__all__ = [
    "MultigridHierarchy",
    "build_multigrid",
    "mg_apply",
    "error_propagation_apply",
    "pcg_solve",
    "PCGResult",
]

logger = logging.getLogger(__name__)


@dataclass
class MultigridHierarchy:
    """Everything one V-cycle needs, for levels ``0..top``.

    ``prolongations[k]`` and ``smoothers[k]`` exist for ``k >= 1``; index 0
    holds ``None``.
    """

    grids: GridHierarchy
    alpha: float
    kind: str
    eta: float
    m: int
    operators: list[SystemOperator]
    prolongations: list[ProlongationOperator | None]
    smoothers: list[SmootherBlocks | None]
    coarse_factor: tuple = field(repr=False, default=None)

    @property
    def top(self) -> int:
        return len(self.operators) - 1

    def mg(self, k: int, g: np.ndarray, z0: np.ndarray | None = None, m: int | None = None) -> np.ndarray:
        return mg_apply(self, k, g, z0, self.m if m is None else m)

    def precondition(self, g: np.ndarray, k: int | None = None, m: int | None = None) -> np.ndarray:
        """One V-cycle from a zero initial guess, ``B_k g``."""
        k = self.top if k is None else k
        return mg_apply(self, k, g, None, self.m if m is None else m)

    def error(self, k: int, w: np.ndarray, m: int | None = None) -> np.ndarray:
        return error_propagation_apply(self, k, w, self.m if m is None else m)


def build_multigrid(
    levels: int | GridHierarchy,
    alpha: float,
    kind: str = "edge",
    eta: float | None = None,
    m: int = 1,
    unsafe_damping: bool = False,
    check_galerkin: bool = False,
) -> MultigridHierarchy:
    """Assemble operators, transfers and smoothers on levels ``0..levels``."""
    if m < 1:
        raise ValueError(f"need at least one smoothing step, got m={m}")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    eta = check_damping(kind, eta, unsafe_damping)
    grids = levels if isinstance(levels, GridHierarchy) else build_hierarchy(levels)
    ops = [assemble_operator(grids, k, alpha) for k in range(len(grids))]
    prols: list = [None]
    smoothers: list = [None]
    for k in range(1, len(grids)):
        prols.append(build_prolongation(grids, k))
        smoothers.append(build_blocks(grids, ops[k], k, kind, eta, unsafe_damping))
        if check_galerkin:
            P = prols[k].matrix
            diff = abs(P.T @ ops[k].matrix @ P - ops[k - 1].matrix).max()
            scale = abs(ops[k - 1].matrix).max()
            if diff > 1e-12 * scale:
                raise AssertionError(f"Galerkin identity violated at level {k}: {diff:.3e}")
    factor = sl.cho_factor(ops[0].matrix.toarray(), lower=True)
    return MultigridHierarchy(grids, float(alpha), kind, float(eta), m, ops, prols, smoothers, factor)


def mg_apply(
    hier: MultigridHierarchy,
    k: int,
    g: np.ndarray,
    z0: np.ndarray | None,
    m: int,
) -> np.ndarray:
    """``MG(k, g, z0, m)``: m pre-smoothings, coarse correction, m post-smoothings."""
    if not 0 <= k <= hier.top:
        raise ValueError(f"level {k} outside 0..{hier.top}")
    if m < 1:
        raise ValueError(f"need at least one smoothing step, got m={m}")
    g = np.asarray(g, dtype=float)
    n = hier.operators[k].size
    if g.shape != (n,):
        raise ValueError(f"functional of shape {g.shape} on level {k} of size {n}")
    if k == 0:
        return sl.cho_solve(hier.coarse_factor, g)

    A = hier.operators[k].matrix
    M = hier.smoothers[k]
    P = hier.prolongations[k]
    if z0 is None:
        z = np.zeros(n)
    else:
        z = np.array(z0, dtype=float)
        if z.shape != (n,):
            raise ValueError(f"initial guess of shape {z.shape} on level {k} of size {n}")

    for _ in range(m):
        z += apply_smoother(M, kernels.residual(A, g, z))
    gbar = P.matrix.T @ kernels.residual(A, g, z)
    z += P.matrix @ mg_apply(hier, k - 1, gbar, None, m)
    for _ in range(m):
        z += apply_smoother(M, kernels.residual(A, g, z))
    return z


def error_propagation_apply(hier: MultigridHierarchy, k: int, w: np.ndarray, m: int) -> np.ndarray:
    """``E_k w = w - MG(k, A_k w, 0, m)``; on level 0 the exact solve gives zero."""
    w = np.asarray(w, dtype=float)
    if k == 0:
        return np.zeros_like(w)
    return w - mg_apply(hier, k, hier.operators[k].apply(w), None, m)


@dataclass
class PCGResult:
    solution: np.ndarray
    iterations: int
    converged: bool
    residual_ratio: float

    def __iter__(self):
        # unpack as (solution, iterations)
        yield self.solution
        yield self.iterations


def pcg_solve(
    hier: MultigridHierarchy,
    f: np.ndarray,
    rel_tol: float = 1e-10,
    max_iters: int = 200,
    k: int | None = None,
    m: int | None = None,
) -> PCGResult:
    """Conjugate gradients preconditioned by one V-cycle per iteration.

    Stops when ``sqrt(r^T B r)`` has dropped by ``rel_tol`` relative to its
    initial value. On hitting ``max_iters`` the last iterate is returned
    with ``converged=False``.
    """
    if not rel_tol > 0:
        raise ValueError(f"rel_tol must be positive, got {rel_tol}")
    k = hier.top if k is None else k
    A = hier.operators[k]
    f = np.asarray(f, dtype=float)
    x = np.zeros(A.size)
    r = f.copy()
    z = hier.precondition(r, k, m)
    rz = float(r @ z)
    if rz <= 0.0:
        return PCGResult(x, 0, True, 0.0)
    norm0 = np.sqrt(rz)
    p = z.copy()
    ratio = 1.0
    if ratio <= rel_tol:
        return PCGResult(x, 0, True, ratio)
    for it in range(1, max_iters + 1):
        Ap = A.apply(p)
        step = rz / float(p @ Ap)
        x += step * p
        r -= step * Ap
        z = hier.precondition(r, k, m)
        rz_new = float(r @ z)
        ratio = np.sqrt(max(rz_new, 0.0)) / norm0
        logger.debug("pcg iteration %d: preconditioned residual ratio %.3e", it, ratio)
        if ratio <= rel_tol:
            return PCGResult(x, it, True, ratio)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return PCGResult(x, max_iters, False, ratio)
