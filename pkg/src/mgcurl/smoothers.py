"""Nonoverlapping domain-decomposition smoothers.

Both smoothers are damped additive Schwarz sums over two families of local
spaces on the fine level ``k`` built from the coarse grid ``k - 1``:

* one interior space per coarse cell (the 6 fine edges strictly inside it);
* one space per interior coarse edge (``kind="edge"``) or per interior
  coarse vertex (``kind="vertex"``). Its free DOFs are the fine skeleton
  edges on the faces and edges around the entity; the DOFs inside the
  adjacent coarse cells are slaved to them by discrete-harmonic extension
  ``X = -A_II^{-1} A_IS`` and the local operator is the Schur complement
  ``S = A_SS + A_SI X``.

The entity contribution to ``M^{-1} r`` is ``[I; X] S^{-1} (r_S + X^T r_I)``.
It is precomputed as one dense operator over ``S`` followed by ``I``, so
application is a gather/multiply/scatter pass. Patches of the uniform grid
are congruent, so blocks are grouped by their (bitwise) local matrix and
each distinct matrix is factorized once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .assembly import SystemOperator
from .element import local_matrices
from .mesh import (
    GridHierarchy,
    StencilBatch,
    coarse_entity_stencils,
    local_edge_lattice,
)

__all__ = [
    "SmootherBlocks",
    "DAMPING_BOUND",
    "DEFAULT_DAMPING",
    "build_blocks",
    "apply_smoother",
    "harmonic_extension",
    "dense_blocks",
    "smoother_max_eigenvalue",
    "lemma_coarse_check",
]

DAMPING_BOUND = {"edge": 1.0 / 12.0, "vertex": 1.0 / 8.0}
DEFAULT_DAMPING = {"edge": 1.0 / 13.0, "vertex": 1.0 / 9.0}


def dense_blocks(A: sp.csr_matrix, idx: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Dense principal submatrices ``A[idx[b]][:, idx[b]]`` for every row of ``idx``."""
    A = A.tocsr()
    n = A.shape[0]
    nb, s = idx.shape
    out = np.zeros((nb, s, s))
    for lo in range(0, nb, chunk):
        blk = np.asarray(idx[lo : lo + chunk], dtype=np.int64)
        m = len(blk)
        order = np.argsort(blk, axis=1, kind="stable")
        keys = (np.arange(m)[:, None] * n + np.take_along_axis(blk, order, axis=1)).ravel()
        rows = blk.ravel()
        counts = A.indptr[rows + 1] - A.indptr[rows]
        starts = np.repeat(A.indptr[rows] - np.cumsum(counts) + counts, counts)
        pos = starts + np.arange(counts.sum())
        owner = np.repeat(np.arange(m * s), counts)  # (block, local row) of each entry
        b_of = owner // s
        query = b_of * n + A.indices[pos]
        at = np.minimum(np.searchsorted(keys, query), len(keys) - 1)
        hit = keys[at] == query
        j = order.ravel()[at[hit]]
        out[lo + b_of[hit], owner[hit] % s, j] = A.data[pos[hit]]
    return out


def _group_blocks(A: sp.csr_matrix, idx: np.ndarray, chunk: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """Distinct local matrices and the map block -> distinct matrix.

    Congruent patches of a uniform grid give bitwise-identical local
    matrices, so each distinct matrix is factorized only once.
    """
    seen: dict[bytes, int] = {}
    reps: list[np.ndarray] = []
    which = np.empty(len(idx), dtype=np.int64)
    for lo in range(0, len(idx), chunk):
        for b, mat in enumerate(dense_blocks(A, idx[lo : lo + chunk], chunk)):
            key = mat.tobytes()
            if key not in seen:
                seen[key] = len(reps)
                reps.append(mat)
            which[lo + b] = seen[key]
    s = idx.shape[1]
    return (np.stack(reps) if reps else np.empty((0, s, s))), which


def _cholesky(mats: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(mats)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            f"{what} blocks are not symmetric positive definite; the assembled operator is broken"
        ) from exc


def _spd_inverse(mats: np.ndarray, what: str) -> np.ndarray:
    L = _cholesky(mats, what)
    eye = np.broadcast_to(np.eye(mats.shape[-1]), mats.shape)
    Linv = np.linalg.solve(L, eye)
    inv = np.swapaxes(Linv, -1, -2) @ Linv
    return 0.5 * (inv + np.swapaxes(inv, -1, -2))


def _grouped(idx: np.ndarray, which: np.ndarray, ngroups: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows of ``idx`` sorted by group (stable) and the group offsets."""
    order = np.argsort(which, kind="stable")
    ptr = np.zeros(ngroups + 1, dtype=np.int64)
    np.cumsum(np.bincount(which, minlength=ngroups), out=ptr[1:])
    return np.ascontiguousarray(idx[order], dtype=np.int64), ptr


@dataclass(frozen=True)
class SmootherBlocks:
    """Factorized local solvers of one smoother on one fine level.

    Per block ``b`` (cell or entity), ``*_map[b]`` points to its distinct
    local matrix. For cells the stored operator is ``A_T^{-1}``; for
    entities it is the dense operator on ``(S, I)``, formed from the
    extension ``X`` and the Cholesky factor of the Schur complement, which
    are kept as well. ``*_run``/``*_ptr`` hold the same index rows grouped by
    operator for the application kernel.
    """

    kind: str
    eta: float
    level: int
    size: int
    cell_idx: np.ndarray
    cell_map: np.ndarray
    cell_ops: np.ndarray
    skeleton: np.ndarray
    interior: np.ndarray
    entity_map: np.ndarray
    extension: np.ndarray
    schur: np.ndarray
    schur_chol: np.ndarray
    entity_ops: np.ndarray
    entities: np.ndarray
    cell_run: np.ndarray
    cell_ptr: np.ndarray
    entity_run: np.ndarray
    entity_ptr: np.ndarray

    @property
    def num_entities(self) -> int:
        return len(self.entities)

    @property
    def num_cells(self) -> int:
        return len(self.cell_idx)

    @property
    def entity_idx(self) -> np.ndarray:
        """``(S, I)`` DOF rows per entity, in entity order."""
        return np.concatenate([self.skeleton, self.interior], axis=1)

    def entity_extension(self, e: int) -> np.ndarray:
        return self.extension[self.entity_map[e]]

    def entity_schur(self, e: int) -> np.ndarray:
        return self.schur[self.entity_map[e]]

    def entity_operator(self, e: int) -> np.ndarray:
        return self.entity_ops[self.entity_map[e]]

    def cell_operator(self, c: int) -> np.ndarray:
        return self.cell_ops[self.cell_map[c]]

    def apply(self, r: np.ndarray) -> np.ndarray:
        return apply_smoother(self, r)


def check_damping(kind: str, eta: float | None = None, unsafe_damping: bool = False) -> float:
    """Validate the smoother kind and damping factor; returns the factor to use."""
    if kind not in DAMPING_BOUND:
        raise ValueError(f"smoother kind must be 'edge' or 'vertex', got {kind!r}")
    eta = DEFAULT_DAMPING[kind] if eta is None else float(eta)
    if not eta > 0:
        raise ValueError(f"damping factor must be positive, got {eta}")
    if eta > DAMPING_BOUND[kind] * (1 + 1e-14) and not unsafe_damping:
        raise ValueError(
            f"damping {eta:.6g} exceeds the {kind} bound {DAMPING_BOUND[kind]:.6g}; "
            "pass unsafe_damping=True to override"
        )
    return eta


def build_blocks(
    hierarchy: GridHierarchy,
    op: SystemOperator,
    k: int,
    kind: str,
    eta: float | None = None,
    unsafe_damping: bool = False,
) -> SmootherBlocks:
    """Set up the edge- or vertex-based smoother on fine level ``k``.

    ``eta`` defaults to 1/13 (edge) or 1/9 (vertex). Values above the
    damping bound (1/12 resp. 1/8) are refused unless ``unsafe_damping``.
    """
    if k < 1:
        raise ValueError("smoothers live on fine levels k >= 1")
    if op.level != k:
        raise ValueError(f"operator is for level {op.level}, not {k}")
    eta = check_damping(kind, eta, unsafe_damping)

    stencils = coarse_entity_stencils(hierarchy, k)
    A = op.matrix

    cell_idx = np.ascontiguousarray(stencils.cells.interior, dtype=np.int64)
    cell_mats, cell_map = _group_blocks(A, cell_idx)
    cell_ops = _spd_inverse(cell_mats, "interior")

    batch: StencilBatch = stencils.edges if kind == "edge" else stencils.vertices
    S = np.ascontiguousarray(batch.skeleton, dtype=np.int64)
    I = np.ascontiguousarray(batch.interior, dtype=np.int64)
    nS = S.shape[1]
    full = np.concatenate([S, I], axis=1)
    local, entity_map = _group_blocks(A, full)
    A_SS = local[:, :nS, :nS]
    A_SI = local[:, :nS, nS:]
    A_II = local[:, nS:, nS:]
    L_II = _cholesky(A_II, "interior (entity)")
    # X = -A_II^{-1} A_IS through the Cholesky factor
    Y = np.linalg.solve(L_II, np.swapaxes(A_SI, -1, -2))
    X = -np.linalg.solve(np.swapaxes(L_II, -1, -2), Y)
    schur = A_SS + A_SI @ X
    schur = 0.5 * (schur + np.swapaxes(schur, -1, -2))
    schur_chol = _cholesky(schur, f"{kind} Schur complement")

    ext = np.concatenate([np.broadcast_to(np.eye(nS), (len(local), nS, nS)), X], axis=1)
    Z = np.linalg.solve(schur_chol, np.swapaxes(ext, -1, -2))  # L^{-1} [I; X]^T
    ops = np.swapaxes(Z, -1, -2) @ Z
    ops = 0.5 * (ops + np.swapaxes(ops, -1, -2))

    cell_run, cell_ptr = _grouped(cell_idx, cell_map, len(cell_ops))
    entity_run, entity_ptr = _grouped(full, entity_map, len(ops))
    return SmootherBlocks(
        kind=kind,
        eta=eta,
        level=k,
        size=op.size,
        cell_idx=cell_idx,
        cell_map=cell_map,
        cell_ops=np.ascontiguousarray(cell_ops),
        skeleton=S,
        interior=I,
        entity_map=entity_map,
        extension=X,
        schur=schur,
        schur_chol=schur_chol,
        entity_ops=np.ascontiguousarray(ops),
        entities=batch.entities,
        cell_run=cell_run,
        cell_ptr=cell_ptr,
        entity_run=entity_run,
        entity_ptr=entity_ptr,
    )


def apply_smoother(blocks: SmootherBlocks, r: np.ndarray) -> np.ndarray:
    """``M^{-1} r``: damped sum of all local solves, accumulated in block order."""
    r = np.ascontiguousarray(r, dtype=float)
    if r.shape != (blocks.size,):
        raise ValueError(f"residual of shape {r.shape}, expected ({blocks.size},)")
    out = np.zeros(blocks.size)
    kernels.accumulate_blocks(out, r, blocks.cell_run, blocks.cell_ops, blocks.cell_ptr)
    kernels.accumulate_blocks(out, r, blocks.entity_run, blocks.entity_ops, blocks.entity_ptr)
    out *= blocks.eta
    return out


def harmonic_extension(blocks: SmootherBlocks, entity: int, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Discrete-harmonic extension of skeleton values into the entity's cells.

    Returns ``(dofs, values)`` with ``dofs = (S, I)`` and ``values = (s, X s)``.
    """
    s = np.asarray(s, dtype=float)
    nS = blocks.skeleton.shape[1]
    if s.shape != (nS,):
        raise ValueError(f"expected {nS} skeleton values, got shape {s.shape}")
    values = np.concatenate([s, blocks.entity_extension(entity) @ s])
    dofs = np.concatenate([blocks.skeleton[entity], blocks.interior[entity]])
    return dofs, values


def smoother_max_eigenvalue(
    blocks: SmootherBlocks, op: SystemOperator, iters: int = 200, seed: int = 0
) -> float:
    """Power-iteration estimate of the largest eigenvalue of ``M^{-1} A``.

    ``M^{-1} A`` is self-adjoint in the energy inner product, so the
    Rayleigh quotient ``a(M^{-1} A w, w) / a(w, w)`` is used.
    """
    rng = np.random.default_rng(seed)
    w = rng.uniform(-1.0, 1.0, op.size)
    w /= np.sqrt(op.a_inner(w, w))
    lam = 0.0
    for _ in range(iters):
        Aw = op.apply(w)
        v = apply_smoother(blocks, Aw)
        lam = float(Aw @ v)
        w = v / np.sqrt(op.a_inner(v, v))
    return lam


def lemma_coarse_check(hierarchy: GridHierarchy, k: int, edge) -> float:
    """``||curl u||`` over the four coarse cells around an x1-parallel coarse edge.

    ``edge`` is the coarse lattice row ``(0, a, p, q)`` on level ``k - 1``.
    ``u`` has tangential values -1 / +1 on the two fine edges per axis
    ending / starting at the midpoint of the coarse edge, zero on all other
    edges of the cell boundaries, and interior values orthogonal in L2 to
    the interior spaces of the four cells.
    """
    if k < 1:
        raise ValueError("need a fine level k >= 1")
    d, a, p, q = (int(v) for v in edge)
    coarse, fine = hierarchy[k - 1], hierarchy[k]
    N = coarse.n
    if d != 0:
        raise ValueError("the coarse edge must be parallel to the x1 axis")
    if not (0 <= a < N and 1 <= p < N and 1 <= q < N):
        raise ValueError(f"coarse edge {tuple(edge)} is not an interior edge of level {k - 1}")

    coarse_cells = np.array([(a, p + i, q + j) for i in (-1, 0) for j in (-1, 0)])
    fine_cells = np.concatenate([hierarchy.children(k - 1, c) for c in coarse_cells])
    lat = local_edge_lattice(fine_cells)  # (32, 12, 4)
    gid = fine.edge_id(lat[..., 0], lat[..., 1], lat[..., 2], lat[..., 3])
    patch, local = np.unique(gid, return_inverse=True)
    local = local.reshape(gid.shape)
    m = len(patch)
    loc = local_matrices(fine.h)
    K = np.zeros((m, m))
    M = np.zeros((m, m))
    for c in range(len(fine_cells)):
        ix = np.ix_(local[c], local[c])
        K[ix] += loc.curlcurl
        M[ix] += loc.mass

    def pos(d_, i0, i1, i2):
        return int(np.searchsorted(patch, fine.edge_id(d_, i0, i1, i2)))

    interior = []
    for c in coarse_cells:
        for d_ in range(3):
            for s in (0, 1):
                l = 2 * c + 1
                l[d_] = 2 * c[d_] + s
                interior.append(pos(d_, *l))
    interior = np.array(interior)
    skeleton = np.setdiff1d(np.arange(m), interior)

    u = np.zeros(m)
    v = np.array([2 * a + 1, 2 * p, 2 * q])
    for d_ in range(3):
        before = v.copy()
        before[d_] -= 1
        u[pos(d_, *before)] = -1.0
        u[pos(d_, *v)] = 1.0
    uS = u[skeleton]
    u[interior] = -np.linalg.solve(M[np.ix_(interior, interior)], M[np.ix_(interior, skeleton)] @ uS)
    return float(np.sqrt(max(u @ K @ u, 0.0)))
