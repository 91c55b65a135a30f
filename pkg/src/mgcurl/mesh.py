"""Nested structured hexahedral grids on the box (-1, 1)^3.

Level ``l`` has ``n = 2**(l + 1)`` cells per axis, so level 0 is the
2x2x2 grid of unit cubes. Edges are identified by a direction ``d`` and an
integer lattice triple ``(i0, i1, i2)``: the index along ``d`` counts cells
(``0..n-1``) while the two transverse indices count nodes (``0..n``). Every
edge is oriented along the positive axis, so no orientation signs appear
anywhere in the package.

Edges with a transverse node index equal to ``0`` or ``n`` lie in the
boundary and carry no degree of freedom. Interior DOFs are numbered
direction-major, then in C order of the lattice triple.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator

import numpy as np

__all__ = [
    "GridLevel",
    "GridHierarchy",
    "CoarseEntityStencil",
    "StencilBatch",
    "EntityStencils",
    "build_hierarchy",
    "interior_edges",
    "cell_dofs",
    "coarse_entity_stencils",
    "transverse_axes",
    "INDEX_DTYPE",
]

INDEX_DTYPE = np.int32
_INDEX_MAX = np.iinfo(INDEX_DTYPE).max

LENGTH = 2.0
ORIGIN = -1.0


def transverse_axes(d: int) -> tuple[int, int]:
    """The two axes orthogonal to ``d``, in ascending order."""
    return tuple(a for a in range(3) if a != d)  # type: ignore[return-value]


def _edge_shape(n: int, d: int) -> tuple[int, int, int]:
    shape = [n + 1, n + 1, n + 1]
    shape[d] = n
    return tuple(shape)  # type: ignore[return-value]


@dataclass(frozen=True)
class GridLevel:
    """One uniform level of the hierarchy.

    Parameters
    ----------
    index : int
        Level number, 0 is the coarsest.
    """

    index: int

    @property
    def n(self) -> int:
        """Cells per axis."""
        return 2 ** (self.index + 1)

    @property
    def h(self) -> float:
        return LENGTH / self.n

    @property
    def num_cells(self) -> int:
        return self.n**3

    @property
    def num_edges(self) -> int:
        """All edges, boundary included."""
        return 3 * self.n * (self.n + 1) ** 2

    @property
    def num_dofs(self) -> int:
        """Interior edges, i.e. the size of the discrete system."""
        return 3 * self.n * (self.n - 1) ** 2

    @cached_property
    def edge_offsets(self) -> np.ndarray:
        per_dir = self.n * (self.n + 1) ** 2
        return np.array([0, per_dir, 2 * per_dir, 3 * per_dir], dtype=np.int64)

    def edge_id(self, d, i0, i1, i2) -> np.ndarray:
        """Global (boundary-inclusive) edge id; accepts scalars or arrays."""
        d = np.asarray(d)
        i0, i1, i2 = np.asarray(i0), np.asarray(i1), np.asarray(i2)
        n = self.n
        # shape for direction d: n along d, n + 1 elsewhere
        s1 = np.where(d == 1, n, n + 1)
        s2 = np.where(d == 2, n, n + 1)
        return self.edge_offsets[d] + (i0 * s1 + i1) * s2 + i2

    @cached_property
    def dof_of_edge(self) -> np.ndarray:
        """Map global edge id -> interior DOF index, ``-1`` on the boundary."""
        n = self.n
        out = np.full(self.num_edges, -1, dtype=INDEX_DTYPE)
        count = 0
        for d in range(3):
            interior = np.zeros(_edge_shape(n, d), dtype=bool)
            sl = [slice(1, n)] * 3
            sl[d] = slice(None)
            interior[tuple(sl)] = True
            flat = interior.ravel()
            k = int(flat.sum())
            ids = self.edge_offsets[d] + np.flatnonzero(flat)
            out[ids] = np.arange(count, count + k, dtype=INDEX_DTYPE)
            count += k
        assert count == self.num_dofs
        return out

    def dof(self, d, i0, i1, i2) -> np.ndarray:
        """Interior DOF index of an edge, ``-1`` for boundary edges."""
        return self.dof_of_edge[self.edge_id(d, i0, i1, i2)]

    @cached_property
    def dof_lattice(self) -> np.ndarray:
        """``(num_dofs, 4)`` array of ``(d, i0, i1, i2)`` in DOF order."""
        n = self.n
        blocks = []
        for d in range(3):
            ranges = [np.arange(1, n)] * 3
            ranges[d] = np.arange(n)
            g = np.meshgrid(*ranges, indexing="ij")
            lat = np.stack([np.full(g[0].size, d)] + [a.ravel() for a in g], axis=1)
            blocks.append(lat)
        return np.concatenate(blocks).astype(np.int64)

    def edge_midpoints(self, lattice: np.ndarray) -> np.ndarray:
        """Physical midpoints for ``(m, 4)`` lattice rows ``(d, i0, i1, i2)``."""
        lattice = np.asarray(lattice)
        pts = ORIGIN + self.h * lattice[:, 1:].astype(float)
        d = lattice[:, 0]
        pts[np.arange(len(d)), d] += 0.5 * self.h
        return pts

    def cell_origin(self, cells: np.ndarray) -> np.ndarray:
        """Lower corner of cells given as ``(m, 3)`` integer triples."""
        return ORIGIN + self.h * np.asarray(cells, dtype=float)

    @cached_property
    def cells(self) -> np.ndarray:
        """All cells as ``(n**3, 3)`` triples in C order."""
        n = self.n
        g = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
        return np.stack([a.ravel() for a in g], axis=1).astype(np.int64)


# local edge ordering inside a cell: 4 x-edges, 4 y-edges, 4 z-edges, each with
# transverse corner offsets (first transverse axis major)
LOCAL_EDGES = np.array(
    [(d, j, k) for d in range(3) for j in (0, 1) for k in (0, 1)], dtype=np.int64
)


def local_edge_lattice(cells: np.ndarray) -> np.ndarray:
    """Lattice rows ``(m, 12, 4)`` for the 12 edges of each cell."""
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 3)
    out = np.empty((len(cells), 12, 4), dtype=np.int64)
    for e, (d, j, k) in enumerate(LOCAL_EDGES):
        t1, t2 = transverse_axes(int(d))
        lat = cells.copy()
        lat[:, t1] += j
        lat[:, t2] += k
        out[:, e, 0] = d
        out[:, e, 1:] = lat
    return out


@dataclass(frozen=True)
class GridHierarchy:
    """Levels ``0..L`` of uniformly refined box grids."""

    levels: tuple[GridLevel, ...]
    _stencil_cache: dict = field(default_factory=dict, repr=False, compare=False)
    _operator_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def top(self) -> int:
        return len(self.levels) - 1

    def __getitem__(self, k: int) -> GridLevel:
        if not 0 <= k < len(self.levels):
            raise IndexError(f"level {k} outside 0..{self.top}")
        return self.levels[k]

    def __len__(self) -> int:
        return len(self.levels)

    def children(self, k: int, cell) -> np.ndarray:
        """The 8 level-``k+1`` children of a level-``k`` cell."""
        if k >= self.top:
            raise IndexError(f"level {k} has no finer level")
        base = 2 * np.asarray(cell, dtype=np.int64)
        offs = np.array([(i, j, l) for i in (0, 1) for j in (0, 1) for l in (0, 1)])
        return base + offs

    def sub_edges(self, k: int, lattice) -> np.ndarray:
        """The 2 level-``k+1`` edges composing a level-``k`` edge."""
        d, i0, i1, i2 = (int(v) for v in lattice)
        base = np.array([d, 2 * i0, 2 * i1, 2 * i2])
        out = np.stack([base, base])
        out[1, 1 + d] += 1
        return out


def build_hierarchy(levels: int) -> GridHierarchy:
    """Build levels ``0..levels`` of the box hierarchy.

    Raises
    ------
    ValueError
        If ``levels`` is negative or the finest level needs more edges than
        the DOF index type can address.
    """
    if levels < 0:
        raise ValueError(f"levels must be >= 0, got {levels}")
    finest = GridLevel(levels)
    if finest.num_edges > _INDEX_MAX:
        raise ValueError(
            f"level {levels} needs {finest.num_edges} edge indices, "
            f"exceeding the index type limit {_INDEX_MAX}"
        )
    return GridHierarchy(tuple(GridLevel(k) for k in range(levels + 1)))


def interior_edges(level: GridLevel) -> np.ndarray:
    """Ordered ``(d, i0, i1, i2)`` rows of the interior edges (DOF order)."""
    return level.dof_lattice


def cell_dofs(level: GridLevel, cells) -> np.ndarray:
    """Interior DOF indices of the 12 local edges, ``-1`` marking boundary edges.

    Returns an array of shape ``(m, 12)`` for ``m`` cells (or ``(12,)`` for a
    single cell triple).
    """
    arr = np.asarray(cells, dtype=np.int64)
    single = arr.ndim == 1
    lat = local_edge_lattice(arr)
    out = level.dof(lat[..., 0], lat[..., 1], lat[..., 2], lat[..., 3])
    return out[0] if single else out


# --- coarse-entity stencils -------------------------------------------------


@dataclass(frozen=True)
class CoarseEntityStencil:
    """Fine DOFs attached to one coarse cell, edge, or vertex.

    ``interior`` holds fine DOFs strictly inside the adjacent coarse cells,
    ``skeleton`` the fine DOFs on the entity's faces and edges that are free
    in the entity space. ``cells``, ``faces`` and ``edges`` are the coarse
    entities in the patch (faces as ``(normal, plane, c1, c2)``).
    """

    kind: str
    entity: tuple
    interior: np.ndarray
    skeleton: np.ndarray
    cells: tuple = ()
    faces: tuple = ()
    edges: tuple = ()


@dataclass(frozen=True)
class StencilBatch:
    """All stencils of one kind, stored as dense index arrays."""

    kind: str
    entities: np.ndarray  # (m, 3) cells/vertices or (m, 4) edges
    interior: np.ndarray  # (m, |I|)
    skeleton: np.ndarray  # (m, |S|)

    def __len__(self) -> int:
        return len(self.entities)

    def __getitem__(self, i: int) -> CoarseEntityStencil:
        ent = tuple(int(v) for v in self.entities[i])
        cells, faces, edges = _patch_entities(self.kind, ent)
        return CoarseEntityStencil(
            self.kind, ent, self.interior[i], self.skeleton[i], cells, faces, edges
        )

    def __iter__(self) -> Iterator[CoarseEntityStencil]:
        for i in range(len(self)):
            yield self[i]


@dataclass(frozen=True)
class EntityStencils:
    fine_level: int
    cells: StencilBatch
    edges: StencilBatch
    vertices: StencilBatch

    def all(self) -> list[CoarseEntityStencil]:
        return [*self.cells, *self.edges, *self.vertices]


def _patch_entities(kind: str, ent: tuple) -> tuple[tuple, tuple, tuple]:
    if kind == "cell":
        return (ent,), (), ()
    if kind == "edge":
        d, a, p, q = ent
        t1, t2 = transverse_axes(d)
        cells = []
        for dp in (-1, 0):
            for dq in (-1, 0):
                c = [0, 0, 0]
                c[d], c[t1], c[t2] = a, p + dp, q + dq
                cells.append(tuple(c))
        faces = []
        # faces in the plane x_t1 = p span (d, t2); in x_t2 = q span (d, t1)
        for dq in (-1, 0):
            faces.append((t1, p, *_face_cells(t1, {d: a, t2: q + dq})))
        for dp in (-1, 0):
            faces.append((t2, q, *_face_cells(t2, {d: a, t1: p + dp})))
        return tuple(cells), tuple(faces), ((d, a, p, q),)
    if kind == "vertex":
        v = ent
        cells = tuple(
            (v[0] + i, v[1] + j, v[2] + k)
            for i in (-1, 0)
            for j in (-1, 0)
            for k in (-1, 0)
        )
        faces = []
        for nrm in range(3):
            u1, u2 = transverse_axes(nrm)
            for du1 in (-1, 0):
                for du2 in (-1, 0):
                    faces.append((nrm, v[nrm], v[u1] + du1, v[u2] + du2))
        edges = []
        for d in range(3):
            t1, t2 = transverse_axes(d)
            for da in (-1, 0):
                edges.append((d, v[d] + da, v[t1], v[t2]))
        return cells, tuple(faces), tuple(edges)
    raise ValueError(f"unknown stencil kind {kind!r}")


def _face_cells(nrm: int, cell_index: dict) -> tuple[int, int]:
    u1, u2 = transverse_axes(nrm)
    return cell_index[u1], cell_index[u2]


def _cell_interior_lattice(cells: np.ndarray) -> np.ndarray:
    """Fine lattice rows ``(m, 6, 4)`` strictly inside coarse cells."""
    m = len(cells)
    out = np.empty((m, 6, 4), dtype=np.int64)
    col = 0
    for d in range(3):
        for s in (0, 1):
            lat = 2 * cells + 1
            lat[:, d] = 2 * cells[:, d] + s
            out[:, col, 0] = d
            out[:, col, 1:] = lat
            col += 1
    return out


def _face_interior_lattice(nrm: int, plane: np.ndarray, c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
    """Fine lattice rows ``(m, 4, 4)`` interior to coarse faces.

    The face lies in the coarse plane ``x_nrm = plane`` and spans the coarse
    cell indices ``c1``, ``c2`` along the two transverse axes.
    """
    u1, u2 = transverse_axes(nrm)
    m = len(plane)
    out = np.empty((m, 4, 4), dtype=np.int64)
    col = 0
    for d, other in ((u1, u2), (u2, u1)):
        cd = c1 if d == u1 else c2
        co = c2 if d == u1 else c1
        for s in (0, 1):
            lat = np.empty((m, 3), dtype=np.int64)
            lat[:, nrm] = 2 * plane
            lat[:, d] = 2 * cd + s
            lat[:, other] = 2 * co + 1
            out[:, col, 0] = d
            out[:, col, 1:] = lat
            col += 1
    return out


def _edge_sub_lattice(d: int, along: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """The 2 fine sub-edges ``(m, 2, 4)`` of coarse edges in direction ``d``."""
    t1, t2 = transverse_axes(d)
    m = len(along)
    out = np.empty((m, 2, 4), dtype=np.int64)
    for s in (0, 1):
        lat = np.empty((m, 3), dtype=np.int64)
        lat[:, d] = 2 * along + s
        lat[:, t1] = 2 * p
        lat[:, t2] = 2 * q
        out[:, s, 0] = d
        out[:, s, 1:] = lat
    return out


def _to_dofs(level: GridLevel, lat: np.ndarray) -> np.ndarray:
    dofs = level.dof(lat[..., 0], lat[..., 1], lat[..., 2], lat[..., 3])
    if np.any(dofs < 0):
        raise AssertionError("stencil touches a boundary edge")
    return dofs.astype(np.int64)


def _cell_stencils(coarse: GridLevel, fine: GridLevel) -> StencilBatch:
    cells = coarse.cells
    interior = _to_dofs(fine, _cell_interior_lattice(cells))
    return StencilBatch("cell", cells, interior, np.empty((len(cells), 0), np.int64))


def _edge_stencils(coarse: GridLevel, fine: GridLevel) -> StencilBatch:
    ents = coarse.dof_lattice  # interior coarse edges, in coarse DOF order
    d_all = ents[:, 0]
    m = len(ents)
    interior = np.empty((m, 24), dtype=np.int64)
    skeleton = np.empty((m, 18), dtype=np.int64)
    for d in range(3):
        sel = np.flatnonzero(d_all == d)
        if sel.size == 0:
            continue
        t1, t2 = transverse_axes(d)
        a = ents[sel, 1 + d]
        p = ents[sel, 1 + t1]
        q = ents[sel, 1 + t2]
        ilat = []
        for dp in (-1, 0):
            for dq in (-1, 0):
                c = np.empty((len(sel), 3), dtype=np.int64)
                c[:, d], c[:, t1], c[:, t2] = a, p + dp, q + dq
                ilat.append(_cell_interior_lattice(c))
        slat = []
        for dq in (-1, 0):
            cidx = {d: a, t2: q + dq}
            u1, u2 = transverse_axes(t1)
            slat.append(_face_interior_lattice(t1, p, cidx[u1], cidx[u2]))
        for dp in (-1, 0):
            cidx = {d: a, t1: p + dp}
            u1, u2 = transverse_axes(t2)
            slat.append(_face_interior_lattice(t2, q, cidx[u1], cidx[u2]))
        slat.append(_edge_sub_lattice(d, a, p, q))
        interior[sel] = _to_dofs(fine, np.concatenate(ilat, axis=1))
        skeleton[sel] = _to_dofs(fine, np.concatenate(slat, axis=1))
    return StencilBatch("edge", ents, interior, skeleton)


def _vertex_stencils(coarse: GridLevel, fine: GridLevel) -> StencilBatch:
    N = coarse.n
    g = np.meshgrid(*[np.arange(1, N)] * 3, indexing="ij")
    verts = np.stack([a.ravel() for a in g], axis=1).astype(np.int64)
    m = len(verts)
    ilat = []
    for i in (-1, 0):
        for j in (-1, 0):
            for k in (-1, 0):
                ilat.append(_cell_interior_lattice(verts + np.array([i, j, k])))
    slat = []
    for nrm in range(3):
        u1, u2 = transverse_axes(nrm)
        for du1 in (-1, 0):
            for du2 in (-1, 0):
                slat.append(
                    _face_interior_lattice(nrm, verts[:, nrm], verts[:, u1] + du1, verts[:, u2] + du2)
                )
    for d in range(3):
        t1, t2 = transverse_axes(d)
        for da in (-1, 0):
            slat.append(_edge_sub_lattice(d, verts[:, d] + da, verts[:, t1], verts[:, t2]))
    interior = _to_dofs(fine, np.concatenate(ilat, axis=1)) if m else np.empty((0, 48), np.int64)
    skeleton = _to_dofs(fine, np.concatenate(slat, axis=1)) if m else np.empty((0, 60), np.int64)
    return StencilBatch("vertex", verts, interior, skeleton)


def coarse_entity_stencils(hierarchy: GridHierarchy, fine_level: int) -> EntityStencils:
    """Stencils of all coarse cells, interior coarse edges and vertices.

    Results are cached on the hierarchy.
    """
    if fine_level < 1:
        raise ValueError("coarse-entity stencils need a fine level >= 1")
    cache = hierarchy._stencil_cache
    if fine_level not in cache:
        coarse, fine = hierarchy[fine_level - 1], hierarchy[fine_level]
        cache[fine_level] = EntityStencils(
            fine_level,
            _cell_stencils(coarse, fine),
            _edge_stencils(coarse, fine),
            _vertex_stencils(coarse, fine),
        )
    return cache[fine_level]
