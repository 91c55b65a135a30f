"""Lowest-order Nedelec edge element on an axis-aligned brick.

Local coordinates run over ``[0, hx] x [0, hy] x [0, hz]``. The basis
function of the edge in direction ``d`` with transverse corner ``(j, k)`` is

    phi = L_j(x_t1) * L_k(x_t2) * e_d,   L_0(t) = 1 - t/h_t,  L_1(t) = t/h_t,

where ``t1 < t2`` are the axes orthogonal to ``d``. Its tangential
component is 1 on its own edge and 0 on the other eleven, so the basis is
dual to the average-tangential-component functionals.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .mesh import LOCAL_EDGES, transverse_axes

__all__ = [
    "ReferenceBrick",
    "LocalElementMatrices",
    "shape_eval",
    "shape_values",
    "shape_curls",
    "dof_functional",
    "local_mass_matrix",
    "local_curlcurl_matrix",
    "local_curl_eval",
    "local_matrices",
    "gradient_dofs",
    "gauss_points",
]

_TOL = 1e-12


@dataclass(frozen=True)
class ReferenceBrick:
    hx: float
    hy: float
    hz: float

    def __post_init__(self):
        if min(self.hx, self.hy, self.hz) <= 0:
            raise ValueError(f"brick extents must be positive, got {self.extents}")

    @property
    def extents(self) -> tuple[float, float, float]:
        return (self.hx, self.hy, self.hz)

    @property
    def volume(self) -> float:
        return self.hx * self.hy * self.hz

    def contains(self, p: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(p)
        h = np.array(self.extents)
        slack = _TOL * h
        return np.all((p >= -slack) & (p <= h + slack), axis=-1)

    def edge_geometry(self, e: int) -> tuple[np.ndarray, np.ndarray, float]:
        """Start point, unit tangent and length of local edge ``e``."""
        d, j, k = (int(v) for v in LOCAL_EDGES[e])
        t1, t2 = transverse_axes(d)
        h = np.array(self.extents)
        start = np.zeros(3)
        start[t1] = j * h[t1]
        start[t2] = k * h[t2]
        tangent = np.zeros(3)
        tangent[d] = 1.0
        return start, tangent, float(h[d])


def _as_brick(extents) -> ReferenceBrick:
    if isinstance(extents, ReferenceBrick):
        return extents
    return ReferenceBrick(*(float(v) for v in extents))


def _check_inside(brick: ReferenceBrick, pts: np.ndarray) -> None:
    if not np.all(brick.contains(pts)):
        raise ValueError("evaluation point lies outside the brick")


def shape_values(pts: np.ndarray, extents) -> np.ndarray:
    """All 12 basis functions at ``pts``; returns ``(npts, 12, 3)``.

    No bounds check; callers that accept user points use :func:`shape_eval`.
    """
    brick = _as_brick(extents)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    h = np.array(brick.extents)
    s = pts / h
    out = np.zeros((len(pts), 12, 3))
    for e, (d, j, k) in enumerate(LOCAL_EDGES):
        t1, t2 = transverse_axes(int(d))
        a = s[:, t1] if j else 1.0 - s[:, t1]
        b = s[:, t2] if k else 1.0 - s[:, t2]
        out[:, e, d] = a * b
    return out


def shape_curls(pts: np.ndarray, extents) -> np.ndarray:
    """Curls of the 12 basis functions at ``pts``; returns ``(npts, 12, 3)``."""
    brick = _as_brick(extents)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    h = np.array(brick.extents)
    s = pts / h
    out = np.zeros((len(pts), 12, 3))
    for e, (d, j, k) in enumerate(LOCAL_EDGES):
        d = int(d)
        t1, t2 = transverse_axes(d)
        a = s[:, t1] if j else 1.0 - s[:, t1]
        b = s[:, t2] if k else 1.0 - s[:, t2]
        grad = np.zeros((len(pts), 3))
        grad[:, t1] = (1.0 if j else -1.0) / h[t1] * b
        grad[:, t2] = (1.0 if k else -1.0) / h[t2] * a
        # curl(f e_d) = grad f x e_d
        unit = np.zeros(3)
        unit[d] = 1.0
        out[:, e, :] = np.cross(grad, unit)
    return out


def shape_eval(e: int, p: Sequence[float], extents) -> np.ndarray:
    """Value of local basis function ``e`` at point ``p`` of the brick."""
    brick = _as_brick(extents)
    if not 0 <= e < 12:
        raise ValueError(f"local edge index must be in 0..11, got {e}")
    p = np.asarray(p, dtype=float)
    _check_inside(brick, p)
    return shape_values(p, brick)[0, e]


def local_curl_eval(coeffs: Sequence[float], p: Sequence[float], extents) -> np.ndarray:
    """Curl of ``sum_e coeffs[e] * phi_e`` at ``p``."""
    brick = _as_brick(extents)
    p = np.asarray(p, dtype=float)
    _check_inside(brick, p)
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (12,):
        raise ValueError("expected 12 coefficients")
    return np.einsum("e,ei->i", c, shape_curls(p, brick)[0])


def dof_functional(
    field: Callable[[np.ndarray], np.ndarray],
    start: Sequence[float],
    tangent: Sequence[float],
    length: float,
) -> float:
    """Average tangential component of ``field`` along an edge.

    Uses the midpoint value, which is exact for fields of the local Nedelec
    form: their tangential component is constant along axis-parallel edges.
    """
    start = np.asarray(start, dtype=float)
    tangent = np.asarray(tangent, dtype=float)
    mid = start + 0.5 * length * tangent
    value = np.asarray(field(mid), dtype=float).reshape(3)
    return float(value @ tangent)


@lru_cache(maxsize=None)
def gauss_points(extents: tuple[float, float, float], order: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre points and weights on the brick."""
    x, w = leggauss(order)
    pts1d = [0.5 * h * (x + 1.0) for h in extents]
    wts1d = [0.5 * h * w for h in extents]
    g = np.meshgrid(*pts1d, indexing="ij")
    gw = np.meshgrid(*wts1d, indexing="ij")
    pts = np.stack([a.ravel() for a in g], axis=1)
    wts = gw[0].ravel() * gw[1].ravel() * gw[2].ravel()
    pts.flags.writeable = False
    wts.flags.writeable = False
    return pts, wts


def local_mass_matrix(extents, order: int = 2) -> np.ndarray:
    """12x12 matrix of ``int phi_i . phi_j``; 2-point Gauss is exact."""
    brick = _as_brick(extents)
    pts, wts = gauss_points(brick.extents, order)
    phi = shape_values(pts, brick)
    return np.einsum("q,qia,qja->ij", wts, phi, phi)


def local_curlcurl_matrix(extents, order: int = 2) -> np.ndarray:
    """12x12 matrix of ``int curl phi_i . curl phi_j``; 2-point Gauss is exact."""
    brick = _as_brick(extents)
    pts, wts = gauss_points(brick.extents, order)
    c = shape_curls(pts, brick)
    return np.einsum("q,qia,qja->ij", wts, c, c)


@dataclass(frozen=True)
class LocalElementMatrices:
    mass: np.ndarray
    curlcurl: np.ndarray
    extents: tuple[float, float, float]


@lru_cache(maxsize=None)
def local_matrices(h: float) -> LocalElementMatrices:
    """Cached element matrices for the cube of side ``h``."""
    ext = (h, h, h)
    m, k = local_mass_matrix(ext), local_curlcurl_matrix(ext)
    m.flags.writeable = False
    k.flags.writeable = False
    return LocalElementMatrices(m, k, ext)


def gradient_dofs(extents) -> np.ndarray:
    """Edge DOFs of the gradients of the 8 trilinear nodal functions.

    Row ``c`` corresponds to the corner ``(cx, cy, cz)`` in C order. The DOF
    of an edge is ``(q(end) - q(start)) / |e|``.
    """
    brick = _as_brick(extents)
    h = brick.extents
    out = np.zeros((8, 12))
    for c in range(8):
        corner = ((c >> 2) & 1, (c >> 1) & 1, c & 1)
        for e, (d, j, k) in enumerate(LOCAL_EDGES):
            d = int(d)
            t1, t2 = transverse_axes(d)
            if corner[t1] != j or corner[t2] != k:
                continue
            # corner is the end (value +1) or the start (value -1) of this edge
            out[c, e] = (1.0 if corner[d] == 1 else -1.0) / h[d]
    return out
