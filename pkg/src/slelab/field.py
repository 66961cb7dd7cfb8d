"""Grids, grid functions and discrete differential geometry.

Finite differences are second-order central stencils on uniform axis-aligned
box grids.  Whole-grid helpers return arrays with NaN at nodes whose stencil
would leave the grid; NaN then propagates exclusion through dependent stencils
instead of extrapolating near the boundary.

Node depth counts stencil margin: a node at index k on an axis with p points
has depth min(k, p - 1 - k); boundary nodes have depth 0.
"""

from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .spectral import (ConstraintSpec, Spectrum, eigen_desc, satisfies_rows)

SENTINEL = math.nan

_MAGIC = b"SLGF01"


class DepthError(ValueError):
    """Stencil would leave the grid at the requested node."""


@dataclass(frozen=True)
class Grid:
    """Uniform axis-aligned box grid containing its center as a node."""

    n: int
    center: tuple
    half_width: float
    points_per_axis: int

    def __init__(self, n: int, center: Sequence[float], half_width: float,
                 points_per_axis: int):
        if not 2 <= n <= 4:
            raise ValueError(f"dimension {n} outside [2, 4]")
        center = tuple(float(c) for c in center)
        if len(center) != n:
            raise ValueError("center length must match dimension")
        if not half_width > 0:
            raise ValueError("half_width must be positive")
        if points_per_axis < 9 or points_per_axis % 2 == 0:
            raise ValueError("points_per_axis must be an odd integer >= 9")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "half_width", float(half_width))
        object.__setattr__(self, "points_per_axis", int(points_per_axis))

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.points_per_axis - 1)

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.n

    @property
    def center_index(self) -> tuple:
        return ((self.points_per_axis - 1) // 2,) * self.n

    def axis(self, i: int) -> np.ndarray:
        return self.center[i] + np.linspace(-self.half_width, self.half_width,
                                            self.points_per_axis)

    def points(self) -> np.ndarray:
        """Node coordinates, shape (*shape, n)."""
        axes = [self.axis(i) for i in range(self.n)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def node_point(self, idx: Sequence[int]) -> np.ndarray:
        return np.array([self.axis(i)[idx[i]] for i in range(self.n)])

    def depth(self, idx: Sequence[int]) -> int:
        p = self.points_per_axis
        return min(min(k, p - 1 - k) for k in idx)

    def depth_field(self) -> np.ndarray:
        p = self.points_per_axis
        line = np.minimum(np.arange(p), p - 1 - np.arange(p))
        out = np.full(self.shape, p, dtype=int)
        for ax in range(self.n):
            sh = [1] * self.n
            sh[ax] = p
            out = np.minimum(out, line.reshape(sh))
        return out

    def nearest_node(self, point: Sequence[float]) -> tuple:
        p = np.asarray(point, dtype=float)
        idx = np.rint((p - np.array(self.center)) / self.spacing).astype(int)
        idx += (self.points_per_axis - 1) // 2
        if (idx < 0).any() or (idx >= self.points_per_axis).any():
            raise ValueError(f"point {point} outside grid")
        return tuple(int(k) for k in idx)


@dataclass(frozen=True)
class Ball:
    """Euclidean ball used to carve node sets out of a grid."""

    center: tuple
    radius: float

    def __init__(self, center: Sequence[float], radius: float):
        if not radius > 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in center))
        object.__setattr__(self, "radius", float(radius))


def ball_mask(grid: Grid, b: Ball) -> np.ndarray:
    """Boolean node mask of {x : |x - center| <= radius}."""
    pts = grid.points() - np.array(b.center)
    return np.sqrt(np.sum(pts * pts, axis=-1)) <= b.radius


@dataclass(frozen=True)
class GridFunction:
    """Scalar field sampled at grid nodes."""

    grid: Grid
    values: np.ndarray

    def __init__(self, grid: Grid, values: np.ndarray, require_finite: bool = True):
        values = np.ascontiguousarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {grid.shape}")
        if require_finite and not np.isfinite(values).all():
            raise ValueError("grid function values must be finite")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, grid: Grid, fn) -> "GridFunction":
        pts = grid.points()
        return cls(grid, np.asarray(fn(pts), dtype=float))

    def __add__(self, other):
        if isinstance(other, GridFunction):
            return GridFunction(self.grid, self.values + other.values)
        return GridFunction(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            return GridFunction(self.grid, self.values - other.values)
        return GridFunction(self.grid, self.values - other)


def save_grid_function(u: GridFunction, path) -> None:
    """Binary layout: magic, n, points_per_axis, half_width, center, row-major values."""
    g = u.grid
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<ii", g.n, g.points_per_axis))
        fh.write(struct.pack("<d", g.half_width))
        fh.write(struct.pack(f"<{g.n}d", *g.center))
        fh.write(u.values.tobytes(order="C"))


def load_grid_function(path) -> GridFunction:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"not a grid-function file: {path}")
        n, pts = struct.unpack("<ii", fh.read(8))
        (half_width,) = struct.unpack("<d", fh.read(8))
        center = struct.unpack(f"<{n}d", fh.read(8 * n))
        grid = Grid(n, center, half_width, pts)
        raw = fh.read(8 * pts ** n)
        values = np.frombuffer(raw, dtype="<f8").reshape(grid.shape).copy()
    return GridFunction(grid, values, require_finite=False)


# ---------------------------------------------------------------------------
# whole-grid stencil fields
# ---------------------------------------------------------------------------

def _interior(shape, margin):
    return tuple(slice(margin, s - margin) for s in shape)


def _shifted(values: np.ndarray, offset: Sequence[int], margin: int) -> np.ndarray:
    """View of `values` shifted by `offset`, restricted to the margin interior."""
    sl = tuple(slice(margin + o, s - margin + o) for o, s in zip(offset, values.shape))
    return values[sl]


def gradient_field(u: GridFunction) -> np.ndarray:
    """Central first differences; shape (*grid, n); NaN at depth < 1."""
    g = u.grid
    out = np.full(g.shape + (g.n,), SENTINEL)
    inner = _interior(g.shape, 1)
    for i in range(g.n):
        e = [0] * g.n
        e[i] = 1
        out[inner + (i,)] = (_shifted(u.values, e, 1) - _shifted(u.values, [-x for x in e], 1)) \
            / (2.0 * g.spacing)
    return out


def hessian_field(u: GridFunction) -> np.ndarray:
    """Central second differences; shape (*grid, n, n); NaN at depth < 1.

    Mixed entries use the 4-point cross stencil; the result is exactly
    symmetric by construction.
    """
    g = u.grid
    dx2 = g.spacing ** 2
    out = np.full(g.shape + (g.n, g.n), SENTINEL)
    inner = _interior(g.shape, 1)
    for i in range(g.n):
        e = [0] * g.n
        e[i] = 1
        out[inner + (i, i)] = (
            _shifted(u.values, e, 1) - 2.0 * u.values[inner]
            + _shifted(u.values, [-x for x in e], 1)) / dx2
    for i, j in itertools.combinations(range(g.n), 2):
        pp = [0] * g.n
        pp[i], pp[j] = 1, 1
        pm = [0] * g.n
        pm[i], pm[j] = 1, -1
        cross = (_shifted(u.values, pp, 1) - _shifted(u.values, pm, 1)
                 - _shifted(u.values, [-x for x in pm], 1)
                 + _shifted(u.values, [-x for x in pp], 1)) / (4.0 * dx2)
        out[inner + (i, j)] = cross
        out[inner + (j, i)] = cross
    return out


def eigenvalues_field(H: np.ndarray, n: int) -> np.ndarray:
    """Descending eigenvalues of a (..., n, n) symmetric field; NaN rows pass through."""
    flat = H.reshape(-1, n, n)
    ok = np.isfinite(flat).all(axis=(1, 2))
    lam = np.full((flat.shape[0], n), SENTINEL)
    if ok.any():
        lam[ok] = np.linalg.eigvalsh(flat[ok])[:, ::-1]
    return lam.reshape(H.shape[:-2] + (n,))


def ginv_field(H: np.ndarray, n: int) -> np.ndarray:
    """Inverse induced metric (I + H H)^{-1} for a (..., n, n) Hessian field."""
    flat = H.reshape(-1, n, n)
    ok = np.isfinite(flat).all(axis=(1, 2))
    out = np.full_like(flat, SENTINEL)
    if ok.any():
        Hs = flat[ok]
        out[ok] = np.linalg.inv(np.eye(n) + Hs @ Hs)
    return out.reshape(H.shape)


def induced_metric(H: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """g = I + H H and its inverse for one symmetric matrix.

    In the eigenbasis of H the inverse has entries 1 / (1 + lambda_i^2), so g
    is always positive definite.
    """
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    if np.abs(H - H.T).max() > 1e-12 * (1.0 + np.abs(H).max()):
        raise ValueError("Hessian must be symmetric")
    g = np.eye(n) + H @ H
    return g, np.linalg.inv(g)


# ---------------------------------------------------------------------------
# jets and nodewise operations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JetSample:
    """Gradient, Hessian and spectrum of a grid function at one node."""

    location: tuple
    gradient: np.ndarray
    hessian: np.ndarray
    spectrum: Spectrum
    depth: int


def _require_depth(u: GridFunction, node: Sequence[int], need: int, what: str):
    d = u.grid.depth(node)
    if d < need:
        raise DepthError(f"{what} needs depth >= {need}, node {tuple(node)} has {d}")
    return d


def jet(u: GridFunction, node: Sequence[int]) -> JetSample:
    """Second-order central-difference jet at a node of depth >= 2."""
    node = tuple(int(k) for k in node)
    d = _require_depth(u, node, 2, "jet")
    g = u.grid
    dx = g.spacing
    vals = u.values
    n = g.n

    def at(off):
        return vals[tuple(node[i] + off[i] for i in range(n))]

    grad = np.empty(n)
    H = np.empty((n, n))
    for i in range(n):
        e = [0] * n
        e[i] = 1
        em = [-x for x in e]
        grad[i] = (at(e) - at(em)) / (2.0 * dx)
        H[i, i] = (at(e) - 2.0 * at([0] * n) + at(em)) / dx ** 2
    for i, j in itertools.combinations(range(n), 2):
        pp = [0] * n
        pp[i], pp[j] = 1, 1
        pm = [0] * n
        pm[i], pm[j] = 1, -1
        H[i, j] = H[j, i] = (at(pp) - at(pm) - at([-x for x in pm]) + at([-x for x in pp])) \
            / (4.0 * dx ** 2)
    H = 0.5 * (H + H.T)
    return JetSample(node, grad, H, eigen_desc(H), d)


def laplace_beltrami(u: GridFunction, f: GridFunction, node: Sequence[int]) -> float:
    """sum_ij g^{ij}(node) f_ij(node) with the metric induced by u."""
    ju = jet(u, node)
    jf = jet(f, node)
    _, ginv = induced_metric(ju.hessian)
    return float(np.sum(ginv * jf.hessian))


def minimal_surface_residual(u: GridFunction, node: Sequence[int], k: int) -> float:
    """sum_ij g^{ij} u_ijk via a central difference of the Hessian field."""
    node = tuple(int(x) for x in node)
    _require_depth(u, node, 3, "minimal_surface_residual")
    g = u.grid
    n = g.n
    if not 0 <= k < n:
        raise ValueError(f"direction {k} out of range")
    jp = list(node)
    jm = list(node)
    jp[k] += 1
    jm[k] -= 1
    Hp = jet(u, jp).hessian
    Hm = jet(u, jm).hessian
    third = (Hp - Hm) / (2.0 * g.spacing)
    _, ginv = induced_metric(jet(u, node).hessian)
    return float(np.sum(ginv * third))


def minimal_surface_residual_field(u: GridFunction, k: int) -> np.ndarray:
    """Vectorized residual field in direction k; NaN propagates from shallow nodes."""
    g = u.grid
    H = hessian_field(u)
    Gi = ginv_field(H, g.n)
    third = np.full_like(H, SENTINEL)
    inner = _interior(g.shape, 1)
    e = [0] * g.n
    e[k] = 1
    plus = tuple(slice(1 + o, s - 1 + o) for o, s in zip(e, g.shape))
    minus = tuple(slice(1 - o, s - 1 - o) for o, s in zip(e, g.shape))
    third[inner] = (H[plus] - H[minus]) / (2.0 * g.spacing)
    return np.einsum("...ij,...ij->...", Gi, third)


def b_m_field(u: GridFunction, m: int) -> GridFunction:
    """Average of the m largest Hessian eigenvalues; sentinel below depth 2."""
    g = u.grid
    if not 1 <= m <= g.n:
        raise ValueError(f"m = {m} outside [1, {g.n}]")
    lam = eigenvalues_field(hessian_field(u), g.n)
    vals = lam[..., :m].mean(axis=-1)
    vals[g.depth_field() < 2] = SENTINEL
    return GridFunction(g, vals, require_finite=False)


# ---------------------------------------------------------------------------
# Jacobi inequality residual
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JacobiParams:
    """Gate constants for the Jacobi inequality residual.

    For the n = 3 sigma_2 family the proven choice is alpha = min(1, eps)/16
    and delta = 4 / sqrt(min(1, eps)) + max(1, eps); `for_sigma2` wires it.
    """

    m: int
    alpha: float
    delta: float
    eps: Optional[float] = None
    eigengap_tol: Optional[float] = None  # None -> 10 * grid spacing

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not (self.alpha > 0 and self.delta > 0):
            raise ValueError("alpha and delta must be positive")

    @classmethod
    def for_sigma2(cls, eps: float, m: int = 1,
                   eigengap_tol: Optional[float] = None) -> "JacobiParams":
        lo = min(1.0, eps)
        return cls(m=m, alpha=lo / 16.0, delta=4.0 / math.sqrt(lo) + max(1.0, eps),
                   eps=eps, eigengap_tol=eigengap_tol)

    def gap_tol(self, grid: Grid) -> float:
        return 10.0 * grid.spacing if self.eigengap_tol is None else self.eigengap_tol


@dataclass(frozen=True)
class JacobiSample:
    residual: float
    applicable: bool
    eigengap: float


def jacobi_residual(u: GridFunction, node: Sequence[int], p: JacobiParams,
                    constraint: Optional[ConstraintSpec] = None) -> JacobiSample:
    """Delta_g b_m - (1 + alpha) |grad_g b_m|^2_g / b_m at one node.

    Applicability mirrors the inequality's hypotheses: lambda_max > delta, an
    open eigengap lambda_m - lambda_{m+1}, and the constraint satisfied at the
    node.  b_m is differentiated as a grid field.
    """
    node = tuple(int(x) for x in node)
    _require_depth(u, node, 4, "jacobi_residual")
    g = u.grid
    n = g.n
    dx = g.spacing

    def bm(idx):
        lam = jet(u, idx).spectrum.values
        return sum(lam[: p.m]) / p.m

    j0 = jet(u, node)
    lam0 = j0.spectrum.values
    gap = (lam0[p.m - 1] - lam0[p.m]) if p.m < n else math.inf
    ok = lam0[0] > p.delta and gap > p.gap_tol(g)
    if constraint is not None:
        ok = ok and satisfies_rows(np.array([lam0]), constraint)[0]
    _, ginv = induced_metric(j0.hessian)

    b0 = bm(node)
    grad_b = np.empty(n)
    Hb = np.empty((n, n))
    for i in range(n):
        e = list(node)
        em = list(node)
        e[i] += 1
        em[i] -= 1
        bp, bmi = bm(e), bm(em)
        grad_b[i] = (bp - bmi) / (2.0 * dx)
        Hb[i, i] = (bp - 2.0 * b0 + bmi) / dx ** 2
    for i, j in itertools.combinations(range(n), 2):
        pp = list(node)
        pm = list(node)
        mp = list(node)
        mm = list(node)
        pp[i] += 1
        pp[j] += 1
        pm[i] += 1
        pm[j] -= 1
        mp[i] -= 1
        mp[j] += 1
        mm[i] -= 1
        mm[j] -= 1
        Hb[i, j] = Hb[j, i] = (bm(pp) - bm(pm) - bm(mp) + bm(mm)) / (4.0 * dx ** 2)

    if ok and b0 <= 0.0:
        raise ValueError(f"b_m = {b0} <= 0 at applicable node {node}")
    lap = float(np.sum(ginv * Hb))
    grad_sq = float(grad_b @ ginv @ grad_b)
    residual = lap - (1.0 + p.alpha) * grad_sq / b0 if b0 > 0 else math.nan
    return JacobiSample(residual=residual, applicable=bool(ok), eigengap=float(gap))


def jacobi_scan(u: GridFunction, p: JacobiParams,
                constraint: Optional[ConstraintSpec] = None) -> dict:
    """Vectorized Jacobi residual over all depth >= 4 nodes.

    Returns the residual field, applicability mask and eigengap field; NaN
    marks nodes where a stencil left the valid region.
    """
    g = u.grid
    n = g.n
    dx = g.spacing
    H = hessian_field(u)
    lam = eigenvalues_field(H, n)
    Gi = ginv_field(H, n)
    b = lam[..., : p.m].mean(axis=-1)

    grad_b = np.full(g.shape + (n,), SENTINEL)
    Hb = np.full(g.shape + (n, n), SENTINEL)
    inner = _interior(g.shape, 1)
    for i in range(n):
        e = [0] * n
        e[i] = 1
        em = [-x for x in e]
        grad_b[inner + (i,)] = (_shifted(b, e, 1) - _shifted(b, em, 1)) / (2.0 * dx)
        Hb[inner + (i, i)] = (_shifted(b, e, 1) - 2.0 * b[inner] + _shifted(b, em, 1)) / dx ** 2
    for i, j in itertools.combinations(range(n), 2):
        pp = [0] * n
        pp[i], pp[j] = 1, 1
        pm = [0] * n
        pm[i], pm[j] = 1, -1
        cross = (_shifted(b, pp, 1) - _shifted(b, pm, 1)
                 - _shifted(b, [-x for x in pm], 1) + _shifted(b, [-x for x in pp], 1)) \
            / (4.0 * dx ** 2)
        Hb[inner + (i, j)] = cross
        Hb[inner + (j, i)] = cross

    lap = np.einsum("...ij,...ij->...", Gi, Hb)
    grad_sq = np.einsum("...i,...ij,...j->...", grad_b, Gi, grad_b)
    with np.errstate(invalid="ignore", divide="ignore"):
        residual = lap - (1.0 + p.alpha) * grad_sq / b

    gap = (lam[..., p.m - 1] - lam[..., p.m]) if p.m < n else np.full(g.shape, np.inf)
    depth_ok = g.depth_field() >= 4
    with np.errstate(invalid="ignore"):
        applicable = (lam[..., 0] > p.delta) & (gap > p.gap_tol(g)) & depth_ok
    applicable &= np.isfinite(residual)
    if constraint is not None:
        flat = lam.reshape(-1, n)
        okc = np.zeros(flat.shape[0], dtype=bool)
        fin = np.isfinite(flat).all(axis=1)
        if fin.any():
            okc[fin] = satisfies_rows(flat[fin], constraint)
        applicable &= okc.reshape(g.shape)
    return {"residual": residual, "applicable": applicable, "eigengap": gap,
            "lambda_max": lam[..., 0], "b_m": b}
