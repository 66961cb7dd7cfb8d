"""Distributional Hessian pairings and the dual-cone positivity machinery.

The test functions are quartic bumps ((1 - |x-c|^2/rho^2)_+)^4 with first and
second derivatives in closed form, so the pairing integral int u * d2phi never
differentiates the test function numerically.  Every pairing reports its
integration-by-parts discrepancy against the finite-difference route
int (d2u)_FD * phi; the two agree to the quadrature order and the FD route is
the one certified nodewise by the dual-cone trace inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .field import (Ball, Grid, GridFunction, ball_mask, eigenvalues_field,
                    hessian_field, jet)
from .spectral import ConstraintSpec, GammaCone

PAIR_SAMPLING_SEED = 1723  # fixed: pair subsampling must be reproducible
ALL_PAIRS_MAX_NODES = 2000


@dataclass(frozen=True)
class TestFunction:
    """Nonnegative C^3 bump ((1 - |x - c|^2 / rho^2)_+)^4."""

    __test__ = False  # not a pytest case despite the conventional math name

    center: tuple
    radius: float

    def __init__(self, center: Sequence[float], radius: float):
        if not radius > 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in center))
        object.__setattr__(self, "radius", float(radius))

    def _q(self, points: np.ndarray) -> np.ndarray:
        d = points - np.array(self.center)
        s = np.sum(d * d, axis=-1)
        return np.maximum(1.0 - s / self.radius ** 2, 0.0)

    def value(self, points: np.ndarray) -> np.ndarray:
        return self._q(points) ** 4

    def gradient(self, points: np.ndarray, i: int) -> np.ndarray:
        d = points - np.array(self.center)
        return -(8.0 / self.radius ** 2) * self._q(points) ** 3 * d[..., i]

    def second_derivative(self, points: np.ndarray, i: int, j: int) -> np.ndarray:
        d = points - np.array(self.center)
        q = self._q(points)
        # d_i * d_j first: keeps the (i, j) and (j, i) evaluations bit-identical
        out = (48.0 / self.radius ** 4) * q ** 2 * (d[..., i] * d[..., j])
        if i == j:
            out = out - (8.0 / self.radius ** 2) * q ** 3
        return out

    def supported_inside(self, grid: Grid, margin_nodes: int = 2) -> bool:
        room = grid.half_width - margin_nodes * grid.spacing
        return all(abs(c - gc) + self.radius <= room
                   for c, gc in zip(self.center, grid.center))


@dataclass(frozen=True)
class PairingResult:
    value: float
    points_per_axis: int
    ibp_discrepancy: float


def _require_support(u: GridFunction, phi: TestFunction):
    if not phi.supported_inside(u.grid):
        raise ValueError("test function support escapes the grid interior")


def distributional_hessian_pairing(u: GridFunction, phi: TestFunction,
                                   i: int, j: int) -> PairingResult:
    """Trapezoidal quadrature of int u * d_ij phi, with the discrepancy against
    the finite-difference route int (d_ij u)_FD * phi reported, never absorbed.

    phi vanishes with three derivatives at its support boundary, so the
    trapezoidal rule reduces to the plain node sum times dx^n.
    """
    _require_support(u, phi)
    g = u.grid
    pts = g.points()
    w = g.spacing ** g.n
    d2phi = phi.second_derivative(pts, i, j)
    value = float(np.sum(u.values * d2phi) * w)
    H = hessian_field(u)
    phi_vals = phi.value(pts)
    hij = np.where(phi_vals > 0.0, H[..., i, j], 0.0)
    fd_value = float(np.nansum(hij * phi_vals) * w)
    return PairingResult(value=value, points_per_axis=g.points_per_axis,
                         ibp_discrepancy=abs(value - fd_value))


def pairing_matrix(u: GridFunction, phi: TestFunction, H: Optional[np.ndarray] = None):
    """All (i, j) pairing values and discrepancies in one pass.

    Pass a precomputed Hessian field to amortize it across several bumps.
    """
    _require_support(u, phi)
    g = u.grid
    n = g.n
    pts = g.points()
    w = g.spacing ** g.n
    H = hessian_field(u) if H is None else H
    phi_vals = phi.value(pts)
    vals = np.empty((n, n))
    disc = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            d2phi = phi.second_derivative(pts, i, j)
            v = float(np.sum(u.values * d2phi) * w)
            hij = np.where(phi_vals > 0.0, H[..., i, j], 0.0)
            fd = float(np.nansum(hij * phi_vals) * w)
            vals[i, j] = vals[j, i] = v
            disc[i, j] = disc[j, i] = abs(v - fd)
    return vals, disc


def t_a_functional(u: GridFunction, phi: TestFunction, A: np.ndarray) -> float:
    """T_A(phi) = sum_ij A_ij * pairing(u, phi, i, j)."""
    A = np.asarray(A, dtype=float)
    vals, _ = pairing_matrix(u, phi)
    return float(np.sum(A * vals))


def t_a_functional_fd(u: GridFunction, phi: TestFunction, A: np.ndarray) -> float:
    """Summation-by-parts twin dx^n * sum_x phi(x) tr(A H(x)).

    This is the route the dual-cone trace inequality certifies nodewise; it
    differs from t_a_functional by the reported pairing discrepancies.
    """
    _require_support(u, phi)
    A = np.asarray(A, dtype=float)
    g = u.grid
    pts = g.points()
    w = g.spacing ** g.n
    H = hessian_field(u)
    phi_vals = phi.value(pts)
    tr = np.einsum("ij,...ij->...", A, np.where(phi_vals[..., None, None] > 0.0, H, 0.0))
    return float(np.nansum(tr * phi_vals) * w)


def shifted_solution(u: GridFunction, eps: float) -> GridFunction:
    """u + max(1, eps)/2 * |x - center|^2; shifts every nodal spectrum by max(1, eps)."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    g = u.grid
    pts = g.points() - np.array(g.center)
    shift = 0.5 * max(1.0, eps) * np.sum(pts * pts, axis=-1)
    return GridFunction(g, u.values + shift)


# ---------------------------------------------------------------------------
# Lipschitz norms over discrete balls
# ---------------------------------------------------------------------------

def _ball_nodes(u: GridFunction, b: Ball):
    mask = ball_mask(u.grid, b)
    if not mask.any():
        raise ValueError(f"ball {b} contains no grid nodes")
    X = u.grid.points()[mask]
    return mask, X, u.values[mask]


def _pair_indices(grid: Grid, mask: np.ndarray, X: np.ndarray, subsample: int):
    """Deterministic pair set: all pairs on small balls, else seeded subsample
    plus every nearest-neighbor pair (the Lipschitz sup is attained locally)."""
    m = len(X)
    if m <= ALL_PAIRS_MAX_NODES:
        return np.triu_indices(m, k=1)
    order = np.full(grid.shape, -1, dtype=np.int64)
    order[mask] = np.arange(m)
    firsts, seconds = [], []
    for ax in range(grid.n):
        a = [slice(None)] * grid.n
        bsl = [slice(None)] * grid.n
        a[ax] = slice(0, -1)
        bsl[ax] = slice(1, None)
        ia, ib = order[tuple(a)], order[tuple(bsl)]
        both = (ia >= 0) & (ib >= 0)
        firsts.append(ia[both])
        seconds.append(ib[both])
    rng = np.random.default_rng(PAIR_SAMPLING_SEED)
    ri = rng.integers(0, m, size=subsample)
    rj = rng.integers(0, m, size=subsample)
    keep = ri != rj
    firsts.append(ri[keep])
    seconds.append(rj[keep])
    return np.concatenate(firsts), np.concatenate(seconds)


@dataclass(frozen=True)
class LipschitzNorm:
    lip: float
    sup_abs: float

    @property
    def c01(self) -> float:
        return self.lip + self.sup_abs


def lipschitz_norm(u: GridFunction, b: Ball, subsample: int = 200000) -> LipschitzNorm:
    """Discrete C^{0,1} data on a ball: pairwise difference-quotient sup and sup |u|."""
    mask, X, v = _ball_nodes(u, b)
    if len(X) < 2:
        raise ValueError("ball must contain at least two nodes")
    ii, jj = _pair_indices(u.grid, mask, X, subsample)
    dist = np.linalg.norm(X[ii] - X[jj], axis=-1)
    quot = np.abs(v[ii] - v[jj]) / dist
    return LipschitzNorm(lip=float(quot.max()), sup_abs=float(np.abs(v).max()))


@dataclass(frozen=True)
class WeightedLipschitz:
    lhs: float
    rhs_integral: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs_integral if self.rhs_integral > 0 else math.inf


def weighted_lipschitz(u: GridFunction, b: Ball,
                       subsample: int = 200000) -> WeightedLipschitz:
    """sup of d_{x,y}^{n+1} |u(x)-u(y)| / |x-y| against the L1 mass on the ball.

    d_x is the distance of x to the ball boundary and d_{x,y} its pairwise min.
    """
    mask, X, v = _ball_nodes(u, b)
    if len(X) < 2:
        raise ValueError("ball must contain at least two nodes")
    ii, jj = _pair_indices(u.grid, mask, X, subsample)
    c = np.array(b.center)
    d_node = b.radius - np.linalg.norm(X - c, axis=-1)
    d_pair = np.minimum(d_node[ii], d_node[jj])
    dist = np.linalg.norm(X[ii] - X[jj], axis=-1)
    lhs = float(np.max(d_pair ** (u.grid.n + 1) * np.abs(v[ii] - v[jj]) / dist))
    rhs = float(np.sum(np.abs(v)) * u.grid.spacing ** u.grid.n)
    return WeightedLipschitz(lhs=lhs, rhs_integral=rhs)


# ---------------------------------------------------------------------------
# quadratic approximation probe and case routing
# ---------------------------------------------------------------------------

def quadratic_approx_probe(u: GridFunction, node: Sequence[int],
                           radii: Sequence[float]) -> list:
    """sup_{B_r(x)} |u - Q| / r^2 for the jet's second-order Taylor polynomial Q.

    Radii below two grid spacings are dropped; for smooth u the quotient
    decreases until the resolution floor O(dx^2)/r^2.
    """
    node = tuple(int(k) for k in node)
    j = jet(u, node)
    g = u.grid
    x0 = g.node_point(node)
    pts = g.points()
    d = pts - x0
    Q = (u.values[node] + np.einsum("...i,i->...", d, j.gradient)
         + 0.5 * np.einsum("...i,ij,...j->...", d, j.hessian, d))
    err = np.abs(u.values - Q)
    dist = np.linalg.norm(d, axis=-1)
    out = []
    for r in radii:
        if r < 2.0 * g.spacing:
            continue
        sel = dist <= r
        out.append({"r": float(r), "sup_error_over_r2": float(err[sel].max() / r ** 2)})
    return out


@dataclass(frozen=True)
class PositivityCase:
    """Which positivity family applies to an instance's nodewise spectra."""

    case: str  # two_convex | dual | shifted_dual
    lambda2_negative_nodes: int
    eps: Optional[float] = None


def classify_positivity_case(u: GridFunction,
                             constraint: ConstraintSpec) -> PositivityCase:
    """Route an instance to its positivity check family.

    n >= 4 cone instances assert 2-convexity directly; n = 3 instances use the
    dual test family, switching to the shifted variant when any depth >= 2
    node carries lambda_2 < 0.
    """
    g = u.grid
    lam = eigenvalues_field(hessian_field(u), g.n)
    mask = g.depth_field() >= 2
    lam2 = lam[mask][:, 1]
    neg = int((lam2 < 0.0).sum())
    if g.n >= 4:
        if not isinstance(constraint, GammaCone):
            raise ValueError("n >= 4 instances use the cone constraint family")
        return PositivityCase("two_convex", neg)
    if isinstance(constraint, GammaCone):
        return PositivityCase("dual", neg)
    if neg > 0:
        return PositivityCase("shifted_dual", neg, eps=constraint.eps)
    return PositivityCase("dual", neg, eps=constraint.eps)
