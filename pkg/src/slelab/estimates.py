"""Empirical probes of the a-priori estimates on solved instances.

Conventions: estimate runs keep the unit-scale normalization (solutions live
on a box covering B_2(center), probes act on B_1 and smaller balls around it).
Discrete balls are node sets {|x - y| <= r} and sups are node maxima; the
discrete realization of a sphere is the first node layer outside it, where
continuum sign conditions are stable under grid refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .field import (Ball, DepthError, Grid, GridFunction, SENTINEL, ball_mask,
                    eigenvalues_field, gradient_field, hessian_field, jet)
from .measures import lipschitz_norm
from .spectral import eigen_desc, phase


@dataclass(frozen=True)
class EstimateRecord:
    """One measured quantity, CSV-ready."""

    instance: str
    quantity: str
    value: float
    r: Optional[float] = None
    y: Optional[tuple] = None
    grid: str = ""

    CSV_HEADER = ("instance", "quantity", "value", "r", "y", "grid")

    def csv_row(self) -> list:
        y = "" if self.y is None else ";".join(repr(float(c)) for c in self.y)
        r = "" if self.r is None else repr(float(self.r))
        return [self.instance, self.quantity, repr(float(self.value)), r, y, self.grid]


def grid_tag(grid: Grid) -> str:
    return f"n{grid.n}p{grid.points_per_axis}L{grid.half_width:g}"


# ---------------------------------------------------------------------------
# oscillation and gradient ratio
# ---------------------------------------------------------------------------

def oscillation(u: GridFunction, b: Ball) -> float:
    """max - min of u over the nodes of the ball."""
    mask = ball_mask(u.grid, b)
    if not mask.any():
        raise ValueError(f"ball {b} contains no grid nodes")
    vals = u.values[mask]
    return float(vals.max() - vals.min())


def gradient_ratio(u: GridFunction, R: float) -> float:
    """|Du(center)| * R / osc_{B_R(center)} u, the empirical gradient-estimate constant."""
    g = u.grid
    j = jet(u, g.center_index)
    grad_norm = float(np.linalg.norm(j.gradient))
    osc = oscillation(u, Ball(g.center, R))
    if osc == 0.0:
        if grad_norm == 0.0:
            return 0.0
        raise ValueError("zero oscillation with nonzero gradient")
    return grad_norm * R / osc


# ---------------------------------------------------------------------------
# appendix maximum-principle test function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AppendixProbe:
    w: GridFunction
    argmax: tuple
    on_boundary_shell: bool
    osc: float
    grad_at_center: float
    w_at_center: float
    w_max: float


def _neighbor_in(grid: Grid, inside: np.ndarray) -> np.ndarray:
    """Nodes having at least one axis neighbor inside the given set."""
    out = np.zeros_like(inside)
    for ax in range(grid.n):
        for sign in (1, -1):
            neigh = np.roll(inside, sign, axis=ax)
            edge = [slice(None)] * grid.n
            edge[ax] = 0 if sign == 1 else -1
            neigh[tuple(edge)] = False  # rolled-around entries are not neighbors
            out |= neigh
    return out


def _shell_mask(grid: Grid, inside: np.ndarray) -> np.ndarray:
    """Inner shell: set nodes with an axis neighbor outside (off-grid counts)."""
    out = np.zeros_like(inside)
    for ax in range(grid.n):
        for sign in (1, -1):
            neigh_out = np.roll(~inside, sign, axis=ax)
            edge = [slice(None)] * grid.n
            edge[ax] = 0 if sign == 1 else -1
            neigh_out[tuple(edge)] = True  # off-grid counts as outside
            out |= inside & neigh_out
    return out


def _outer_shell(grid: Grid, inside: np.ndarray) -> np.ndarray:
    """First node layer outside the set: complement nodes with a neighbor inside."""
    return ~inside & _neighbor_in(grid, inside)


def appendix_test_function(u: GridFunction, shift_to_band: bool = True) -> AppendixProbe:
    """w = (1 - |x|^2) |Du| + (n/M) u^2 on the nodes of B_1(center).

    With shift_to_band the input is replaced by u - min u + M so M <= u <= 2M
    holds on the ball, M being the discrete oscillation.  On the discrete
    boundary shell the cutoff factor is taken as zero, which is what makes the
    boundary-max bound max w <= 4 n M exact at node level.
    """
    g = u.grid
    ball = Ball(g.center, 1.0)
    inside = ball_mask(g, ball)
    if not inside.any():
        raise ValueError("grid does not cover B_1(center)")
    depth_needed = 2
    if (g.depth_field()[inside] < depth_needed).any():
        raise DepthError("B_1(center) reaches nodes too shallow for gradients")
    M = float(u.values[inside].max() - u.values[inside].min())
    if M == 0.0:
        raise ValueError("constant input: the test function is undefined (M = 0)")
    vals = u.values
    if shift_to_band:
        vals = vals - vals[inside].min() + M
    pts = g.points() - np.array(g.center)
    eta = np.maximum(1.0 - np.sum(pts * pts, axis=-1), 0.0)
    grad = gradient_field(u)
    grad_norm = np.sqrt(np.sum(grad * grad, axis=-1))
    shell = _shell_mask(g, inside)
    w = np.full(g.shape, SENTINEL)
    w[inside] = eta[inside] * grad_norm[inside] + (g.n / M) * vals[inside] ** 2
    w[shell] = (g.n / M) * vals[shell] ** 2
    flat = np.nanargmax(w)
    argmax = tuple(int(k) for k in np.unravel_index(flat, g.shape))
    c = g.center_index
    return AppendixProbe(
        w=GridFunction(g, w, require_finite=False),
        argmax=argmax,
        on_boundary_shell=bool(shell[argmax]),
        osc=M,
        grad_at_center=float(grad_norm[c]),
        w_at_center=float(w[c]),
        w_max=float(w[argmax]))


# ---------------------------------------------------------------------------
# doubling-inequality cutoff machinery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CutoffParams:
    alpha: float
    cutoff_scale: float  # the exponential sharpness scale
    y: tuple

    def __init__(self, alpha: float, cutoff_scale: float, y: Sequence[float]):
        if not alpha >= 1:
            raise ValueError("alpha must be >= 1")
        if not cutoff_scale > 0:
            raise ValueError("cutoff_scale must be positive")
        object.__setattr__(self, "alpha", float(alpha))
        object.__setattr__(self, "cutoff_scale", float(cutoff_scale))
        object.__setattr__(self, "y", tuple(float(c) for c in y))


@dataclass(frozen=True)
class CutoffResult:
    phi: GridFunction
    S: float
    eta: GridFunction
    sign_ok: bool
    shell_max: float  # max of S - phi on the outer shell of B_{1/2}(y); want < 0
    inner_min: float  # min of S - phi on B_{1/4}(y) \ {y}; want > 0
    y: tuple = ()


def korevaar_cutoff(u: GridFunction, p: CutoffParams) -> CutoffResult:
    """Exponential cutoff eta = (e^{(S - phi)/h} - 1)_+ built from the radial
    derivative phi = (x-y) . Du - u + u(y) - alpha^{-1} 2^alpha |x-y|^{-2 alpha}.

    sign_ok records that S - phi is negative on the discrete realization of
    the sphere |x - y| = 1/2 (first node layer outside) and positive on
    B_{1/4}(y); y must be a node, which keeps |x - y| >= dx on evaluated nodes.
    """
    g = u.grid
    node = g.nearest_node(p.y)
    if np.linalg.norm(g.node_point(node) - np.array(p.y)) > 1e-9 * g.spacing:
        raise ValueError(f"cutoff center {p.y} is not a grid node")
    alpha = p.alpha
    pts = g.points()
    yv = np.array(p.y)
    dist = np.linalg.norm(pts - yv, axis=-1)

    half = dist <= 0.5
    shell = _outer_shell(g, half)  # discrete realization of the sphere |x-y| = 1/2
    eval_mask = (half | shell)
    eval_mask[node] = False
    if (g.depth_field()[eval_mask] < 2).any():
        raise DepthError("B_{1/2}(y) reaches nodes too shallow for gradients")

    grad = gradient_field(u)
    radial = np.einsum("...i,...i->...", pts - yv, grad)
    q = radial - u.values + u.values[node]
    sup_q = float(np.abs(q[half]).max())
    S = -1.0 - sup_q - (2.0 ** (3.0 * alpha)) / alpha

    phi = np.full(g.shape, SENTINEL)
    with np.errstate(divide="ignore", over="ignore"):
        phi[eval_mask] = q[eval_mask] - (2.0 ** alpha / alpha) * dist[eval_mask] ** (-2.0 * alpha)
    diff = S - phi

    with np.errstate(over="ignore", invalid="ignore"):
        eta = np.where(np.isfinite(diff), np.exp(diff / p.cutoff_scale) - 1.0, SENTINEL)
    eta = np.where(np.isfinite(eta), np.maximum(eta, 0.0), eta)

    inner = (dist <= 0.25) & eval_mask
    shell_max = float(np.nanmax(diff[shell])) if shell.any() else -math.inf
    inner_min = float(np.nanmin(diff[inner])) if inner.any() else math.inf
    sign_ok = shell_max < 0.0 and inner_min > 0.0
    return CutoffResult(
        phi=GridFunction(g, phi, require_finite=False), S=S,
        eta=GridFunction(g, eta, require_finite=False),
        sign_ok=sign_ok, shell_max=shell_max, inner_min=inner_min, y=p.y)


def smallest_sign_ok_alpha(u: GridFunction, y: Sequence[float], cutoff_scale: float,
                           alphas: Sequence[float] = (2, 4, 8, 16, 32, 64)):
    """First alpha in the sweep whose cutoff satisfies both sign conditions."""
    for a in alphas:
        res = korevaar_cutoff(u, CutoffParams(a, cutoff_scale, y))
        if res.sign_ok:
            return float(a), res
    return None, None


def eta_b1_annulus_argmax(res: CutoffResult, r: float, b1: GridFunction) -> dict:
    """Diagnostic: where eta * b_1 peaks on the annulus B_{1/2}(y) \\ B_r(y).

    Reported, never asserted: which case of the doubling argument fires is
    proof logic, not a checkable invariant.
    """
    g = b1.grid
    dist = np.linalg.norm(g.points() - np.array(res.y), axis=-1)
    annulus = (dist <= 0.5) & (dist > r) & np.isfinite(res.eta.values) \
        & np.isfinite(b1.values)
    if not annulus.any():
        raise ValueError("annulus contains no evaluable nodes")
    prod = np.where(annulus, res.eta.values * b1.values, -np.inf)
    idx = tuple(int(k) for k in np.unravel_index(np.argmax(prod), g.shape))
    return {"node": idx, "value": float(prod[idx]), "radius": float(dist[idx]),
            "interior": bool(r < dist[idx] < 0.5)}


# ---------------------------------------------------------------------------
# doubling check and Hessian probe
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DoublingRecord:
    sup_quarter: float
    sup_r: float


def doubling_check(u: GridFunction, y: Sequence[float], r: float) -> DoublingRecord:
    """sup of lambda_max(H) over the nodes of B_{1/4}(y) and of B_r(y)."""
    g = u.grid
    y = tuple(float(c) for c in y)
    if np.linalg.norm(np.array(y) - np.array(g.center)) > 0.5:
        raise ValueError("doubling center must lie in B_{1/2}(center)")
    if not r < 0.25:
        raise ValueError("doubling needs r < 1/4")
    quarter = ball_mask(g, Ball(y, 0.25))
    small = ball_mask(g, Ball(y, r))
    if not small.any():
        raise ValueError(f"B_{r}(y) is below grid resolution")
    if (g.depth_field()[quarter] < 2).any():
        raise DepthError("B_{1/4}(y) reaches nodes too shallow for Hessians")
    lam_max = eigenvalues_field(hessian_field(u), g.n)[..., 0]
    return DoublingRecord(sup_quarter=float(np.nanmax(lam_max[quarter])),
                          sup_r=float(np.nanmax(lam_max[small])))


@dataclass(frozen=True)
class HessianProbe:
    hessian_norm_at_0: float
    lipschitz_norm: float
    theta: float


def hessian_probe(u: GridFunction) -> HessianProbe:
    """Frobenius norm of H(center), C^{0,1} norm over B_1(center), instance phase."""
    g = u.grid
    j = jet(u, g.center_index)
    lip = lipschitz_norm(u, Ball(g.center, 1.0))
    return HessianProbe(
        hessian_norm_at_0=float(np.linalg.norm(j.hessian, "fro")),
        lipschitz_norm=lip.c01,
        theta=phase(j.spectrum))


def rescale(u: GridFunction, R: float) -> GridFunction:
    """v(x) = u(center + R (x - center)) / R^2 on the shrunken grid.

    Node values map exactly (same index offsets), so the finite-difference
    Hessian and hence the phase are invariant node-for-node.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    g = u.grid
    new_grid = Grid(g.n, g.center, g.half_width / R, g.points_per_axis)
    return GridFunction(new_grid, u.values / R ** 2)
