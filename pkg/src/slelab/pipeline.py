"""Verification campaigns: fuzz suites, instance solves, and the consolidated
`verify` pipeline behind the command-line interface.

Calibrated constants pinned here are regression bounds measured once on the
reference configuration; reports carry the config hash they were pinned
against.  Exit-code discipline: 0 = all assertions pass, 1 = an asserted
invariant failed, 2 = configuration error (handled by the CLI layer).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .config import RunConfig
from .estimates import (EstimateRecord, appendix_test_function, doubling_check,
                        gradient_ratio, grid_tag, hessian_probe, oscillation,
                        smallest_sign_ok_alpha)
from .field import (Ball, Grid, GridFunction, JacobiParams, b_m_field,
                    eigenvalues_field, hessian_field, jacobi_scan,
                    minimal_surface_residual_field)
from .measures import (TestFunction, classify_positivity_case, lipschitz_norm,
                       pairing_matrix, quadratic_approx_probe, shifted_solution,
                       t_a_functional_fd, weighted_lipschitz)
from .solver import (PhaseProblem, SolveOutcome, instance_family, newton_solve,
                     quadratic_solution, _seeded_rotation, _boundary_bump)
from .spectral import (GammaCone, Sigma2Lower, dual_family, dual_test_matrix,
                       inequality_tol, lemma_general_margins, lemma_n3_margins,
                       phase_rows, sample_admissible, sample_lambda2_negative,
                       satisfies_rows, _sigma_all)

# --- calibrated regression pins (measured on the seed-1 reference config) ---
JACOBI_RESIDUAL_K = 0.01         # violation gate: residual >= -K * dx, pinned at 17^3
GRADIENT_RATIO_CAP = 2.0         # empirical C(n) surrogate cap over the family
IBP_DISCREPANCY_K = 4.0          # pairing discrepancy <= K * dx^2
QUADRATURE_TOL = 1e-6            # dual positivity allowance on T_A at 33^3
T_A_FD_TOL = 1e-8                # nodewise-certified route allowance
RECONSTRUCTION_RTOL = 1e-12      # (i,j) pairing reconstruction identity
LAMBDA2_BRANCH_EPS = 4.0         # smallest family with nonempty lambda_2 < 0 branch
CONSTRAINT_FRACTION_GATE = 1e-3  # admissibility gate for downstream assertions

TEST_BUMPS = (
    TestFunction((0.0, 0.0, 0.0), 0.9),
    TestFunction((0.0, 0.0, 0.0), 0.6),
    TestFunction((0.25, 0.0, 0.0), 0.7),
    TestFunction((0.0, -0.25, 0.0), 0.7),
    TestFunction((0.125, 0.125, -0.125), 0.8),
)


# ---------------------------------------------------------------------------
# spectral fuzz campaign
# ---------------------------------------------------------------------------

def _worst_clause(margins: dict, lams: np.ndarray, mask: Optional[np.ndarray] = None):
    """Per-clause worst margin and its witness spectrum."""
    out = {}
    for cid, vals in margins.items():
        if cid.endswith("_mask"):
            continue
        sel = np.ones(len(vals), dtype=bool) if mask is None else mask.copy()
        if cid in ("pos_a_ratio", "pos_a_ratio_printed"):
            sel &= margins["ratio_mask"]
        sel &= np.isfinite(vals)
        if not sel.any():
            out[cid] = {"margin": None, "witness": None, "count": 0}
            continue
        idx = int(np.flatnonzero(sel)[np.argmin(vals[sel])])
        out[cid] = {"margin": float(vals[idx]),
                    "witness": [float(v) for v in lams[idx]],
                    "count": int(sel.sum())}
    return out


def sample_lambda2_negative_relaxed(eps: float, count: int,
                                    rng: np.random.Generator) -> np.ndarray:
    """lambda_2 < 0 triples satisfying the sigma_2 constraint but not
    necessarily phase >= 0; exercises the negative branch of the checker."""
    a = rng.uniform(1e-3, 1.0, size=count)
    b = a + rng.uniform(0.0, 1.0, size=count) * (1.0 - a)
    l1 = rng.uniform(0.0, 1.0, size=count) * (0.4 + eps) * a * b / (a + b)
    return np.stack([l1, -a, -b], axis=1)


def run_spectral_fuzz(cfg: RunConfig) -> dict:
    """Lemma fuzz campaign for one constraint family; deterministic in the seed."""
    rng = np.random.default_rng(cfg.seed)
    spec = cfg.constraint_spec()
    lams = sample_admissible(spec, cfg.samples, rng)
    tol = inequality_tol(np.abs(lams).max(axis=1))
    payload: dict = {
        "family": {"constraint": cfg.constraint, "n": cfg.n,
                   "eps": cfg.eps if cfg.constraint == "sigma2" else None},
        "samples": int(len(lams)),
        "seed": cfg.seed,
    }
    violations = 0
    if isinstance(spec, GammaCone):
        margins = lemma_general_margins(lams, spec.cone.c)
        for cid, vals in margins.items():
            violations += int((vals < -tol).sum())
        payload["lemma"] = "general_eigenvalue"
        payload["worst"] = _worst_clause(margins, lams)
    else:
        margins = lemma_n3_margins(lams, spec.eps)
        pos = margins["pos_mask"]
        for cid in ("pos_a_sum23", "pos_b_product", "pos_c_sigma1"):
            violations += int((margins[cid][pos] < -tol[pos]).sum())
        rm = margins["ratio_mask"]
        violations += int((margins["pos_a_ratio"][rm] < -tol[rm]).sum())
        # the printed -(7/5+eps) variant is recorded, never gated
        payload["pos_a_ratio_printed_violations"] = int(
            (margins["pos_a_ratio_printed"][rm] < -tol[rm]).sum())
        neg = ~pos
        for cid in ("neg_a_lower", "neg_a_upper", "neg_b_sigma1",
                    "neg_c_abs2", "neg_c_abs3", "ratio"):
            violations += int((margins[cid][neg] < -tol[neg]).sum())
        payload["lemma"] = "n3_eigenvalue+ratio"
        payload["worst"] = {}
        payload["worst"].update(_worst_clause(
            {k: margins[k] for k in ("pos_a_ratio", "pos_a_ratio_printed",
                                     "pos_a_sum23", "pos_b_product",
                                     "pos_c_sigma1", "ratio_mask")},
            lams, mask=pos))
        payload["worst"].update(_worst_clause(
            {k: margins[k] for k in ("neg_a_lower", "neg_a_upper", "neg_b_sigma1",
                                     "neg_c_abs2", "neg_c_abs3", "ratio")},
            lams, mask=neg))
        payload["lambda2_negative_admissible"] = int(neg.sum())

        # exercise the negative branch even where admissibility makes it empty
        relaxed = sample_lambda2_negative_relaxed(spec.eps, 2000, rng)
        rel_adm = phase_rows(relaxed) >= 0.0
        rel_tol = inequality_tol(np.abs(relaxed).max(axis=1))
        rel_margins = lemma_n3_margins(relaxed, spec.eps)
        for cid in ("neg_a_lower", "neg_a_upper", "neg_b_sigma1",
                    "neg_c_abs2", "neg_c_abs3", "ratio"):
            violations += int((rel_margins[cid][rel_adm] < -rel_tol[rel_adm]).sum())
        payload["lambda2_negative_checked"] = int(len(relaxed))
        payload["lambda2_negative_admissible"] += int(rel_adm.sum())

        targeted = sample_lambda2_negative(spec.eps, 1000, rng, max_batches=60)
        payload["lambda2_negative_feasible"] = bool(len(targeted) > 0)
        if len(targeted):
            t_tol = inequality_tol(np.abs(targeted).max(axis=1))
            t_margins = lemma_n3_margins(targeted, spec.eps)
            for cid in ("neg_a_lower", "neg_a_upper", "neg_b_sigma1",
                        "neg_c_abs2", "neg_c_abs3", "ratio"):
                violations += int((t_margins[cid] < -t_tol).sum())
            payload["lambda2_negative_admissible"] += int(len(targeted))
    payload["violations"] = int(violations)
    payload["pass"] = violations == 0
    return payload


# ---------------------------------------------------------------------------
# crafted verification instances
# ---------------------------------------------------------------------------

def jacobi_instances(seed: int, grid: Grid, count: int = 2,
                     amplitudes: Sequence[float] = (0.0, 0.01)) -> list:
    """sigma_2(eps=1) instances with lambda_max above the Jacobi gate delta = 5."""
    rng = np.random.default_rng(seed)
    spec = Sigma2Lower(1.0)
    out = []
    made = 0
    while made < count:
        lam = np.sort(np.concatenate([rng.uniform(6.0, 10.0, 1),
                                      rng.uniform(-1.0, 1.0, 2)]))[::-1]
        rows = lam[None, :]
        if not (satisfies_rows(rows, spec)[0] and phase_rows(rows)[0] >= 0.0):
            continue
        Q = _seeded_rotation(rng, 3)
        A = Q @ np.diag(lam) @ Q.T
        core, theta = quadratic_solution(grid, A)
        amp = amplitudes[made % len(amplitudes)] * grid.half_width ** 2
        boundary = core.values + amp * _boundary_bump(grid, rng)
        out.append(PhaseProblem(grid, theta, boundary, spec, metadata={
            "spectrum": tuple(float(v) for v in lam), "amplitude": float(amp),
            "kind": "jacobi", "index": made}))
        made += 1
    return out


def shifted_case_instance(seed: int, grid: Grid) -> PhaseProblem:
    """Amplitude-0 instance whose spectra have lambda_2 < 0 (eps = 4 family)."""
    rng = np.random.default_rng(seed)
    lam = sample_lambda2_negative(LAMBDA2_BRANCH_EPS, 1, rng)[0]
    Q = _seeded_rotation(rng, 3)
    A = Q @ np.diag(lam) @ Q.T
    core, theta = quadratic_solution(grid, A)
    return PhaseProblem(grid, theta, core.values, Sigma2Lower(LAMBDA2_BRANCH_EPS),
                        metadata={"spectrum": tuple(float(v) for v in lam),
                                  "amplitude": 0.0, "kind": "shifted_case"})


def n4_instance(seed: int, points: int = 11) -> PhaseProblem:
    """Small 4-dimensional cone instance exercising the 2-convexity route."""
    rng = np.random.default_rng(seed)
    spec = GammaCone(4)
    grid = Grid(4, (0.0,) * 4, 2.0, points)
    lam = sample_admissible(spec, 1, rng, bounds=(1.0,))[0]
    Q = _seeded_rotation(rng, 4)
    A = Q @ np.diag(lam) @ Q.T
    core, theta = quadratic_solution(grid, A)
    amp = 0.01 * grid.half_width ** 2
    boundary = core.values + amp * _boundary_bump(grid, rng)
    return PhaseProblem(grid, theta, boundary, spec, metadata={
        "spectrum": tuple(float(v) for v in lam), "amplitude": float(amp),
        "kind": "n4"})


def build_verify_instances(cfg: RunConfig) -> list:
    grid = Grid(3, (0.0, 0.0, 0.0), cfg.grid_l, cfg.grid_points)
    named = []
    cone_fam = instance_family(cfg.seed, GammaCone(3), 6, grid, cfg.amplitudes)
    named += [(f"cone-{i}", p) for i, p in enumerate(cone_fam)]
    sig_fam = instance_family(cfg.seed + 1, Sigma2Lower(1.0), 4, grid, cfg.amplitudes)
    named += [(f"sigma2-{i}", p) for i, p in enumerate(sig_fam)]
    named += [(f"jacobi-{i}", p) for i, p in
              enumerate(jacobi_instances(cfg.seed + 2, grid))]
    named.append(("shifted", shifted_case_instance(cfg.seed + 3, grid)))
    named.append(("n4", n4_instance(cfg.seed + 4)))
    return named


def solve_instances(named: list, tol: float, jobs: int = 1) -> list:
    """Solve every instance; results come back in input order regardless of jobs."""
    def work(item):
        name, prob = item
        return name, prob, newton_solve(prob, tol=tol)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(work, named))
    return [work(item) for item in named]


# ---------------------------------------------------------------------------
# verify checks
# ---------------------------------------------------------------------------

def _check_solves(solved, tol) -> dict:
    rows = {}
    ok = True
    for name, prob, out in solved:
        recovered = None
        if prob.metadata.get("amplitude", 1.0) == 0.0:
            # amplitude-0 boundary data is the exact quadratic solution itself
            recovered = float(np.abs(out.u.values - prob.boundary).max())
            ok &= recovered <= 1e-8
        ok &= out.converged
        rows[name] = {
            "converged": out.converged, "iterations": out.iterations,
            "residual_norm": out.residual_norm,
            "constraint_violation_fraction": out.constraint_violation_fraction,
            "recovered_inf_error": recovered,
            "spectrum": list(prob.metadata.get("spectrum", ())),
            "amplitude": prob.metadata.get("amplitude"),
        }
    return {"pass": bool(ok), "instances": rows, "tol": tol}


def msr_max_norm(u: GridFunction) -> float:
    """Largest |sum_ij g^{ij} u_ijk| over directions and stencil-valid nodes."""
    worst = 0.0
    for k in range(u.grid.n):
        f = minimal_surface_residual_field(u, k)
        sel = np.isfinite(f)
        if sel.any():
            worst = max(worst, float(np.abs(f[sel]).max()))
    return worst


def _check_geometry(solved) -> dict:
    rows = {}
    ok = True
    for name, prob, out in solved:
        if prob.grid.n != 3:
            continue
        worst = msr_max_norm(out.u)
        quadratic = prob.metadata.get("amplitude", 1.0) == 0.0
        row = {"max_residual_solved": worst, "quadratic": quadratic}
        if quadratic:
            # third differences vanish identically on the exact quadratic data
            exact = msr_max_norm(GridFunction(prob.grid, prob.boundary))
            row["max_residual_exact_quadratic"] = exact
            ok &= exact <= 1e-12
        rows[name] = row
    return {"pass": bool(ok), "instances": rows}


def _check_jacobi(solved, records) -> dict:
    params = JacobiParams.for_sigma2(1.0)
    rows = {}
    ok = True
    applicable_total = 0
    for name, prob, out in solved:
        if not isinstance(prob.constraint, Sigma2Lower) or prob.grid.n != 3:
            continue
        if abs(prob.constraint.eps - 1.0) > 1e-15:
            continue
        scan = jacobi_scan(out.u, params, prob.constraint)
        dx = prob.grid.spacing
        app = scan["applicable"]
        napp = int(app.sum())
        applicable_total += napp
        viol = int((scan["residual"][app] < -JACOBI_RESIDUAL_K * dx).sum()) if napp else 0
        worst = float(scan["residual"][app].min()) if napp else None
        ok &= viol == 0
        rows[name] = {"applicable_nodes": napp, "violations": viol,
                      "worst_residual": worst, "dx": dx}
        records.append(EstimateRecord(name, "jacobi_worst_residual",
                                      worst if worst is not None else math.nan,
                                      grid=grid_tag(prob.grid)))
    jac_meta = {"alpha": params.alpha, "delta": params.delta, "eps": 1.0,
                "m": params.m, "K": JACOBI_RESIDUAL_K}
    has_jacobi = any(n.startswith("jacobi") for n in rows)
    if has_jacobi:
        ok &= applicable_total > 0  # the crafted instances must be non-vacuous
    return {"pass": bool(ok), "params": jac_meta, "instances": rows,
            "applicable_total": applicable_total}


def _check_gradient(solved, records) -> dict:
    rows = {}
    worst = 0.0
    for name, prob, out in solved:
        ratio = gradient_ratio(out.u, 1.0)
        rows[name] = {"ratio": ratio,
                      "osc": oscillation(out.u, Ball(prob.grid.center, 1.0))}
        worst = max(worst, ratio)
        records.append(EstimateRecord(name, "gradient_ratio", ratio, r=1.0,
                                      grid=grid_tag(prob.grid)))
    ok = worst <= GRADIENT_RATIO_CAP
    return {"pass": bool(ok), "cap": GRADIENT_RATIO_CAP, "max_ratio": worst,
            "instances": rows}


def _check_appendix(solved, records) -> dict:
    rows = {}
    ok = True
    for name, prob, out in solved:
        probe = appendix_test_function(out.u, shift_to_band=True)
        chain = probe.grad_at_center <= probe.w_at_center <= probe.w_max
        row = {"grad0": probe.grad_at_center, "w0": probe.w_at_center,
               "w_max": probe.w_max, "osc": probe.osc,
               "argmax_on_shell": probe.on_boundary_shell, "chain": bool(chain)}
        ok &= chain
        if probe.on_boundary_shell:
            bound = 4.0 * prob.grid.n * probe.osc
            row["boundary_bound_4nM"] = bound
            ok &= probe.w_max <= bound * (1.0 + 1e-12)
            ok &= probe.grad_at_center <= bound * (1.0 + 1e-12)
        rows[name] = row
        records.append(EstimateRecord(name, "appendix_w_max", probe.w_max,
                                      grid=grid_tag(prob.grid)))
    return {"pass": bool(ok), "instances": rows}


def _check_cutoff(solved, records) -> dict:
    rows = {}
    ok = True
    for name, prob, out in solved:
        if prob.grid.n != 3:
            continue
        g = prob.grid
        off_axis = g.node_point(g.nearest_node(
            np.array(g.center) + np.array([0.2, 0.0, 0.0])))
        ys = [g.center, tuple(float(c) for c in off_axis)]
        inst = {}
        for y in ys:
            alpha, res = smallest_sign_ok_alpha(out.u, y, cutoff_scale=0.125)
            inst[str(y)] = {"alpha": alpha,
                            "shell_max": res.shell_max if res else None,
                            "inner_min": res.inner_min if res else None}
            ok &= alpha is not None and alpha <= 64
            records.append(EstimateRecord(name, "cutoff_min_alpha",
                                          alpha if alpha else math.inf,
                                          y=y, grid=grid_tag(g)))
        rows[name] = inst
    return {"pass": bool(ok), "instances": rows}


def _check_doubling(solved, records, r: float) -> dict:
    rows = {}
    ok = True
    xs, ys = [], []
    for name, prob, out in solved:
        if prob.grid.n != 3:
            continue
        rec = doubling_check(out.u, prob.grid.center, r)
        ok &= rec.sup_quarter >= rec.sup_r
        rows[name] = {"sup_quarter": rec.sup_quarter, "sup_r": rec.sup_r}
        xs.append(rec.sup_r)
        ys.append(rec.sup_quarter)
        records.append(EstimateRecord(name, "doubling_sup_quarter",
                                      rec.sup_quarter, r=0.25, grid=grid_tag(prob.grid)))
        records.append(EstimateRecord(name, "doubling_sup_r", rec.sup_r, r=r,
                                      grid=grid_tag(prob.grid)))
    slope, intercept = fit_doubling_line(xs, ys)
    ok &= math.isfinite(slope)
    return {"pass": bool(ok), "C_emp": slope, "intercept": intercept,
            "r": r, "instances": rows}


def fit_doubling_line(xs, ys):
    """Least-squares sup_quarter ~ C_emp * sup_r + C_0 over a family."""
    x = np.asarray(xs)
    y = np.asarray(ys)
    if len(x) < 2:
        return math.nan, math.nan
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0]), float(coef[1])


def _check_measures(solved, records) -> dict:
    fam = dual_family(0.5)
    rows = {}
    ok = True
    worst_value = math.inf
    worst_fd = math.inf
    for name, prob, out in solved:
        if prob.grid.n != 3:
            if prob.grid.n >= 4:
                rows[name] = _check_two_convexity(prob, out)
                ok &= rows[name]["pass"]
            continue
        if out.constraint_violation_fraction > CONSTRAINT_FRACTION_GATE:
            rows[name] = {"skipped": "constraint_violation_fraction above gate",
                          "fraction": out.constraint_violation_fraction}
            continue
        case = classify_positivity_case(out.u, prob.constraint)
        target = out.u
        if case.case == "shifted_dual":
            target = shifted_solution(out.u, case.eps)
        inst = {"case": case.case,
                "lambda2_negative_nodes": case.lambda2_negative_nodes,
                "T_A_min": math.inf, "T_A_fd_min": math.inf,
                "discrepancy_max": 0.0}
        dx = prob.grid.spacing
        for bump_id, phi in enumerate(TEST_BUMPS):
            vals, disc = pairing_matrix(target, phi)
            inst["discrepancy_max"] = max(inst["discrepancy_max"], float(disc.max()))
            ok &= float(disc.max()) <= IBP_DISCREPANCY_K * dx ** 2
            for mat_name, A in fam:
                value = float(np.sum(A * vals))
                fd = t_a_functional_fd(target, phi, A)
                allow = QUADRATURE_TOL + float(np.sum(np.abs(A) * disc))
                ok &= value >= -allow
                ok &= fd >= -T_A_FD_TOL
                inst["T_A_min"] = min(inst["T_A_min"], value)
                inst["T_A_fd_min"] = min(inst["T_A_fd_min"], fd)
                worst_value = min(worst_value, value)
                worst_fd = min(worst_fd, fd)
            # reconstruction identity at t = 1/2 for every off-diagonal pair
            tr = float(np.trace(vals))
            for i, j in ((0, 1), (0, 2), (1, 2)):
                t_aij = float(np.sum(dual_test_matrix(0.5, i, j) * vals))
                lhs = (t_aij - tr) / (2.0 * 0.5)
                scale = max(abs(vals[i, j]), abs(tr), 1.0)
                ok &= abs(lhs - vals[i, j]) <= RECONSTRUCTION_RTOL * scale
            records.append(EstimateRecord(name, f"t_a_min_bump{bump_id}",
                                          inst["T_A_min"], grid=grid_tag(prob.grid)))
        rows[name] = inst
    return {"pass": bool(ok), "instances": rows, "quadrature_tol": QUADRATURE_TOL,
            "fd_tol": T_A_FD_TOL, "worst_T_A": worst_value, "worst_T_A_fd": worst_fd}


def _check_two_convexity(prob: PhaseProblem, out: SolveOutcome) -> dict:
    g = prob.grid
    lam = eigenvalues_field(hessian_field(out.u), g.n)
    mask = g.depth_field() >= 2
    rows = lam[mask].reshape(-1, g.n)
    e = _sigma_all(rows)
    tol = inequality_tol(float(np.abs(rows).max()))
    worst = float(min(e[:, 1].min(), e[:, 2].min()))
    return {"pass": bool(e[:, 1].min() >= -tol and e[:, 2].min() >= -tol),
            "case": "two_convex", "worst_sigma_margin": worst, "nodes": len(rows)}


def _check_alexandrov(solved, records) -> dict:
    rows = {}
    ok = True
    for name, prob, out in solved:
        if prob.grid.n != 3:
            continue
        g = prob.grid
        ball = Ball(g.center, 1.0)
        lip = lipschitz_norm(out.u, ball)
        wl = weighted_lipschitz(out.u, ball)
        probes = quadratic_approx_probe(out.u, g.center_index,
                                        [0.8, 0.4, 0.2, 0.1])
        ok &= math.isfinite(lip.c01) and math.isfinite(wl.ratio)
        rows[name] = {"c01": lip.c01, "weighted_lhs": wl.lhs,
                      "weighted_rhs": wl.rhs_integral, "weighted_ratio": wl.ratio,
                      "quadratic_probe": probes}
        records.append(EstimateRecord(name, "c01_norm", lip.c01, r=1.0,
                                      grid=grid_tag(g)))
        records.append(EstimateRecord(name, "weighted_lip_ratio", wl.ratio, r=1.0,
                                      grid=grid_tag(g)))
    return {"pass": bool(ok), "instances": rows}


CHECK_ORDER = ("solves", "geometry", "jacobi", "gradient", "appendix",
               "cutoff", "doubling", "measures", "alexandrov")


def run_verify(cfg: RunConfig) -> tuple:
    """Full verification pipeline; returns (report payload, estimate records)."""
    named = build_verify_instances(cfg)
    solved = solve_instances(named, tol=cfg.tol, jobs=cfg.jobs)
    records: list = []
    checks = {}
    if cfg.check == "all":
        selected = CHECK_ORDER
    else:
        wanted = {s.strip() for s in cfg.check.split(",") if s.strip()}
        unknown = wanted - set(CHECK_ORDER)
        if unknown:
            from .config import ConfigError
            raise ConfigError(f"unknown verify checks: {sorted(unknown)}")
        selected = tuple(c for c in CHECK_ORDER if c in wanted)
    if "solves" not in selected:
        selected = ("solves",) + selected
    for cid in selected:
        if cid == "solves":
            checks[cid] = _check_solves(solved, cfg.tol)
        elif cid == "geometry":
            checks[cid] = _check_geometry(solved)
        elif cid == "jacobi":
            checks[cid] = _check_jacobi(solved, records)
        elif cid == "gradient":
            checks[cid] = _check_gradient(solved, records)
        elif cid == "appendix":
            checks[cid] = _check_appendix(solved, records)
        elif cid == "cutoff":
            checks[cid] = _check_cutoff(solved, records)
        elif cid == "doubling":
            checks[cid] = _check_doubling(solved, records, cfg.r)
        elif cid == "measures":
            checks[cid] = _check_measures(solved, records)
        elif cid == "alexandrov":
            checks[cid] = _check_alexandrov(solved, records)
    payload = {
        "checks": checks,
        "pass": all(c.get("pass", True) for c in checks.values()),
        "instances": [name for name, _ in named],
        "grid": {"points": cfg.grid_points, "half_width": cfg.grid_l},
        "seed": cfg.seed,
    }
    return payload, records
