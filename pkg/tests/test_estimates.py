"""Estimate probe tests: oscillation, appendix test function, cutoff, doubling."""

import math

import numpy as np
import pytest

from slelab.estimates import (CutoffParams, EstimateRecord, appendix_test_function,
                              doubling_check, eta_b1_annulus_argmax,
                              gradient_ratio, grid_tag, hessian_probe,
                              korevaar_cutoff, oscillation, rescale,
                              smallest_sign_ok_alpha)
from slelab.field import Ball, Grid, GridFunction, b_m_field, jet
from slelab.solver import quadratic_solution


@pytest.fixture(scope="module")
def grid():
    return Grid(3, (0.0, 0.0, 0.0), 2.0, 17)


@pytest.fixture(scope="module")
def radial(grid):
    u, _ = quadratic_solution(grid, np.eye(3))
    return u


class TestOscillation:
    def test_constant(self, grid):
        u = GridFunction(grid, np.full(grid.shape, 2.5))
        assert oscillation(u, Ball((0, 0, 0), 1.0)) == 0.0

    def test_linear(self, grid):
        u = GridFunction.from_callable(grid, lambda x: x[..., 0])
        osc = oscillation(u, Ball((0, 0, 0), 1.0))
        assert 2.0 - 2 * grid.spacing <= osc <= 2.0

    def test_radial(self, grid, radial):
        assert oscillation(radial, Ball((0, 0, 0), 1.0)) == pytest.approx(0.5, abs=0.01)

    def test_empty_ball(self, grid, radial):
        with pytest.raises(ValueError):
            oscillation(radial, Ball((10.0, 0, 0), 0.01))


class TestGradientRatio:
    def test_critical_point(self, radial):
        assert gradient_ratio(radial, 1.0) == 0.0

    def test_shifted_paraboloid(self, grid):
        u = GridFunction.from_callable(
            grid, lambda x: 0.5 * ((x[..., 0] - 0.3) ** 2 + x[..., 1] ** 2
                                   + x[..., 2] ** 2))
        ratio = gradient_ratio(u, 1.0)
        osc = oscillation(u, Ball((0, 0, 0), 1.0))
        assert ratio == pytest.approx(0.3 * 1.0 / osc, rel=1e-12)

    def test_anomaly_flag(self, grid):
        # a sub-spacing ball holds one node (oscillation 0) while the gradient
        # stencil reaches outside it: flagged, not silently divided
        u = GridFunction.from_callable(grid, lambda x: x[..., 0])
        with pytest.raises(ValueError, match="oscillation"):
            gradient_ratio(u, 0.1)
        assert gradient_ratio(GridFunction(grid, np.zeros(grid.shape)), 1.0) == 0.0


class TestAppendixTestFunction:
    def test_radial_shifted_values(self, radial):
        pr = appendix_test_function(radial, shift_to_band=True)
        n, M = 3, pr.osc
        assert M == pytest.approx(0.5, abs=0.01)
        # at the center the gradient vanishes and u-shifted equals M
        assert pr.w_at_center == pytest.approx(n * M, rel=1e-12)
        assert pr.grad_at_center <= 1e-12

    def test_chain_inequalities(self, grid):
        u = GridFunction.from_callable(
            grid, lambda x: 0.4 * x[..., 0] + 0.3 * (x ** 2).sum(axis=-1)
            + 0.05 * np.sin(2 * x[..., 1]))
        pr = appendix_test_function(u, shift_to_band=True)
        assert pr.grad_at_center <= pr.w_at_center <= pr.w_max
        if pr.on_boundary_shell:
            assert pr.w_max <= 4 * 3 * pr.osc * (1 + 1e-12)

    def test_shell_w_uses_vanishing_cutoff(self, radial):
        pr = appendix_test_function(radial, shift_to_band=True)
        assert pr.on_boundary_shell
        # on the shell w = (n/M) u^2 <= 4 n M exactly
        assert pr.w_max <= 4 * 3 * pr.osc * (1 + 1e-12)

    def test_constant_rejected(self, grid):
        u = GridFunction(grid, np.ones(grid.shape))
        with pytest.raises(ValueError, match="constant"):
            appendix_test_function(u)


class TestKorevaarCutoff:
    def test_radial_term_cancels_at_shell_radius(self):
        # at |x - y| = 1/2 the subtracted constant matches the radial term
        for alpha in (2.0, 8.0, 32.0):
            assert (2.0 ** alpha / alpha) * 0.5 ** (-2 * alpha) == pytest.approx(
                (2.0 ** (3 * alpha)) / alpha, rel=1e-12)

    def test_eta_positive_part(self, radial):
        res = korevaar_cutoff(radial, CutoffParams(4.0, 0.125, (0, 0, 0)))
        vals = res.eta.values
        finite = np.isfinite(vals)
        assert (vals[finite] >= 0).all()
        diff_neg = res.phi.values[finite] > res.S
        assert (vals[finite][diff_neg] == 0.0).all()

    def test_sign_ok_alpha_sweep(self, radial):
        alpha, res = smallest_sign_ok_alpha(radial, (0, 0, 0), cutoff_scale=0.125)
        assert alpha is not None and alpha <= 64
        assert res.shell_max < 0.0 < res.inner_min

    def test_off_center(self, radial):
        res = korevaar_cutoff(radial, CutoffParams(8.0, 0.125, (0.25, 0.0, 0.0)))
        assert res.sign_ok

    def test_non_node_center_rejected(self, radial):
        with pytest.raises(ValueError, match="node"):
            korevaar_cutoff(radial, CutoffParams(4.0, 0.125, (0.2, 0.0, 0.0)))

    def test_annulus_argmax_diagnostic(self, radial):
        res = korevaar_cutoff(radial, CutoffParams(4.0, 0.125, (0, 0, 0)))
        b1 = b_m_field(radial, 1)
        d = eta_b1_annulus_argmax(res, 0.125, b1)
        assert 0.125 < d["radius"] <= 0.5


class TestDoubling:
    def test_quadratic_sups_equal(self, radial):
        rec = doubling_check(radial, (0, 0, 0), 0.125)
        assert rec.sup_quarter == pytest.approx(1.0, abs=1e-11)
        assert rec.sup_r == pytest.approx(1.0, abs=1e-11)

    def test_nested_monotonicity(self, grid):
        u = GridFunction.from_callable(
            grid, lambda x: 0.5 * (x ** 2).sum(axis=-1)
            + 0.05 * np.sin(3 * x[..., 0]))
        for r in (0.1, 0.2, 0.24):
            rec = doubling_check(u, (0, 0, 0), r)
            assert rec.sup_quarter >= rec.sup_r

    def test_domain_checks(self, radial):
        with pytest.raises(ValueError):
            doubling_check(radial, (0.8, 0, 0), 0.125)   # y outside B_{1/2}
        with pytest.raises(ValueError):
            doubling_check(radial, (0, 0, 0), 0.3)       # r >= 1/4
        with pytest.raises(ValueError):
            doubling_check(radial, (0.05, 0.05, 0.05), 0.01)  # empty small ball


class TestHessianProbe:
    def test_identity_quadratic(self, radial):
        pr = hessian_probe(radial)
        assert pr.hessian_norm_at_0 == pytest.approx(math.sqrt(3), rel=1e-12)
        assert pr.theta == pytest.approx(3 * math.pi / 4, rel=1e-12)
        assert pr.lipschitz_norm > 0


class TestRescale:
    def test_hessian_phase_invariance(self, grid):
        u = GridFunction.from_callable(
            grid, lambda x: 0.5 * (x ** 2).sum(axis=-1) + 0.1 * np.sin(x[..., 0]))
        v = rescale(u, 2.0)
        cu = jet(u, grid.center_index)
        cv = jet(v, v.grid.center_index)
        assert np.abs(cu.hessian - cv.hessian).max() <= 1e-12
        assert v.grid.half_width == pytest.approx(1.0)

    def test_round_trip(self, radial):
        v = rescale(rescale(radial, 2.0), 0.5)
        assert np.abs(v.values - radial.values).max() <= 1e-15


def test_estimate_record_csv_row():
    rec = EstimateRecord("inst", "quantity", 1.5, r=0.25, y=(0.0, 0.0, 0.0),
                         grid="n3p17L2")
    row = rec.csv_row()
    assert row[0] == "inst" and row[1] == "quantity"
    assert float(row[2]) == 1.5 and float(row[3]) == 0.25
    assert grid_tag(Grid(3, (0, 0, 0), 2.0, 17)) == "n3p17L2"
