"""Tests for overlap/loss computations and the parameter sweeps."""

import math

import numpy as np
import pytest

import oracles
from taperlith.analysis import (
    end_to_end_loss,
    loss_db,
    overlap_efficiency,
    regime_boundaries,
    run_chain,
    tilt_gap_sweep,
    wavelength_sweep,
    SweepResult,
)
from taperlith.bpm import BpmSettings
from taperlith.geometry import (
    ExposureSetup,
    FiberSpec,
    FrustumGeometry,
    Grid2D,
    frustum_index_map,
    trapezoid_mask,
)
from taperlith.lithosim import ProfileClass
from taperlith.modes import FieldSlice, elliptical_gaussian_source, fiber_lp01_analytic, solve_mode_fd


@pytest.fixture
def grid():
    return Grid2D.centered(30.0, 30.0, 0.1, 0.1)


class TestOverlapEfficiency:
    def test_identical_fields(self, grid):
        f = elliptical_gaussian_source(3.0, 2.0, grid, 1.55)
        assert overlap_efficiency(f, f) == pytest.approx(1.0, abs=1e-12)

    def test_even_odd_orthogonality(self, grid):
        even = elliptical_gaussian_source(3.0, 3.0, grid, 1.55)
        xc, _ = grid.meshgrid()
        odd = FieldSlice(grid=grid, E=even.E * xc, wavelength=1.55)
        assert overlap_efficiency(even, odd) < 1e-20

    def test_gaussian_pair_closed_form(self, grid):
        a = elliptical_gaussian_source(4.5, 4.5, grid, 1.55)
        b = elliptical_gaussian_source(2.25, 2.25, grid, 1.55)
        eta = overlap_efficiency(a, b)
        assert eta == pytest.approx(oracles.gaussian_overlap_efficiency(4.5, 2.25), abs=1e-6)
        assert eta == pytest.approx(0.64, abs=1e-6)

    def test_symmetry(self, grid):
        a = elliptical_gaussian_source(4.0, 2.0, grid, 1.55, center=(1.0, 0.5))
        b = elliptical_gaussian_source(2.0, 3.0, grid, 1.55)
        assert abs(overlap_efficiency(a, b) - overlap_efficiency(b, a)) < 1e-12

    def test_scalar_invariance(self, grid):
        a = elliptical_gaussian_source(4.0, 2.0, grid, 1.55)
        b = elliptical_gaussian_source(2.0, 3.0, grid, 1.55)
        scaled = FieldSlice(grid=grid, E=a.E * (0.3 - 0.8j), wavelength=1.55)
        assert overlap_efficiency(scaled, b) == pytest.approx(overlap_efficiency(a, b),
                                                              rel=1e-12)

    def test_rejects_zero_norm(self, grid):
        a = elliptical_gaussian_source(3.0, 3.0, grid, 1.55)
        zero = FieldSlice(grid=grid, E=np.zeros(grid.shape, dtype=complex), wavelength=1.55)
        with pytest.raises(ValueError, match="zero-power"):
            overlap_efficiency(a, zero)

    def test_rejects_grid_mismatch(self, grid):
        other = Grid2D.centered(30.0, 30.0, 0.15, 0.15)
        a = elliptical_gaussian_source(3.0, 3.0, grid, 1.55)
        b = elliptical_gaussian_source(3.0, 3.0, other, 1.55)
        with pytest.raises(ValueError, match="same grid"):
            overlap_efficiency(a, b)


class TestLossDb:
    def test_reference_points(self):
        assert loss_db(1.0) == 0.0
        assert loss_db(0.5) == pytest.approx(3.0103, abs=1e-4)
        assert loss_db(10.0 ** -0.02) == pytest.approx(0.2, abs=1e-12)

    def test_total_loss_sentinel(self):
        assert loss_db(0.0) == math.inf
        assert loss_db(-0.1) == math.inf

    def test_rejects_efficiency_above_one(self):
        with pytest.raises(ValueError, match="exceeds 1"):
            loss_db(1.01)

    def test_strictly_decreasing(self):
        etas = np.linspace(0.05, 1.0, 25)
        losses = [loss_db(float(e)) for e in etas]
        assert all(b < a for a, b in zip(losses, losses[1:]))


def _small_bpm_setup():
    """Coarse, fast BPM configuration for chain tests."""
    grid = Grid2D(nx=101, ny=101, dx=0.25, dy=0.25, x0=-12.5, y0=-10.0)
    settings = BpmSettings(wavelength=1.55, dz=2.0, pml_thickness=3.0)
    return grid, settings


class TestEndToEndLoss:
    def test_matched_chain_is_lossless(self):
        grid, settings = _small_bpm_setup()
        geom = FrustumGeometry(w_in=8.0, w_out=8.0, h_in=8.0, h_out=8.0, length=100.0,
                               n_core=1.465)
        chain = run_chain(None, geom, FiberSpec(), settings, grid)
        # straight guide launched with its own mode, measured against its own mode
        assert chain.breakdown.facet_db == 0.0
        assert chain.breakdown.taper_db < 0.01
        eta_self = overlap_efficiency(chain.propagation.final_field, chain.mode_out.field)
        assert loss_db(eta_self) < 0.01

    def test_breakdown_sums_to_total(self):
        grid, settings = _small_bpm_setup()
        geom = FrustumGeometry(w_in=3.0, w_out=8.0, h_in=2.0, h_out=8.0, length=100.0)
        src = elliptical_gaussian_source(2.0, 1.5, grid, 1.55, center=(0.0, 1.0))
        b = end_to_end_loss(src, geom, FiberSpec(), settings, grid)
        assert b.total_db == pytest.approx(b.facet_db + b.taper_db + b.exit_db, abs=1e-9)
        assert b.facet_db > 0.0

    def test_offset_fiber_increases_loss(self, grid):
        # direct-integral check: overlap drops monotonically with lateral offset
        geom = FrustumGeometry(w_in=3.0, w_out=10.0, h_in=2.0, h_out=10.0, length=1000.0)
        mode = solve_mode_fd(frustum_index_map(geom, 1000.0, grid), 1.55)
        centered = fiber_lp01_analytic(9.0, 1.450, 1.444, 1.55, grid, center=(0.0, 5.0))
        offset = fiber_lp01_analytic(9.0, 1.450, 1.444, 1.55, grid, center=(4.5, 5.0))
        eta_c = overlap_efficiency(mode.field, centered.field)
        eta_o = overlap_efficiency(mode.field, offset.field)
        assert eta_o < eta_c

    def test_offset_loss_even_in_sign(self, grid):
        geom = FrustumGeometry(w_in=3.0, w_out=10.0, h_in=2.0, h_out=10.0, length=1000.0)
        mode = solve_mode_fd(frustum_index_map(geom, 1000.0, grid), 1.55)
        plus = fiber_lp01_analytic(9.0, 1.450, 1.444, 1.55, grid, center=(3.0, 5.0))
        minus = fiber_lp01_analytic(9.0, 1.450, 1.444, 1.55, grid, center=(-3.0, 5.0))
        eta_p = overlap_efficiency(mode.field, plus.field)
        eta_m = overlap_efficiency(mode.field, minus.field)
        assert eta_p == pytest.approx(eta_m, rel=1e-6)


class TestWavelengthSweep:
    geom = FrustumGeometry(w_in=3.0, w_out=8.0, h_in=2.0, h_out=8.0, length=100.0)

    def test_single_point_matches_end_to_end(self):
        grid, settings = _small_bpm_setup()
        sweep = wavelength_sweep([1.55], self.geom, FiberSpec(), settings, grid)
        assert len(sweep.rows) == 1
        direct = end_to_end_loss(None, self.geom, FiberSpec(), settings, grid)
        row = sweep.rows[0]
        assert row[0] == 1.55
        assert row[4] == pytest.approx(direct.total_db, abs=1e-12)
        assert row[5] == ""

    def test_multi_point_trend_rows(self):
        grid, settings = _small_bpm_setup()
        lams = [1.31, 1.43, 1.55, 1.61]
        sweep = wavelength_sweep(lams, self.geom, FiberSpec(n_core=1.4478), settings, grid)
        assert [row[0] for row in sweep.rows] == lams
        assert all(math.isfinite(row[4]) for row in sweep.rows)
        assert all(row[5] == "" for row in sweep.rows)

    def test_rejects_unsorted_wavelengths(self):
        grid, settings = _small_bpm_setup()
        with pytest.raises(ValueError, match="strictly increasing"):
            wavelength_sweep([1.55, 1.31], self.geom, FiberSpec(), settings, grid)

    def test_rejects_empty_list(self):
        grid, settings = _small_bpm_setup()
        with pytest.raises(ValueError, match="empty"):
            wavelength_sweep([], self.geom, FiberSpec(), settings, grid)


class TestTiltGapSweep:
    mask = trapezoid_mask(10.0, 10.0, 300.0)
    setup = ExposureSetup(gap0=200.0, tilt_deg=0.0)

    def test_zero_tilt_angle_is_flat(self):
        sweep = tilt_gap_sweep([0.0], [200.0], self.mask, self.setup, dose_scale=1.15)
        (tilt, gap, angle, cls, err) = sweep.rows[0]
        assert err == ""
        assert tilt == 0.0 and gap == 200.0
        assert angle < 0.01
        assert cls in {c.value for c in ProfileClass}

    def test_failed_cell_recorded_and_sweep_continues(self):
        sweep = tilt_gap_sweep([-5.0, 0.0], [200.0], self.mask, self.setup,
                               dose_scale=1.15)
        bad, good = sweep.rows
        assert bad[4] != "" and math.isnan(bad[2])
        assert good[4] == ""

    def test_rows_in_parameter_order(self):
        sweep = tilt_gap_sweep([0.0, 5.0], [150.0, 250.0], self.mask, self.setup,
                               dose_scale=1.15)
        assert [(r[0], r[1]) for r in sweep.rows] == [
            (0.0, 150.0), (0.0, 250.0), (5.0, 150.0), (5.0, 250.0)]

    def test_rejects_empty_axes(self):
        with pytest.raises(ValueError, match="non-empty"):
            tilt_gap_sweep([], [100.0], self.mask, self.setup)


class TestRegimeBoundaries:
    def test_midpoint_boundaries_from_rows(self):
        rows = tuple(
            (10.0, g, 0.5, c, "") for g, c in [
                (100.0, "FlatTop"), (200.0, "FlatTop"), (300.0, "HemiFrustum"),
                (400.0, "HemiFrustum"), (500.0, "Blurred"),
            ])
        sweep = SweepResult(name="tilt_gap",
                            columns=("tilt_deg", "gap0_um", "taper_angle_deg",
                                     "profile_class", "error"),
                            rows=rows, metadata={})
        flat_hf, hf_blur = regime_boundaries(sweep, 10.0)
        assert flat_hf == 250.0
        assert hf_blur == 450.0

    def test_missing_tilt_raises(self):
        sweep = SweepResult(name="tilt_gap", columns=("a",), rows=(), metadata={})
        with pytest.raises(ValueError, match="no successful cells"):
            regime_boundaries(sweep, 10.0)
