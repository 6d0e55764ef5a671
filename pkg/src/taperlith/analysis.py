"""Coupling-efficiency and loss computations, plus the parameter sweeps that
regenerate the published performance curves as data tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .bpm import BpmSettings, PropagationResult, propagate
from .geometry import (
    ExposureSetup,
    FiberSpec,
    FrustumGeometry,
    Grid2D,
    MaskPattern,
    frustum_index_map,
)
from .lithosim import (
    ProfileClass,
    classify_profile,
    make_litho_grid,
    simulate_print,
    vertical_taper_angle,
)
from .modes import FieldSlice, ModeProfile, fiber_lp01_analytic, solve_mode_fd


def overlap_efficiency(a: FieldSlice, b: FieldSlice) -> float:
    """Power-coupling efficiency |<a,b>|^2 / (<a,a> <b,b>) of two fields on one grid."""
    if a.grid != b.grid:
        raise ValueError("overlap requires both fields on the same grid")
    if a.wavelength != b.wavelength:
        raise ValueError("overlap requires equal wavelengths")
    pa = a.power()
    pb = b.power()
    if pa <= 0.0 or pb <= 0.0:
        raise ValueError("overlap of a zero-power field is undefined")
    inner = np.vdot(b.E, a.E) * a.grid.cell_area
    return float(abs(inner) ** 2 / (pa * pb))


def loss_db(eta: float) -> float:
    """Coupling efficiency to insertion loss, -10 log10(eta).

    eta <= 0 signals total loss and returns +inf; eta just above 1 from
    rounding is clipped, larger values are rejected.
    """
    if eta <= 0.0:
        return math.inf
    if eta > 1.0 + 1e-9:
        raise ValueError(f"efficiency {eta} exceeds 1")
    return -10.0 * math.log10(min(eta, 1.0))


@dataclass(frozen=True)
class LossBreakdown:
    """Loss chain in dB: source->facet mode, taper propagation, exit->fiber overlap."""

    facet_db: float
    taper_db: float
    exit_db: float

    @property
    def total_db(self) -> float:
        return self.facet_db + self.taper_db + self.exit_db


@dataclass(frozen=True)
class ChainResult:
    """Everything produced by one end-to-end run, for reporting and dumps."""

    breakdown: LossBreakdown
    propagation: PropagationResult
    mode_in: ModeProfile
    mode_out: ModeProfile
    fiber_mode: ModeProfile


def run_chain(
    source: FieldSlice | None,
    geom: FrustumGeometry,
    fiber: FiberSpec,
    settings: BpmSettings,
    grid: Grid2D,
    fiber_offset: tuple[float, float] = (0.0, 0.0),
    snapshot_zs: Sequence[float] = (),
) -> ChainResult:
    """Full coupling chain: facet overlap, taper propagation, fiber overlap.

    The facet term is the source's overlap with the locally solved fundamental
    mode at z=0 (zero when ``source`` is None and the mode itself is launched);
    the taper term is the modal power retention into the exit-facet fundamental;
    the exit term overlaps the propagated output field with the analytic fiber
    mode centered on the exit core (plus ``fiber_offset``).
    """
    lam = settings.wavelength
    pol = settings.polarization
    mode_in = solve_mode_fd(frustum_index_map(geom, 0.0, grid), lam, pol)
    mode_out = solve_mode_fd(
        frustum_index_map(geom, geom.length, grid), lam, pol, n_guess=geom.n_core
    )
    if source is None:
        facet_db = 0.0
    else:
        facet_db = loss_db(overlap_efficiency(source, mode_in.field))
    if settings.n_ref is None:
        settings = replace(settings, n_ref=mode_in.n_eff)
    result = propagate(
        mode_in.field,
        lambda z: frustum_index_map(geom, z, grid),
        settings,
        geom.length,
        monitor_mode=mode_out,
        snapshot_zs=snapshot_zs,
    )
    retention = result.power_vs_z[-1][1]
    taper_db = loss_db(min(retention, 1.0)) if retention > 0.0 else math.inf

    fiber_center = (fiber_offset[0], 0.5 * geom.h_out + fiber_offset[1])
    fiber_mode = fiber_lp01_analytic(
        fiber.core_diameter, fiber.n_core, fiber.n_clad, lam, grid, center=fiber_center
    )
    exit_db = loss_db(overlap_efficiency(result.final_field, fiber_mode.field))
    return ChainResult(
        breakdown=LossBreakdown(facet_db=facet_db, taper_db=taper_db, exit_db=exit_db),
        propagation=result,
        mode_in=mode_in,
        mode_out=mode_out,
        fiber_mode=fiber_mode,
    )


def end_to_end_loss(
    source: FieldSlice | None,
    geom: FrustumGeometry,
    fiber: FiberSpec,
    settings: BpmSettings,
    grid: Grid2D,
    fiber_offset: tuple[float, float] = (0.0, 0.0),
) -> LossBreakdown:
    """Loss breakdown of the source -> taper -> fiber chain (see ``run_chain``)."""
    return run_chain(source, geom, fiber, settings, grid, fiber_offset).breakdown


@dataclass(frozen=True)
class SweepResult:
    """Rows of a parameter sweep with named, unit-bearing columns."""

    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    metadata: Mapping[str, str]

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]


def wavelength_sweep(
    wavelengths: Sequence[float],
    geom: FrustumGeometry,
    fiber: FiberSpec,
    settings: BpmSettings,
    grid: Grid2D,
    metadata: Mapping[str, str] | None = None,
) -> SweepResult:
    """End-to-end loss versus wavelength, re-solving modes at every point.

    Wavelengths must be positive and strictly increasing. Per-point failures are
    recorded in the error column and the sweep continues.
    """
    wl = [float(w) for w in wavelengths]
    if not wl:
        raise ValueError("wavelength list is empty")
    if any(w <= 0.0 for w in wl):
        raise ValueError("wavelengths must be positive")
    if any(b <= a for a, b in zip(wl, wl[1:])):
        raise ValueError("wavelengths must be strictly increasing")

    rows = []
    for lam in wl:
        pt = replace(settings, wavelength=lam, n_ref=None)
        try:
            b = end_to_end_loss(None, geom, fiber, pt, grid)
            rows.append((lam, b.facet_db, b.taper_db, b.exit_db, b.total_db, ""))
        except Exception as exc:  # per-point failure: record and continue
            rows.append((lam, math.nan, math.nan, math.nan, math.nan, str(exc)))
    return SweepResult(
        name="wavelength_loss",
        columns=("wavelength_um", "facet_db", "taper_db", "exit_db", "total_db", "error"),
        rows=tuple(rows),
        metadata=dict(metadata or {}),
    )


def _litho_cell(args) -> tuple:
    tilt, gap0, mask, setup_base, dose_scale, dx, dy, strip = args
    try:
        setup = ExposureSetup(
            gap0=gap0,
            tilt_deg=tilt,
            wavelength=setup_base.wavelength,
            dose_threshold=setup_base.dose_threshold,
            dose_clear=setup_base.dose_clear,
            resist_thickness=setup_base.resist_thickness,
        )
        grid = make_litho_grid(mask, setup, dx=dx, dy=dy)
        profile = simulate_print(mask, setup, grid, dose_scale=dose_scale, strip=strip)
        cls = classify_profile(profile, setup, edge_bound=mask.w_long)
        angle = abs(vertical_taper_angle(profile))
        return (tilt, gap0, angle, cls.value, "")
    except Exception as exc:
        return (tilt, gap0, math.nan, "", str(exc))


def tilt_gap_sweep(
    tilts_deg: Sequence[float],
    gap0s: Sequence[float],
    mask: MaskPattern,
    setup: ExposureSetup,
    dose_scale: float = 1.0,
    dx: float = 0.2,
    dy: float = 0.2,
    strip: float = 10.0,
    jobs: int = 1,
    metadata: Mapping[str, str] | None = None,
) -> SweepResult:
    """Print, develop, and classify the ridge over a (tilt, gap) parameter grid.

    Emits the magnitude of the fitted vertical taper angle and the profile class
    per cell; per-cell failures are recorded and the sweep continues. Cells are
    independent and merged in parameter order regardless of worker scheduling.
    """
    tilts = [float(t) for t in tilts_deg]
    gaps = [float(g) for g in gap0s]
    if not tilts or not gaps:
        raise ValueError("sweep axes must be non-empty")
    if any(b <= a for a, b in zip(tilts, tilts[1:])) or any(
        b <= a for a, b in zip(gaps, gaps[1:])
    ):
        raise ValueError("sweep axes must be strictly increasing")

    cells = [
        (t, g, mask, setup, dose_scale, dx, dy, strip) for t in tilts for g in gaps
    ]
    if jobs > 1:
        import multiprocessing as mp

        with mp.Pool(processes=jobs) as pool:
            rows = pool.map(_litho_cell, cells)
    else:
        rows = [_litho_cell(c) for c in cells]
    return SweepResult(
        name="tilt_gap",
        columns=("tilt_deg", "gap0_um", "taper_angle_deg", "profile_class", "error"),
        rows=tuple(rows),
        metadata=dict(metadata or {}),
    )


def regime_boundaries(sweep: SweepResult, tilt_deg: float) -> tuple[float, float]:
    """Gap positions of the FlatTop->HemiFrustum and HemiFrustum->Blurred transitions.

    Each boundary is the midpoint between the last cell of the earlier class and
    the first cell of the later one, scanning the given tilt row by gap.
    """
    rows = [r for r in sweep.rows if r[0] == tilt_deg and not r[4]]
    rows.sort(key=lambda r: r[1])
    if not rows:
        raise ValueError(f"no successful cells at tilt {tilt_deg}")
    flat_hf = math.nan
    hf_blur = math.nan
    for (_, g1, _, c1, _), (_, g2, _, c2, _) in zip(rows, rows[1:]):
        if c1 == ProfileClass.FLAT_TOP.value and c2 == ProfileClass.HEMI_FRUSTUM.value:
            flat_hf = 0.5 * (g1 + g2)
        if c1 == ProfileClass.HEMI_FRUSTUM.value and c2 == ProfileClass.BLURRED.value:
            hf_blur = 0.5 * (g1 + g2)
    return flat_hf, hf_blur
