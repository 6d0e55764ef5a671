"""Semi-vectorial finite-difference beam propagation through z-varying index maps.

One step advances the slowly-varying envelope of the paraxial equation
2i k0 n_ref dE/dz = (Dxx + Dyy) E + k0^2 (n^2 - n_ref^2) E
by an exact phase half-step for the index term sandwiching per-axis
Crank-Nicolson (Cayley) factors for the transverse Laplacian; the x/y sweep
order alternates each step to cancel splitting bias. Every factor is unitary
for scalar lossless runs, so power is conserved to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .geometry import Grid2D, IndexMap
from .modes import FieldSlice, ModeProfile, solve_mode_fd
from .operators import SCALAR, _check_polarization, apply_tridiagonal, axis_coeffs, solve_tridiagonal


@dataclass(frozen=True)
class BpmSettings:
    """Discretization and boundary parameters for one propagation run."""

    wavelength: float
    dz: float = 0.5
    n_ref: float | None = None
    polarization: str = SCALAR
    pml_thickness: float = 3.0
    pml_strength: float = 4.0

    def __post_init__(self) -> None:
        _check_polarization(self.polarization)
        if self.wavelength <= 0.0:
            raise ValueError("wavelength must be positive")
        if self.dz <= 0.0:
            raise ValueError("dz must be positive")
        if self.n_ref is not None and self.n_ref <= 0.0:
            raise ValueError("n_ref must be positive")
        if self.pml_thickness < 0.0:
            raise ValueError("pml_thickness must be >= 0")
        if self.pml_strength < 0.0:
            raise ValueError("pml_strength must be >= 0")


@dataclass(frozen=True)
class PmlProfile:
    """Complex coordinate-stretch factors per axis, at cell centers and faces.

    All factors are exactly 1 outside the absorbing bands.
    """

    sx_center: np.ndarray
    sx_face: np.ndarray
    sy_center: np.ndarray
    sy_face: np.ndarray

    @property
    def interior_x(self) -> np.ndarray:
        return self.sx_center.imag == 0.0

    @property
    def interior_y(self) -> np.ndarray:
        return self.sy_center.imag == 0.0


def _stretch(coords: np.ndarray, lo: float, hi: float, thickness: float, strength: float) -> np.ndarray:
    s = np.ones(coords.size, dtype=complex)
    if thickness > 0.0:
        depth_lo = (lo + thickness) - coords
        depth_hi = coords - (hi - thickness)
        depth = np.maximum(np.maximum(depth_lo, depth_hi), 0.0) / thickness
        s += 1j * strength * depth**2
    return s


def apply_pml(settings: BpmSettings, grid: Grid2D, index: IndexMap | None = None) -> PmlProfile:
    """Quadratically graded complex coordinate stretch for the domain boundary.

    Zero absorption in the interior. Rejects layers thicker than a quarter of
    the domain, and (when an index map is supplied) layers that overlap the
    guiding core.
    """
    span_x = (grid.nx - 1) * grid.dx
    span_y = (grid.ny - 1) * grid.dy
    th = settings.pml_thickness
    if th > 0.25 * min(span_x, span_y):
        raise ValueError(
            f"pml_thickness {th} exceeds a quarter of the domain ({span_x} x {span_y})"
        )
    x_lo, x_hi = grid.x0, grid.x0 + span_x
    y_lo, y_hi = grid.y0, grid.y0 + span_y
    faces_x = grid.x0 + grid.dx * (np.arange(grid.nx + 1) - 0.5)
    faces_y = grid.y0 + grid.dy * (np.arange(grid.ny + 1) - 0.5)
    profile = PmlProfile(
        sx_center=_stretch(grid.x, x_lo, x_hi, th, settings.pml_strength),
        sx_face=_stretch(faces_x, x_lo, x_hi, th, settings.pml_strength),
        sy_center=_stretch(grid.y, y_lo, y_hi, th, settings.pml_strength),
        sy_face=_stretch(faces_y, y_lo, y_hi, th, settings.pml_strength),
    )
    if index is not None and th > 0.0 and index.n.max() > index.n.min():
        core = index.n >= index.n.max() - 1e-12
        absorbed = ~profile.interior_y[:, None] | ~profile.interior_x[None, :]
        if np.any(core & absorbed):
            raise ValueError("PML overlaps the guiding core; shrink the layer or grow the domain")
    return profile


@lru_cache(maxsize=8)
def _cached_pml(settings: BpmSettings, grid: Grid2D) -> PmlProfile:
    return apply_pml(settings, grid)


def _cayley_sweep(
    E: np.ndarray,
    n: np.ndarray,
    d: float,
    axis: int,
    polarization: str,
    gamma: float,
    stretch,
) -> np.ndarray:
    """One Crank-Nicolson half of the ADI split: solve (I - ig H)E' = (I + ig H)E."""
    work = E if axis == 1 else E.T
    lo, di, up = axis_coeffs(n, d, axis=axis, polarization=polarization, stretch=stretch)
    rhs = work + 1j * gamma * apply_tridiagonal(lo, di, up, work)
    out = solve_tridiagonal(-1j * gamma * lo, 1.0 - 1j * gamma * di, -1j * gamma * up, rhs)
    return out if axis == 1 else out.T


def bpm_step(
    field: FieldSlice,
    index: IndexMap,
    settings: BpmSettings,
    pml: PmlProfile | None = None,
    parity: int = 0,
) -> FieldSlice:
    """Advance the field by one dz through the given index cross-section.

    ``parity`` selects the x-then-y or y-then-x sweep order; alternate it each
    step. The PML profile is derived from the settings when not supplied.
    """
    if field.grid != index.grid:
        raise ValueError("field and index map grids do not match")
    if not np.all(np.isfinite(field.E)):
        raise RuntimeError("non-finite field detected (propagation instability)")
    if settings.n_ref is None:
        raise ValueError("settings.n_ref must be resolved before stepping (see propagate)")
    if pml is None:
        pml = _cached_pml(settings, field.grid) if settings.pml_thickness > 0.0 else None

    grid = field.grid
    k0 = 2.0 * math.pi / settings.wavelength
    n_ref = settings.n_ref
    gamma = settings.dz / (4.0 * k0 * n_ref)
    half_phase = np.exp(1j * settings.dz * k0 * (index.n**2 - n_ref**2) / (4.0 * n_ref))

    sx = (pml.sx_center, pml.sx_face) if pml is not None else None
    sy = (pml.sy_center, pml.sy_face) if pml is not None else None

    E = field.E * half_phase
    order = ((1, grid.dx, sx), (0, grid.dy, sy))
    if parity % 2:
        order = order[::-1]
    for axis, d, stretch in order:
        E = _cayley_sweep(E, index.n, d, axis, settings.polarization, gamma, stretch)
    E = E * half_phase
    return replace(field, E=E)


@dataclass(frozen=True)
class PropagationResult:
    """Field snapshots, guided-power trace, and the final field of one run."""

    snapshots: tuple[tuple[float, FieldSlice], ...]
    power_vs_z: tuple[tuple[float, float], ...]
    final_field: FieldSlice

    def __post_init__(self) -> None:
        zs = [z for z, _ in self.power_vs_z]
        if any(b <= a for a, b in zip(zs, zs[1:])):
            raise ValueError("power_vs_z positions must be strictly increasing")


def _fraction(E: np.ndarray, monitor: np.ndarray | None, interior: np.ndarray,
              cell_area: float, p0: float, pm: float) -> float:
    if monitor is not None:
        ov = np.vdot(monitor, E) * cell_area
        return float(abs(ov) ** 2 / (p0 * pm))
    return float(np.sum(np.abs(E[interior]) ** 2) * cell_area / p0)


def propagate(
    source: FieldSlice,
    index_of: Callable[[float], IndexMap],
    settings: BpmSettings,
    z_end: float,
    monitor_mode: ModeProfile | None = None,
    snapshot_zs: Sequence[float] = (),
    check_power: bool = True,
) -> PropagationResult:
    """March the source field from z=0 to ``z_end`` through ``index_of(z)``.

    The index is sampled at each step midpoint. ``power_vs_z`` records the
    monitor-mode power fraction when a monitor is given, else the total power
    outside the PML, both relative to the launch power. Snapshots are taken at
    the first step boundary reaching each requested z. When ``settings.n_ref``
    is unset it is resolved to the launch cross-section's fundamental mode index.
    Raises if more than half the power disappears before z_end/2, unless
    ``check_power`` is disabled for runs that absorb the beam on purpose.
    """
    if z_end < 0.0:
        raise ValueError("z_end must be >= 0")
    grid = source.grid
    first = index_of(0.0)
    if first.grid != grid:
        raise ValueError("source and index provider grids do not match")
    if settings.n_ref is None:
        n_ref = solve_mode_fd(first, settings.wavelength, settings.polarization).n_eff
        settings = replace(settings, n_ref=n_ref)

    pml = apply_pml(settings, grid, index=first) if settings.pml_thickness > 0.0 else None
    if pml is not None:
        interior = pml.interior_y[:, None] & pml.interior_x[None, :]
    else:
        interior = np.ones(grid.shape, dtype=bool)

    mon = monitor_mode.field.E if monitor_mode is not None else None
    p0 = source.power()
    if p0 <= 0.0:
        raise ValueError("source field has no power")
    pm = monitor_mode.field.power() if monitor_mode is not None else 1.0

    targets = sorted(set(float(z) for z in snapshot_zs))
    snapshots: list[tuple[float, FieldSlice]] = []
    power: list[tuple[float, float]] = []

    def take_snapshots(z: float, field: FieldSlice) -> None:
        while targets and targets[0] <= z + 1e-9:
            snapshots.append((targets.pop(0), replace(field, E=field.E.copy())))

    field = source
    z = 0.0
    take_snapshots(0.0, field)
    power.append((0.0, _fraction(field.E, mon, interior, grid.cell_area, p0, pm)))

    n_steps = int(math.ceil(z_end / settings.dz - 1e-12))
    halfway_checked = False
    for step in range(n_steps):
        dz_k = min(settings.dz, z_end - z)
        step_settings = settings if dz_k == settings.dz else replace(settings, dz=dz_k)
        mid = index_of(min(z + 0.5 * dz_k, z_end))
        field = bpm_step(field, mid, step_settings, pml=pml, parity=step)
        z += dz_k
        rel = float(np.sum(np.abs(field.E) ** 2) * grid.cell_area / p0)
        if check_power and not halfway_checked and z >= 0.5 * z_end:
            halfway_checked = True
            if rel < 0.5:
                raise RuntimeError(
                    f"more than 50% of the launch power lost by z={z:.1f} (of {z_end}); "
                    "check grid, PML, or launch alignment"
                )
        take_snapshots(z, field)
        power.append((z, _fraction(field.E, mon, interior, grid.cell_area, p0, pm)))

    return PropagationResult(
        snapshots=tuple(snapshots), power_vs_z=tuple(power), final_field=field
    )
