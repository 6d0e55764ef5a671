"""Mask patterns, the tilted-mask gap law, and refractive-index maps on computation grids.

All lengths are micrometers; angles are degrees at the API surface. Field and
index arrays are indexed ``[y, x]`` (numpy meshgrid convention).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid2D:
    """Uniform 2-D sampling grid with cell centers at ``x0 + i*dx``, ``y0 + j*dy``."""

    nx: int
    ny: int
    dx: float
    dy: float
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self) -> None:
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"grid needs at least 2 samples per axis, got {self.nx}x{self.ny}")
        if self.dx <= 0.0 or self.dy <= 0.0:
            raise ValueError(f"grid spacing must be positive, got dx={self.dx}, dy={self.dy}")

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape ``(ny, nx)`` for fields sampled on this grid."""
        return (self.ny, self.nx)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.y0 + self.dy * np.arange(self.ny)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y)

    @classmethod
    def centered(cls, span_x: float, span_y: float, dx: float, dy: float) -> "Grid2D":
        """Grid symmetric about the origin covering at least ``span_x`` by ``span_y``."""
        nx = int(math.ceil(span_x / dx)) + 1
        ny = int(math.ceil(span_y / dy)) + 1
        return cls(nx=nx, ny=ny, dx=dx, dy=dy, x0=-0.5 * (nx - 1) * dx, y0=-0.5 * (ny - 1) * dy)


@dataclass(frozen=True)
class MaskPattern:
    """Binary trapezoidal aperture, parallel sides along x, taper axis along y.

    The aperture width grows linearly from ``w_short`` at y=0 to ``w_long`` at
    y=``altitude``; transmission is 1 strictly inside and 0 outside.
    """

    w_short: float
    w_long: float
    altitude: float

    def __post_init__(self) -> None:
        if self.w_short <= 0.0 or self.w_long <= 0.0 or self.altitude <= 0.0:
            raise ValueError("mask dimensions must be positive")
        if self.w_short > self.w_long:
            raise ValueError(f"inverted trapezoid: w_short={self.w_short} > w_long={self.w_long}")

    def half_width(self, y) -> np.ndarray:
        """Aperture half-width at axial position y (clipped to the trapezoid extent)."""
        y = np.asarray(y, dtype=float)
        return 0.5 * (self.w_short + (self.w_long - self.w_short) * y / self.altitude)

    def transmission(self, x, y) -> np.ndarray:
        """Evaluate the binary transmission on broadcastable coordinate arrays."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        inside = (y >= 0.0) & (y <= self.altitude) & (np.abs(x) <= self.half_width(y))
        return inside.astype(float)


def trapezoid_mask(w_short: float, w_long: float, altitude: float) -> MaskPattern:
    """Build a trapezoidal mask aperture; rejects non-positive or inverted dimensions."""
    return MaskPattern(w_short=w_short, w_long=w_long, altitude=altitude)


@dataclass(frozen=True)
class ExposureSetup:
    """One proximity print: base gap, mask tilt, exposure wavelength and dose model.

    The dose model is a two-parameter linear threshold: clear-field-normalized
    doses below ``dose_threshold`` leave no resist, above ``dose_clear`` leave
    the full thickness.
    """

    gap0: float
    tilt_deg: float
    wavelength: float = 0.405
    dose_threshold: float = 0.3
    dose_clear: float = 0.7
    resist_thickness: float = 35.0

    def __post_init__(self) -> None:
        if self.gap0 < 0.0:
            raise ValueError(f"gap0 must be >= 0, got {self.gap0}")
        if not 0.0 <= self.tilt_deg < 90.0:
            raise ValueError(f"tilt_deg must lie in [0, 90), got {self.tilt_deg}")
        if self.wavelength <= 0.0:
            raise ValueError("wavelength must be positive")
        if not 0.0 < self.dose_threshold < self.dose_clear:
            raise ValueError(
                f"need 0 < dose_threshold < dose_clear, got {self.dose_threshold}, {self.dose_clear}"
            )
        if self.resist_thickness <= 0.0:
            raise ValueError("resist_thickness must be positive")


def local_gap(setup: ExposureSetup, y) -> np.ndarray | float:
    """Resist-to-mask distance under the inclined mask at arclength y.

    The inclined mask rises linearly above the base gap: g(y) = gap0 + y*sin(tilt).
    """
    y = np.asarray(y, dtype=float)
    g = setup.gap0 + y * math.sin(math.radians(setup.tilt_deg))
    return float(g) if g.ndim == 0 else g


@dataclass(frozen=True)
class FrustumGeometry:
    """Dual-taper guide: rectangular core growing linearly in width and height along z.

    The core bottom face sits on the substrate plane y=0. Index defaults are the
    weak-guidance benchmark values (fiber-like contrast).
    """

    w_in: float
    w_out: float
    h_in: float
    h_out: float
    length: float
    n_core: float = 1.465
    n_clad: float = 1.445
    n_substrate: float = 1.445

    def __post_init__(self) -> None:
        for name in ("w_in", "w_out", "h_in", "h_out", "length"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.n_core <= self.n_clad:
            raise ValueError(f"guiding requires n_core > n_clad ({self.n_core} <= {self.n_clad})")
        if self.n_core <= self.n_substrate:
            raise ValueError(
                f"guiding requires n_core > n_substrate ({self.n_core} <= {self.n_substrate})"
            )

    def width_at(self, z: float) -> float:
        return self.w_in + (self.w_out - self.w_in) * z / self.length

    def height_at(self, z: float) -> float:
        return self.h_in + (self.h_out - self.h_in) * z / self.length


@dataclass(frozen=True)
class FiberSpec:
    """Step-index fiber cross-section parameters."""

    core_diameter: float = 9.0
    n_core: float = 1.450
    n_clad: float = 1.444

    def __post_init__(self) -> None:
        if self.core_diameter <= 0.0:
            raise ValueError("core_diameter must be positive")
        if self.n_core <= self.n_clad:
            raise ValueError(f"fiber requires n_core > n_clad ({self.n_core} <= {self.n_clad})")


@dataclass(frozen=True)
class IndexMap:
    """Real refractive-index distribution n(x, y) on a grid at longitudinal position z."""

    grid: Grid2D
    z: float
    n: np.ndarray

    def __post_init__(self) -> None:
        if self.n.shape != self.grid.shape:
            raise ValueError(f"index array shape {self.n.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.n)):
            raise ValueError("index map contains non-finite values")
        if np.any(self.n < 1.0):
            raise ValueError("refractive index below 1 is not supported")


def _axis_coverage(centers: np.ndarray, half: float, lo: float, hi: float) -> np.ndarray:
    """Fraction of each cell of half-width ``half`` covered by the interval [lo, hi]."""
    left = np.maximum(centers - half, lo)
    right = np.minimum(centers + half, hi)
    return np.clip((right - left) / (2.0 * half), 0.0, 1.0)


def frustum_index_map(
    geom: FrustumGeometry, z: float, grid: Grid2D, antialias: bool = False
) -> IndexMap:
    """Sample the frustum cross-section at z: core on substrate half-space, cladding above.

    With ``antialias`` the one-cell boundary ring is linearly area-weighted;
    default off keeps every cell at exactly one of the three declared indices.
    """
    if not 0.0 <= z <= geom.length:
        raise ValueError(f"z={z} outside taper [0, {geom.length}]")
    w = geom.width_at(z)
    h = geom.height_at(z)
    xc, yc = grid.meshgrid()
    n = np.full(grid.shape, geom.n_clad, dtype=float)
    n[yc < 0.0] = geom.n_substrate
    if antialias:
        cov = _axis_coverage(xc, 0.5 * grid.dx, -0.5 * w, 0.5 * w) * _axis_coverage(
            yc, 0.5 * grid.dy, 0.0, h
        )
        n = n * (1.0 - cov) + geom.n_core * cov
    else:
        core = (np.abs(xc) < 0.5 * w) & (yc >= 0.0) & (yc < h)
        n[core] = geom.n_core
    return IndexMap(grid=grid, z=z, n=n)


def fiber_index_map(
    core_diameter: float,
    n1: float,
    n2: float,
    grid: Grid2D,
    center: tuple[float, float] = (0.0, 0.0),
    antialias: bool = False,
) -> IndexMap:
    """Circular step-index profile: n1 inside radius core_diameter/2, n2 outside.

    Cells are assigned by the center-of-cell rule; with ``antialias`` boundary
    cells are area-weighted by 4x4 subsampling.
    """
    if core_diameter <= 0.0:
        raise ValueError("core_diameter must be positive")
    if n1 <= n2:
        raise ValueError(f"fiber requires n1 > n2, got n1={n1}, n2={n2}")
    radius = 0.5 * core_diameter
    xc, yc = grid.meshgrid()
    dx2 = (xc - center[0]) ** 2
    dy2 = (yc - center[1]) ** 2
    if antialias:
        sub = np.linspace(-0.5, 0.5, 4, endpoint=False) + 0.125
        inside = np.zeros(grid.shape, dtype=float)
        for ox in sub:
            for oy in sub:
                rx = xc + ox * grid.dx - center[0]
                ry = yc + oy * grid.dy - center[1]
                inside += (rx**2 + ry**2 <= radius**2).astype(float)
        cov = inside / (len(sub) ** 2)
        n = n2 * (1.0 - cov) + n1 * cov
    else:
        n = np.where(dx2 + dy2 <= radius**2, n1, n2)
    return IndexMap(grid=grid, z=0.0, n=n)
