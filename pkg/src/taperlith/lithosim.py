"""Near-field aerial image of a tilted proximity mask, threshold development of
negative resist, and classification of the developed ridge profile."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .geometry import ExposureSetup, Grid2D, MaskPattern, local_gap
from .modes import FieldSlice


@dataclass(frozen=True)
class IntensityMap:
    """Aerial-image intensity on a grid, normalized so the unobstructed clear field is 1."""

    grid: Grid2D
    I: np.ndarray

    def __post_init__(self) -> None:
        if self.I.shape != self.grid.shape:
            raise ValueError(f"intensity shape {self.I.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.I)):
            raise ValueError("intensity map contains non-finite values")
        if np.any(self.I < 0.0):
            raise ValueError("intensity map contains negative values")


@dataclass(frozen=True)
class ResistProfile:
    """Developed resist height map h(x, y) in micrometers."""

    grid: Grid2D
    h: np.ndarray

    def __post_init__(self) -> None:
        if self.h.shape != self.grid.shape:
            raise ValueError(f"height shape {self.h.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.h)):
            raise ValueError("height map contains non-finite values")
        if np.any(self.h < 0.0):
            raise ValueError("height map contains negative values")


class ProfileClass(enum.Enum):
    """Developed-ridge taxonomy: saturated flat top, tapered hemi-frustum, or washed out."""

    FLAT_TOP = "FlatTop"
    HEMI_FRUSTUM = "HemiFrustum"
    BLURRED = "Blurred"


def angular_spectrum_propagate(
    field: FieldSlice, distance: float, wavelength: float | None = None
) -> FieldSlice:
    """Propagate a scalar field through free space by the exact transfer function.

    H(fx, fy) = exp(i 2 pi d sqrt(1/lambda^2 - fx^2 - fy^2)); evanescent
    components decay. Rejects negative distances and grids too coarse to sample
    the propagating band (dx or dy > lambda/2).
    """
    if distance < 0.0:
        raise ValueError(f"propagation distance must be >= 0, got {distance}")
    lam = field.wavelength if wavelength is None else wavelength
    grid = field.grid
    if grid.dx > 0.5 * lam or grid.dy > 0.5 * lam:
        raise ValueError(
            f"grid spacing ({grid.dx}, {grid.dy}) too coarse for wavelength {lam}; "
            "need dx, dy <= lambda/2"
        )
    fx = sfft.fftfreq(grid.nx, grid.dx)
    fy = sfft.fftfreq(grid.ny, grid.dy)
    arg = 1.0 / lam**2 - fx[None, :] ** 2 - fy[:, None] ** 2
    kz = 2.0 * math.pi * np.sqrt(np.abs(arg))
    transfer = np.where(arg >= 0.0, np.exp(1j * kz * distance), np.exp(-kz * distance))
    spectrum = sfft.fft2(field.E)
    out = sfft.ifft2(spectrum * transfer)
    return FieldSlice(grid=grid, E=out, wavelength=lam, polarization=field.polarization)


def _cosine_taper(n: int, ramp: int) -> np.ndarray:
    """Window of ones with raised-cosine ramps of ``ramp`` samples at both ends."""
    w = np.ones(n)
    if ramp > 0:
        t = 0.5 * (1.0 - np.cos(np.pi * (np.arange(ramp) + 0.5) / ramp))
        w[:ramp] = t
        w[-ramp:] = t[::-1]
    return w


def aerial_image(
    mask: MaskPattern,
    setup: ExposureSetup,
    grid: Grid2D,
    strip: float = 10.0,
) -> IntensityMap:
    """Aerial image of the tilted mask at the resist plane, strip by strip.

    The tilted mask is treated as locally parallel on axial strips of height
    ``strip``; each strip is propagated by its local gap. Grid y coordinates are
    resist-plane positions; the pattern at arclength s lands at y = s cos(tilt)
    and sees gap g = gap0 + s sin(tilt). The mask sits in a dark surround; the
    transform window is padded and softly apodized to suppress wraparound.
    """
    cos_t = math.cos(math.radians(setup.tilt_deg))
    lam = setup.wavelength
    g_max = float(local_gap(setup, mask.altitude))

    # dark x padding sized for the diffraction spill, 5-smooth FFT length
    spill = max(2.0 * mask.w_long, 3.0 * math.sqrt(lam * max(g_max, lam)) + 8.0)
    pad_cells = int(math.ceil(spill / grid.dx))
    nx_pad = sfft.next_fast_len(grid.nx + 2 * pad_cells)
    pad_lo = (nx_pad - grid.nx) // 2
    x_pad = grid.x0 + grid.dx * (np.arange(nx_pad) - pad_lo)

    intensity = np.empty(grid.shape, dtype=float)

    if setup.tilt_deg == 0.0:
        strips = [(0, grid.ny)]
    else:
        rows_per_strip = max(1, int(round(strip / grid.dy)))
        strips = [(j, min(j + rows_per_strip, grid.ny)) for j in range(0, grid.ny, rows_per_strip)]

    for j0, j1 in strips:
        y_mid = grid.y0 + grid.dy * 0.5 * (j0 + j1 - 1)
        gap = float(local_gap(setup, y_mid / cos_t))
        margin = 3.0 * math.sqrt(lam * max(gap, lam)) + 8.0
        m_rows = int(math.ceil(margin / grid.dy))
        ny_win = sfft.next_fast_len((j1 - j0) + 2 * m_rows)
        w_lo = (ny_win - (j1 - j0)) // 2
        y_win = grid.y0 + grid.dy * (np.arange(ny_win) - w_lo + j0)

        trans = mask.transmission(x_pad[None, :], (y_win / cos_t)[:, None])
        ramp = max(4, m_rows // 3)
        windowed = trans * _cosine_taper(ny_win, ramp)[:, None] * _cosine_taper(
            nx_pad, max(4, pad_cells // 3)
        )[None, :]
        win_grid = Grid2D(nx=nx_pad, ny=ny_win, dx=grid.dx, dy=grid.dy,
                          x0=x_pad[0], y0=y_win[0])
        out = angular_spectrum_propagate(
            FieldSlice(grid=win_grid, E=windowed.astype(complex), wavelength=lam), gap
        )
        block = np.abs(out.E[w_lo : w_lo + (j1 - j0), pad_lo : pad_lo + grid.nx]) ** 2
        intensity[j0:j1, :] = block

    return IntensityMap(grid=grid, I=intensity)


def develop(intensity: IntensityMap, setup: ExposureSetup, exposure_time: float = 1.0) -> ResistProfile:
    """Negative-resist linear threshold development of an exposure dose.

    Dose E = I * exposure_time (clear-field units); remaining height is
    t * clamp((E - E_th) / (E_cl - E_th), 0, 1).
    """
    if exposure_time <= 0.0:
        raise ValueError(f"exposure_time must be positive, got {exposure_time}")
    dose = intensity.I * exposure_time
    frac = (dose - setup.dose_threshold) / (setup.dose_clear - setup.dose_threshold)
    h = setup.resist_thickness * np.clip(frac, 0.0, 1.0)
    return ResistProfile(grid=intensity.grid, h=h)


def _ridge_support(crest: np.ndarray, floor: float) -> tuple[int, int]:
    """Contiguous index run around the crest maximum where crest exceeds ``floor``."""
    peak = int(np.argmax(crest))
    above = crest > floor
    lo = peak
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = peak
    while hi < crest.size - 1 and above[hi + 1]:
        hi += 1
    return lo, hi + 1


def _central_slice(lo: int, hi: int, fraction: float = 0.8) -> slice:
    span = hi - lo
    trim = int(round(0.5 * (1.0 - fraction) * span))
    return slice(lo + trim, hi - trim)


def _crossing(row: np.ndarray, level: float, dx: float, x0: float, from_left: bool) -> float:
    """Interpolated coordinate of the first crossing of ``level`` scanning inward."""
    above = row >= level
    if from_left:
        i = int(np.argmax(above))
        if i == 0:
            return x0
        f = (level - row[i - 1]) / max(row[i] - row[i - 1], 1e-300)
        return x0 + dx * (i - 1 + f)
    j = row.size - 1 - int(np.argmax(above[::-1]))
    if j == row.size - 1:
        return x0 + dx * j
    f = (level - row[j + 1]) / max(row[j] - row[j + 1], 1e-300)
    return x0 + dx * (j + 1 - f)


def _edge_width(row: np.ndarray, crest: float, dx: float, x0: float) -> float:
    """Mean 10%-90% lateral transition width of the two ridge flanks."""
    lo_level, hi_level = 0.1 * crest, 0.9 * crest
    left = _crossing(row, hi_level, dx, x0, True) - _crossing(row, lo_level, dx, x0, True)
    right = _crossing(row, lo_level, dx, x0, False) - _crossing(row, hi_level, dx, x0, False)
    return 0.5 * (left + right)


def classify_profile(
    profile: ResistProfile,
    setup: ExposureSetup,
    edge_bound: float,
    axis: int = 0,
    flat_frac: float = 0.05,
    blur_frac: float = 0.5,
    plateau_min: float = 2.0,
    noise_floor: float = 1e-6,
) -> ProfileClass:
    """Classify a single-ridge profile as FlatTop, HemiFrustum, or Blurred.

    FlatTop: crest height varies by less than ``flat_frac`` of the resist
    thickness over the central 80% of the ridge and a crest plateau at least
    ``plateau_min`` wide exists. Blurred: representative ridge height (median
    crest) below ``blur_frac`` of the thickness, or the median 10-90 edge width
    exceeds ``edge_bound`` (feature no longer laterally resolved). Everything
    else is a hemi-frustum. All measures use the central 80% of the ridge,
    away from the end-edge diffraction lobes, whose localized overshoot makes
    the literal peak non-monotone in gap.
    """
    h = profile.h if axis == 0 else profile.h.T
    dx = profile.grid.dx if axis == 0 else profile.grid.dy
    x0 = profile.grid.x0 if axis == 0 else profile.grid.y0
    crest = h.max(axis=1)
    h_peak = float(crest.max())
    if h_peak < noise_floor:
        raise ValueError("no ridge found: peak height below the noise floor")

    t = setup.resist_thickness
    lo, hi = _ridge_support(crest, 0.05 * h_peak)
    central = _central_slice(lo, hi)

    if float(np.median(crest[central])) < blur_frac * t:
        return ProfileClass.BLURRED
    rows = range(central.start, central.stop)
    widths = np.array([_edge_width(h[j], crest[j], dx, x0) for j in rows])
    if widths.size and float(np.median(widths)) > edge_bound:
        return ProfileClass.BLURRED

    variation = float(crest[central].max() - crest[central].min())
    plateau = np.array(
        [dx * np.count_nonzero(h[j] >= crest[j] - flat_frac * t) for j in rows]
    )
    if variation < flat_frac * t and plateau.size and float(np.median(plateau)) >= plateau_min:
        return ProfileClass.FLAT_TOP
    return ProfileClass.HEMI_FRUSTUM


def vertical_taper_angle(
    profile: ResistProfile, axis: int = 0, noise_floor: float = 1e-6
) -> float:
    """Signed vertical taper angle of the ridge crest, in degrees.

    Least-squares line fit of crest height versus axial position over the
    central 80% of the ridge; positive when the crest rises along +axis.
    Raises "degenerate fit" for ridges shorter than 10 grid cells.
    """
    h = profile.h if axis == 0 else profile.h.T
    d_ax = profile.grid.dy if axis == 0 else profile.grid.dx
    ax0 = profile.grid.y0 if axis == 0 else profile.grid.x0
    crest = h.max(axis=1)
    h_peak = float(crest.max())
    if h_peak < noise_floor:
        raise ValueError("no ridge found: peak height below the noise floor")
    lo, hi = _ridge_support(crest, 0.05 * h_peak)
    central = _central_slice(lo, hi)
    if central.stop - central.start < 10:
        raise ValueError("degenerate fit: ridge shorter than 10 grid cells")
    pos = ax0 + d_ax * np.arange(central.start, central.stop)
    slope = np.polyfit(pos, crest[central], 1)[0]
    return math.degrees(math.atan(slope))


def make_litho_grid(
    mask: MaskPattern,
    setup: ExposureSetup,
    dx: float = 0.2,
    dy: float = 0.2,
    y_margin: float = 10.0,
) -> Grid2D:
    """Default resist-plane grid: ridge plus lateral room for the diffraction spill."""
    cos_t = math.cos(math.radians(setup.tilt_deg))
    g_max = float(local_gap(setup, mask.altitude))
    half_x = 0.5 * mask.w_long + max(1.5 * mask.w_long, 3.0 * math.sqrt(setup.wavelength * max(g_max, 1.0)))
    nx = 2 * int(math.ceil(half_x / dx)) + 1
    y_lo = -y_margin
    y_hi = mask.altitude * cos_t + y_margin
    ny = int(math.ceil((y_hi - y_lo) / dy)) + 1
    return Grid2D(nx=nx, ny=ny, dx=dx, dy=dy, x0=-0.5 * (nx - 1) * dx, y0=y_lo)


def simulate_print(
    mask: MaskPattern,
    setup: ExposureSetup,
    grid: Grid2D | None = None,
    dose_scale: float = 1.0,
    strip: float = 10.0,
) -> ResistProfile:
    """Full print: aerial image at the local gap, then threshold development."""
    if grid is None:
        grid = make_litho_grid(mask, setup)
    image = aerial_image(mask, setup, grid, strip=strip)
    return develop(image, setup, exposure_time=dose_scale)
