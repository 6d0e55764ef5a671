"""Launch fields and reference modes: elliptical Gaussian source, analytic LP01
fiber mode, and a finite-difference eigenmode solver for arbitrary cross-sections."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import j0, j1, k0 as besk0, k1 as besk1

from .geometry import Grid2D, IndexMap
from .operators import SCALAR, _check_polarization, axis_coeffs, build_transverse_operator

LP01_CUTOFF_V = 2.405  # first zero of J0; single-mode limit of a step-index fiber


@dataclass(frozen=True)
class FieldSlice:
    """Complex transverse field E(x, y) on a grid, with wavelength and polarization tag."""

    grid: Grid2D
    E: np.ndarray
    wavelength: float
    polarization: str = SCALAR

    def __post_init__(self) -> None:
        _check_polarization(self.polarization)
        if self.E.shape != self.grid.shape:
            raise ValueError(f"field shape {self.E.shape} != grid shape {self.grid.shape}")
        if self.wavelength <= 0.0:
            raise ValueError("wavelength must be positive")

    def power(self) -> float:
        """Total power: integral of |E|^2 over the grid."""
        return float(np.sum(np.abs(self.E) ** 2)) * self.grid.cell_area

    def normalized(self) -> "FieldSlice":
        """Unit-power copy; rejects the zero field."""
        p = self.power()
        if p <= 0.0:
            raise ValueError("cannot normalize a zero-power field")
        return replace(self, E=self.E / math.sqrt(p))


@dataclass(frozen=True)
class ModeProfile:
    """Guided-mode eigenpair: unit-power field and its effective index."""

    field: FieldSlice
    n_eff: float


def elliptical_gaussian_source(
    wx: float,
    wy: float,
    grid: Grid2D,
    wavelength: float,
    polarization: str = SCALAR,
    center: tuple[float, float] = (0.0, 0.0),
) -> FieldSlice:
    """Unit-power elliptical Gaussian E = exp(-x^2/wx^2 - y^2/wy^2) about ``center``.

    ``wx``/``wy`` are 1/e field radii; waists under 2 grid cells are rejected
    as unresolvable.
    """
    if wx <= 0.0 or wy <= 0.0:
        raise ValueError("waists must be positive")
    if wx < 2.0 * grid.dx or wy < 2.0 * grid.dy:
        raise ValueError(
            f"waist ({wx}, {wy}) smaller than 2 grid cells ({grid.dx}, {grid.dy}); refine the grid"
        )
    xc, yc = grid.meshgrid()
    envelope = np.exp(-((xc - center[0]) / wx) ** 2 - ((yc - center[1]) / wy) ** 2)
    field = FieldSlice(grid=grid, E=envelope.astype(complex), wavelength=wavelength,
                       polarization=polarization)
    return field.normalized()


def fiber_v_parameter(core_diameter: float, n1: float, n2: float, wavelength: float) -> float:
    """Normalized frequency V = (pi d / lambda) * sqrt(n1^2 - n2^2)."""
    return math.pi * core_diameter / wavelength * math.sqrt(n1 * n1 - n2 * n2)


def _lp01_dispersion_root(v: float) -> float:
    """Solve u*J1(u)/J0(u) = w*K1(w)/K0(w), w = sqrt(V^2 - u^2), by bisection."""

    def f(u: float) -> float:
        w = math.sqrt(max(v * v - u * u, 1e-300))
        return u * j1(u) / j0(u) - w * besk1(w) / besk0(w)

    lo, hi = 1e-9, min(v, LP01_CUTOFF_V) - 1e-9
    flo, fhi = f(lo), f(hi)
    if not (flo < 0.0 < fhi):
        raise ValueError(f"cutoff: no LP01 dispersion root bracketed for V={v:.4f}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fiber_lp01_analytic(
    core_diameter: float,
    n1: float,
    n2: float,
    wavelength: float,
    grid: Grid2D,
    center: tuple[float, float] = (0.0, 0.0),
    polarization: str = SCALAR,
) -> ModeProfile:
    """Analytic LP01 mode of a single-mode step-index fiber, sampled on ``grid``.

    J0 in the core, K0 in the cladding, continuous at the core radius; n_eff
    solves the LP01 dispersion relation. Raises for multimode fibers (V > 2.405).
    """
    if n1 <= n2:
        raise ValueError(f"fiber requires n1 > n2, got n1={n1}, n2={n2}")
    v = fiber_v_parameter(core_diameter, n1, n2, wavelength)
    if v > LP01_CUTOFF_V:
        raise ValueError(f"multimode fiber: V={v:.4f} > {LP01_CUTOFF_V}")
    u = _lp01_dispersion_root(v)
    w = math.sqrt(v * v - u * u)
    a = 0.5 * core_diameter
    k0 = 2.0 * math.pi / wavelength
    n_eff = math.sqrt(n1 * n1 - (u / (k0 * a)) ** 2)

    xc, yc = grid.meshgrid()
    r = np.hypot(xc - center[0], yc - center[1])
    core = r <= a
    psi = np.where(core, j0(u * np.minimum(r, a) / a) / j0(u),
                   besk0(w * np.maximum(r, a) / a) / besk0(w))
    field = FieldSlice(grid=grid, E=psi.astype(complex), wavelength=wavelength,
                       polarization=polarization).normalized()
    return ModeProfile(field=field, n_eff=n_eff)


def _border_max(n: np.ndarray) -> float:
    return float(max(n[0, :].max(), n[-1, :].max(), n[:, 0].max(), n[:, -1].max()))


def _fix_phase(psi: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the field peak is real-positive."""
    peak = psi.flat[np.argmax(np.abs(psi))]
    if peak == 0.0:
        return psi
    return psi * (abs(peak) / peak)


def _inverse_iteration(
    A: sp.spmatrix,
    sigma: float,
    v0: np.ndarray,
    project=None,
    tol: float = 1e-12,
    max_iter: int = 500,
) -> tuple[np.ndarray, float]:
    """Shifted inverse power iteration for the eigenvalue of A nearest ``sigma``.

    ``project`` (if given) re-projects each iterate off already-found modes.
    One Rayleigh-quotient shift refresh is applied if convergence is slow.
    Raises after ``max_iter`` iterations without convergence.
    """
    n = A.shape[0]
    ident = sp.identity(n, format="csc")
    lu = spla.splu((A - sigma * ident).tocsc())
    v = v0 if project is None else project(v0)
    v = v / np.linalg.norm(v)
    theta_old = None
    refreshed = False
    for it in range(max_iter):
        v = lu.solve(v)
        if project is not None:
            v = project(v)
        v /= np.linalg.norm(v)
        theta = float(np.real(v @ (A @ v)))
        if theta_old is not None:
            change = abs(theta - theta_old) / max(abs(theta), 1e-30)
            if change < tol:
                return v, theta
            if not refreshed and it >= 12 and change > 1e-9:
                # slow linear convergence: refresh the shift at the current estimate
                lu = spla.splu((A - (theta + 1e-10 * abs(theta)) * ident).tocsc())
                refreshed = True
        theta_old = theta
    raise RuntimeError(f"mode solve not converged after {max_iter} iterations")


def _initial_vector(index: IndexMap) -> np.ndarray:
    """Deterministic start vector: Gaussian bump at the high-index centroid."""
    xc, yc = index.grid.meshgrid()
    weight = index.n**2 - index.n.min() ** 2
    total = weight.sum()
    if total > 0.0:
        cx = float((weight * xc).sum() / total)
        cy = float((weight * yc).sum() / total)
    else:
        cx = float(xc.mean())
        cy = float(yc.mean())
    r0 = 3.0  # um; broad enough to overlap any guided mode
    return np.exp(-((xc - cx) ** 2 + (yc - cy) ** 2) / r0**2).ravel()


def solve_modes_fd(
    index: IndexMap,
    wavelength: float,
    polarization: str = SCALAR,
    n_guess: float | None = None,
    n_modes: int = 1,
) -> list[ModeProfile]:
    """Leading guided modes of a cross-section by shifted inverse iteration.

    Modes beyond the first are obtained by deflation (valid because the
    discretized operator is symmetric for every polarization). Fields are unit
    power with a real-positive peak. Raises "no guided mode" when the best
    eigenvalue falls at or below the boundary index light line.
    """
    pol = _check_polarization(polarization)
    n_boundary = _border_max(index.n)
    if float(index.n.max()) <= n_boundary:
        raise RuntimeError("no guided mode: index map has no guiding region above the boundary index")

    k0 = 2.0 * math.pi / wavelength
    if n_guess is None:
        n_guess = float(index.n.max())
    sigma = (n_guess * k0) ** 2
    A = build_transverse_operator(index, wavelength, pol)

    modes: list[ModeProfile] = []
    basis: list[np.ndarray] = []
    v0 = _initial_vector(index)
    for _ in range(n_modes):
        def project_out(v: np.ndarray) -> np.ndarray:
            for b in basis:
                v = v - (b @ v) * b
            return v

        v, theta = _inverse_iteration(A, sigma, v0, project=project_out)
        if theta <= 0.0:
            raise RuntimeError("no guided mode: negative propagation constant")
        n_eff = math.sqrt(theta) / k0
        if n_eff <= n_boundary:
            raise RuntimeError(
                f"no guided mode: n_eff={n_eff:.6f} at or below boundary index {n_boundary:.6f}"
            )
        basis.append(v / np.linalg.norm(v))
        psi = _fix_phase(v.reshape(index.grid.shape).astype(complex))
        field = FieldSlice(grid=index.grid, E=psi, wavelength=wavelength,
                           polarization=pol).normalized()
        modes.append(ModeProfile(field=field, n_eff=n_eff))
        # seed the next mode with an odd perturbation of the start vector
        xc, _ = index.grid.meshgrid()
        v0 = (_initial_vector(index).reshape(index.grid.shape) * (xc - xc.mean())).ravel()
    return modes


def solve_mode_fd(
    index: IndexMap,
    wavelength: float,
    polarization: str = SCALAR,
    n_guess: float | None = None,
) -> ModeProfile:
    """Fundamental guided mode of a cross-section (largest effective index)."""
    return solve_modes_fd(index, wavelength, polarization, n_guess, n_modes=1)[0]


def solve_slab_mode_fd(
    n_profile: np.ndarray,
    dx: float,
    wavelength: float,
    polarization: str = SCALAR,
    n_guess: float | None = None,
) -> tuple[np.ndarray, float]:
    """Fundamental mode of a 1-D slab index profile (true 1-D operator).

    Returns (field, n_eff) with the field normalized to unit 1-D power. The 2-D
    solver's Dirichlet walls would add a confinement shift; this path reduces the
    operator to one dimension for slab benchmarks.
    """
    pol = _check_polarization(polarization)
    n_profile = np.asarray(n_profile, dtype=float)
    if n_profile.ndim != 1 or n_profile.size < 3:
        raise ValueError("n_profile must be a 1-D array with at least 3 samples")
    k0 = 2.0 * math.pi / wavelength
    n_boundary = max(n_profile[0], n_profile[-1])
    if n_profile.max() <= n_boundary:
        raise RuntimeError("no guided mode: slab profile has no guiding region")

    lo, di, up = axis_coeffs(n_profile[None, :], dx, axis=1, polarization=pol)
    lo, di, up = (np.asarray(a).reshape(-1) for a in (lo, di, up))
    m = n_profile.size
    A = sp.diags(
        [lo[1:], di + (k0 * n_profile) ** 2, up[:-1]], offsets=[-1, 0, 1], format="csr"
    )
    if n_guess is None:
        n_guess = float(n_profile.max())
    x = dx * np.arange(m)
    xc = float((x * (n_profile**2 - n_profile.min() ** 2)).sum()
               / max((n_profile**2 - n_profile.min() ** 2).sum(), 1e-300))
    v0 = np.exp(-((x - xc) ** 2) / 9.0)
    v, theta = _inverse_iteration(A, (n_guess * k0) ** 2, v0)
    if theta <= 0.0:
        raise RuntimeError("no guided mode: negative propagation constant")
    n_eff = math.sqrt(theta) / k0
    if n_eff <= n_boundary:
        raise RuntimeError(f"no guided mode: n_eff={n_eff:.6f} below boundary index")
    psi = _fix_phase(v.astype(complex))
    psi /= math.sqrt(float(np.sum(np.abs(psi) ** 2)) * dx)
    return psi, n_eff
