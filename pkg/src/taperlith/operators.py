"""Transverse finite-difference operators shared by the mode solver and the propagator.

The semi-vectorial stencils apply permittivity-weighted interface corrections on
the second difference along the polarization axis (x for TE, y for TM); the
other axis and the scalar case use the standard three-point stencil.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded

from .geometry import IndexMap

SCALAR = "scalar"
TE = "te"
TM = "tm"
POLARIZATIONS = (SCALAR, TE, TM)


def _check_polarization(polarization: str) -> str:
    pol = polarization.lower()
    if pol not in POLARIZATIONS:
        raise ValueError(f"polarization must be one of {POLARIZATIONS}, got {polarization!r}")
    return pol


def _corrected_coeffs(eps: np.ndarray, d: float):
    """Interface-corrected tridiagonal coefficients along the last axis of ``eps``.

    Enforces continuity of the normal flux (eps * E) across index steps; reduces
    to (1, -2, 1)/d^2 in homogeneous regions. The off-diagonal pair of each link
    is symmetrized by its geometric mean (a diagonal similarity transform that
    leaves the spectrum untouched), so the operator is symmetric and the
    Crank-Nicolson factors built from it stay unitary and reciprocal.
    Returns (lower, diag, upper).
    """
    ep = eps
    ee = np.concatenate([eps[..., 1:], eps[..., -1:]], axis=-1)
    ew = np.concatenate([eps[..., :1], eps[..., :-1]], axis=-1)
    denom = (ep + ee) * (ep + 3.0 * ew) + (ep + ew) * (ep + 3.0 * ee)
    upper = 8.0 * ee * (ep + ew) / (d * d * denom)
    lower = 8.0 * ew * (ep + ee) / (d * d * denom)
    diag = -(upper * ep / ee + lower * ep / ew)
    up_sym = np.empty_like(upper)
    up_sym[..., :-1] = np.sqrt(upper[..., :-1] * lower[..., 1:])
    up_sym[..., -1] = upper[..., -1]
    lo_sym = np.empty_like(lower)
    lo_sym[..., 1:] = up_sym[..., :-1]
    lo_sym[..., 0] = lower[..., 0]
    return lo_sym, diag, up_sym


def axis_coeffs(
    n: np.ndarray,
    d: float,
    axis: int,
    polarization: str,
    stretch: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tridiagonal (lower, diag, upper) of the second-difference operator along ``axis``.

    ``n`` is the index array shaped (ny, nx); axis=1 differentiates along x,
    axis=0 along y. The corrected stencil is used when the polarization axis
    matches (TE -> x, TM -> y). ``stretch`` supplies complex coordinate-stretch
    factors (centers of length m, faces of length m+1) for an absorbing layer;
    both are 1 in the interior. Coefficients come back with the system axis
    last, shaped (n_batch, n_along), or 1-D (n_along,) when row-independent.
    """
    pol = _check_polarization(polarization)
    corrected = (pol == TE and axis == 1) or (pol == TM and axis == 0)
    work = n if axis == 1 else n.T
    n_along = work.shape[-1]
    if stretch is None:
        f_lo = f_up = 1.0
    else:
        s_center, s_face = stretch
        f_lo = 1.0 / (s_center * s_face[:-1])
        f_up = 1.0 / (s_center * s_face[1:])
    if not corrected:
        lower = np.full(n_along, 1.0 / (d * d)) * f_lo
        upper = np.full(n_along, 1.0 / (d * d)) * f_up
        diag = -(lower + upper)
        return lower, diag, upper
    lower, diag, upper = _corrected_coeffs(work.astype(float) ** 2, d)
    lower_s = lower * f_lo
    upper_s = upper * f_up
    # stretch acts where eps is uniform (PML never overlaps the core), so the
    # diagonal correction reduces to the standard stretched form there
    diag = diag - (upper_s - upper) - (lower_s - lower)
    return lower_s, diag, upper_s


def build_transverse_operator(index: IndexMap, wavelength: float, polarization: str) -> sp.csr_matrix:
    """Sparse transverse Helmholtz operator H = Dxx + Dyy + k0^2 n^2 with Dirichlet walls.

    Eigenvalues of H are beta^2; the guided fundamental is the largest.
    """
    pol = _check_polarization(polarization)
    grid = index.grid
    ny, nx = grid.shape
    k0 = 2.0 * np.pi / wavelength

    lo_x, di_x, up_x = axis_coeffs(index.n, grid.dx, axis=1, polarization=pol)
    lo_y, di_y, up_y = axis_coeffs(index.n, grid.dy, axis=0, polarization=pol)
    lo_x, di_x, up_x = (np.broadcast_to(a, (ny, nx)) for a in (lo_x, di_x, up_x))
    # y coefficients come back with y last (shape (nx, ny)); transpose to (ny, nx)
    lo_y, di_y, up_y = (np.broadcast_to(a, (nx, ny)).T for a in (lo_y, di_y, up_y))

    idx = np.arange(ny * nx).reshape(ny, nx)
    diag = di_x + di_y + (k0 * index.n) ** 2

    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [diag.ravel()]
    # x neighbors (Dirichlet: drop links across the wall)
    rows.append(idx[:, 1:].ravel())
    cols.append(idx[:, :-1].ravel())
    vals.append(np.asarray(lo_x)[:, 1:].ravel())
    rows.append(idx[:, :-1].ravel())
    cols.append(idx[:, 1:].ravel())
    vals.append(np.asarray(up_x)[:, :-1].ravel())
    # y neighbors
    rows.append(idx[1:, :].ravel())
    cols.append(idx[:-1, :].ravel())
    vals.append(np.asarray(lo_y)[1:, :].ravel())
    rows.append(idx[:-1, :].ravel())
    cols.append(idx[1:, :].ravel())
    vals.append(np.asarray(up_y)[:-1, :].ravel())

    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ny * nx, ny * nx),
    ).tocsr()


def solve_tridiagonal(lower, diag, upper, rhs: np.ndarray) -> np.ndarray:
    """Solve tridiagonal systems stacked on the first axis; system axis is last.

    Coefficient arrays may be 1-D (one matrix shared by every right-hand side,
    solved via LAPACK) or 2-D matching ``rhs`` (batched Thomas elimination).
    """
    if rhs.ndim != 2:
        raise ValueError("rhs must be 2-D (batch, n)")
    m, nn = rhs.shape
    if np.ndim(diag) == 1:
        ab = np.zeros((3, nn), dtype=complex)
        ab[0, 1:] = upper[:-1]
        ab[1, :] = diag
        ab[2, :-1] = lower[1:]
        return solve_banded((1, 1), ab, rhs.T, overwrite_ab=True).T

    cp = np.empty((m, nn), dtype=complex)
    xp = np.empty((m, nn), dtype=complex)
    cp[:, 0] = upper[:, 0] / diag[:, 0]
    xp[:, 0] = rhs[:, 0] / diag[:, 0]
    for i in range(1, nn):
        denom = diag[:, i] - lower[:, i] * cp[:, i - 1]
        cp[:, i] = upper[:, i] / denom
        xp[:, i] = (rhs[:, i] - lower[:, i] * xp[:, i - 1]) / denom
    out = np.empty((m, nn), dtype=complex)
    out[:, -1] = xp[:, -1]
    for i in range(nn - 2, -1, -1):
        out[:, i] = xp[:, i] - cp[:, i] * out[:, i + 1]
    return out


def apply_tridiagonal(lower, diag, upper, vec: np.ndarray) -> np.ndarray:
    """Multiply stacked vectors by tridiagonal matrices (system axis last, Dirichlet walls)."""
    lower = np.broadcast_to(lower, vec.shape)
    diag = np.broadcast_to(diag, vec.shape)
    upper = np.broadcast_to(upper, vec.shape)
    out = diag * vec
    out[:, :-1] = out[:, :-1] + upper[:, :-1] * vec[:, 1:]
    out[:, 1:] = out[:, 1:] + lower[:, 1:] * vec[:, :-1]
    return out
