"""Convective trilinear form and the projected advection operator.

``trilinear(u, v, w)`` is the quadrature of sum_ij u^i (D_i v^j) w^j over
the torus; ``advection(u, v)`` is the Leray-projected, dealiased transport
term P((u . grad) v).  Products are formed in physical space; with all
inputs band-limited to the two-thirds cutoff the quadrature of the cubic
integrand is alias-free, so the cancellation and antisymmetry identities
hold to round-off.

Sign convention: the solver writes the drift as ``-A u - B(u, u)`` with
``B(u, v) = advection(u, v) = P((u . grad) v)``.
"""

from __future__ import annotations

import numpy as np

from .fields import VOLUME, SpectralField, expand_half, from_physical
from .paths import FieldPath, node_lp_norms, rect_integral
from .spectral import leray_project_coeffs, vprime_norm

_CHUNK = 64


def _check_grids(*fields) -> None:
    first = fields[0].grid
    for f in fields[1:]:
        if f.grid != first:
            raise ValueError("all fields must share one grid")


def trilinear(u: SpectralField, v: SpectralField, w: SpectralField) -> float:
    """Convective form b(u, v, w) = int (u . grad) v . w dx by quadrature.

    Exact for dealiased band-limited inputs.  Antisymmetric in (v, w) and
    annihilated by v = w whenever u is divergence-free.
    """
    _check_grids(u, v, w)
    g = u.grid
    n = g.n
    scale = n * n
    u_phys = np.fft.ifft2(u.coeffs, axes=(-2, -1)).real * scale
    w_phys = np.fft.ifft2(w.coeffs, axes=(-2, -1)).real * scale
    dv_dx = np.fft.ifft2(1j * g.kx * v.coeffs, axes=(-2, -1)).real * scale
    dv_dy = np.fft.ifft2(1j * g.ky * v.coeffs, axes=(-2, -1)).real * scale
    integrand = (u_phys[0] * dv_dx + u_phys[1] * dv_dy) * w_phys
    return float(VOLUME / (n * n) * integrand.sum())


def advection_path_coeffs(
    grid, coeffs: np.ndarray, negate: bool = False
) -> np.ndarray:
    """Batched P((w . grad) w) for coefficient stacks of shape (m, 2, n, n).

    Fields are real, so the transforms run on the half spectrum
    (`irfft2`/`rfft2`); the raw inverse transform is 1/n^2 of the physical
    samples, so the quadratic product needs a single n^2 rescaling after
    the forward transform.  ``negate`` folds a sign flip into the
    rescaling (the drift uses -B).
    """
    n = grid.n
    h = grid.half
    out = np.empty_like(coeffs)
    rescale = grid.dealias_mask_h * ((-1.0 if negate else 1.0) * n * n)
    for lo in range(0, coeffs.shape[0], _CHUNK):
        c = coeffs[lo : lo + _CHUNK, :, :, :h]
        m = c.shape[0]
        stack = np.empty((m, 6, n, h), np.complex128)
        stack[:, 0:2] = c
        np.multiply(c, grid.ikx_h, out=stack[:, 2:4])
        np.multiply(c, grid.iky_h, out=stack[:, 4:6])
        phys = np.fft.irfft2(stack, s=(n, n), axes=(-2, -1))
        conv = phys[:, 0:1] * phys[:, 2:4]
        conv += phys[:, 1:2] * phys[:, 4:6]
        c_half = np.fft.rfft2(conv, axes=(-2, -1))
        c_half *= rescale
        _leray_project_half(grid, c_half)
        out[lo : lo + m] = expand_half(grid, c_half)
    return out


def _leray_project_half(grid, c_half: np.ndarray) -> None:
    """In-place Leray projection of half-spectrum stacks (..., 2, n, n/2+1)."""
    c1 = c_half[..., 0, :, :]
    c2 = c_half[..., 1, :, :]
    kdotc = grid.kx_h * c1
    kdotc += grid.ky_h * c2
    kdotc *= grid.ksq_inv_h
    c1 -= grid.kx_h * kdotc
    c2 -= grid.ky_h * kdotc
    c_half[..., :, 0, 0] = 0.0


def advection(u: SpectralField, v: SpectralField) -> SpectralField:
    """Projected transport term B(u, v) = P((u . grad) v), dealiased."""
    _check_grids(u, v)
    g = u.grid
    scale = g.n * g.n
    u_phys = np.fft.ifft2(u.coeffs, axes=(-2, -1)).real * scale
    dv_dx = np.fft.ifft2(g.ikx * v.coeffs, axes=(-2, -1)).real * scale
    dv_dy = np.fft.ifft2(g.iky * v.coeffs, axes=(-2, -1)).real * scale
    conv = np.stack([u_phys[0] * dv_dx[0] + u_phys[1] * dv_dy[0],
                     u_phys[0] * dv_dx[1] + u_phys[1] * dv_dy[1]])
    out = from_physical(g, conv).coeffs * g.dealias_mask
    out = leray_project_coeffs(g, out[None])[0]
    return SpectralField(g, out)


def advection_path(w: FieldPath) -> FieldPath:
    """Node-wise B(w_j, w_j) along a path."""
    return FieldPath(w.grid, w.tgrid, advection_path_coeffs(w.grid, w.coeffs))


def advection_dual_norm(u: SpectralField) -> float:
    """Dual Dirichlet norm of the self-advection term, ||B(u, u)||_{V'}.

    Bounded by C_b ||u||_4^2 with the calibrated convection constant.
    """
    return vprime_norm(advection(u, u))


def lipschitz_gap(u: FieldPath, v: FieldPath, c_b: float) -> tuple[float, float]:
    """Both sides of the L^2(0,T;V') Lipschitz bound for self-advection.

    Returns ``(lhs, rhs)`` with ``lhs = ||B(u)-B(v)||_{L^2 V'}`` and
    ``rhs = c_b (||u|| + ||v||) ||u - v||`` in the discrete L^4L^4 norms.
    """
    if u.grid != v.grid or u.tgrid != v.tgrid:
        raise ValueError("paths must share spatial and time grids")
    bu = advection_path(u)
    bv = advection_path(v)
    diff = bu.coeffs - bv.coeffs
    inv = u.grid.ksq_inv
    dual_sq = VOLUME * np.sum(inv * np.abs(diff) ** 2, axis=(1, 2, 3))
    lhs = rect_integral(dual_sq, u.tgrid.dt) ** 0.5

    dt = u.tgrid.dt
    norm_u = rect_integral(node_lp_norms(u, 4) ** 4, dt) ** 0.25
    norm_v = rect_integral(node_lp_norms(v, 4) ** 4, dt) ** 0.25
    norm_diff = rect_integral(node_lp_norms(u - v, 4) ** 4, dt) ** 0.25
    return lhs, c_b * (norm_u + norm_v) * norm_diff
