"""Leray projection, Stokes semigroup, fractional powers and norms.

Every operator here is an exact Fourier multiplier on the torus, acting
coefficient-wise on :class:`~jumpns.fields.SpectralField`.  Functions are
pure: inputs are never mutated, so they can be called concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import VOLUME, Grid, SpectralField, to_physical

__all__ = [
    "SobolevOrder",
    "leray_project",
    "stokes_apply",
    "semigroup_apply",
    "fractional_power_apply",
    "dealias",
    "lp_norm",
    "sobolev_norm",
    "grad_l2_norm",
    "vprime_norm",
    "l2_inner",
    "l2_norm_spectral",
    "divergence_linf",
]


@dataclass(frozen=True)
class SobolevOrder:
    """Order (s, p) of the multiplier norm || |k|^s u ||_{L^p}.

    ``s`` is the full multiplier exponent: order ``s`` corresponds to the
    space with norm ``|| A^{s/2} u ||_{L^p}`` where A is the Stokes operator.
    """

    s: float
    p: int = 2

    def __post_init__(self):
        if self.p not in (2, 4):
            raise ValueError(f"unsupported Lebesgue exponent p={self.p}; use 2 or 4")


def leray_project(f: SpectralField) -> SpectralField:
    """Project onto divergence-free fields: c(k) <- (I - k k^T/|k|^2) c(k).

    The k = 0 coefficient is pinned to zero, which keeps negative fractional
    powers of the Stokes operator well-defined on the projected field.
    """
    g = f.grid
    c1, c2 = f.coeffs[0], f.coeffs[1]
    kdotc = (g.kx * c1 + g.ky * c2) * g.ksq_inv
    out = np.stack([c1 - g.kx * kdotc, c2 - g.ky * kdotc])
    out[:, 0, 0] = 0.0
    return SpectralField(g, out)


def leray_project_coeffs(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Leray projection for batched coefficient arrays (..., 2, n, n)."""
    c1 = coeffs[..., 0, :, :]
    c2 = coeffs[..., 1, :, :]
    kdotc = (grid.kx * c1 + grid.ky * c2) * grid.ksq_inv
    out = np.stack([c1 - grid.kx * kdotc, c2 - grid.ky * kdotc], axis=-3)
    out[..., :, 0, 0] = 0.0
    return out


def stokes_apply(u: SpectralField) -> SpectralField:
    """Stokes operator: multiply each coefficient by |k|^2."""
    return SpectralField(u.grid, u.coeffs * u.grid.ksq)


def semigroup_apply(u: SpectralField, t: float) -> SpectralField:
    """Heat/Stokes semigroup: c(k) <- exp(-|k|^2 t) c(k), t >= 0."""
    if t < 0:
        raise ValueError(f"semigroup time must be nonnegative, got {t}")
    if t == 0:
        return u.copy()
    return SpectralField(u.grid, u.coeffs * np.exp(-u.grid.ksq * t))


def _require_mean_zero(u: SpectralField, what: str) -> None:
    mean = np.max(np.abs(u.mean_coefficient))
    scale = np.max(np.abs(u.coeffs))
    if mean > 1e-12 * max(scale, 1e-300):
        raise ValueError(f"{what} needs a mean-zero field")


def fractional_power_apply(u: SpectralField, s: float) -> SpectralField:
    """Multiplier |k|^s, realizing the fractional Stokes power A^{s/2}.

    Negative s requires a mean-zero field; the k = 0 mode of the output is
    pinned to zero.
    """
    g = u.grid
    if s == 0:
        return u.copy()
    if s < 0:
        _require_mean_zero(u, "negative fractional powers")
    with np.errstate(divide="ignore"):
        mult = np.where(g.ksq > 0, np.sqrt(g.ksq) ** s, 0.0)
    return SpectralField(g, u.coeffs * mult)


def dealias(u: SpectralField) -> SpectralField:
    """Zero every mode with max(|k1|, |k2|) beyond the two-thirds cutoff."""
    return SpectralField(u.grid, u.coeffs * u.grid.dealias_mask)


def lp_norm(u: SpectralField, p: int) -> float:
    """Lebesgue norm of the pointwise speed |u(x)| by grid quadrature.

    Returns ``( (2*pi/n)^2 * sum_x (u1^2 + u2^2)^{p/2} )^{1/p}`` for
    p in {2, 4}; the uniform-grid rule is spectrally accurate for periodic
    integrands.
    """
    if p not in (2, 4):
        raise ValueError(f"unsupported Lebesgue exponent p={p}; use 2 or 4")
    phys = to_physical(u)
    speed_sq = phys[0] ** 2 + phys[1] ** 2
    weight = VOLUME / (u.grid.n**2)
    if p == 2:
        return float(np.sqrt(weight * speed_sq.sum()))
    return float((weight * (speed_sq**2).sum()) ** 0.25)


def l2_norm_spectral(u: SpectralField) -> float:
    """L^2 norm straight from coefficients (Parseval)."""
    return float(np.sqrt(VOLUME * np.sum(np.abs(u.coeffs) ** 2)))


def sobolev_norm(u: SpectralField, order: SobolevOrder) -> float:
    """Norm || |k|^s u ||_{L^p}; mean-zero is required for negative s."""
    return lp_norm(fractional_power_apply(u, order.s), order.p)


def grad_l2_norm(u: SpectralField) -> float:
    """Dirichlet (H^1 semi-) norm ||grad u||_{L^2} via Parseval."""
    return float(np.sqrt(VOLUME * np.sum(u.grid.ksq * np.abs(u.coeffs) ** 2)))


def vprime_norm(f: SpectralField) -> float:
    """Dual Dirichlet norm || |k|^{-1} f ||_{L^2} on mean-zero fields."""
    _require_mean_zero(f, "the dual Dirichlet norm")
    return float(np.sqrt(VOLUME * np.sum(f.grid.ksq_inv * np.abs(f.coeffs) ** 2)))


def l2_inner(u: SpectralField, v: SpectralField) -> float:
    """L^2 inner product of two real fields, evaluated spectrally."""
    if u.grid != v.grid:
        raise ValueError("grid mismatch in inner product")
    return float(VOLUME * np.sum(u.coeffs * np.conj(v.coeffs)).real)


def divergence_linf(u: SpectralField) -> float:
    """Largest |k . c(k)|, a cheap solenoidality certificate."""
    g = u.grid
    return float(np.max(np.abs(g.kx * u.coeffs[0] + g.ky * u.coeffs[1])))
