"""Truncated Fourier representation of periodic velocity fields.

Velocity fields live on the 2*pi-periodic square torus and are stored as
complex coefficient arrays of shape (2, n, n): one n x n block of Fourier
coefficients per velocity component, in numpy FFT ordering.  The convention
is

    u(x) = sum_k  coeffs[:, k] * exp(i k . x),

so a physical-space sample on the uniform n x n grid is ``n**2 *
ifft2(coeffs)`` and the box integral of |u|^2 equals ``(2*pi)**2 *
sum(|coeffs|^2)`` (Parseval).

All fields handled by the solver are real (Hermitian coefficient symmetry),
mean-zero (the k = 0 coefficient is pinned to zero so that negative powers
of the Stokes operator are defined) and band-limited to the two-thirds
dealiasing square.
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi
#: Lebesgue measure of the periodic box [0, 2*pi)^2.
VOLUME = TWO_PI**2


class Grid:
    """Fourier grid with n modes per axis on the 2*pi-periodic torus.

    Parameters
    ----------
    n : int
        Modes (equivalently physical points) per axis.  Must be even and
        at least 8 so that the two-thirds cutoff ``n // 3`` is nontrivial.
    """

    def __init__(self, n: int):
        n = int(n)
        if n < 8:
            raise ValueError(f"grid needs n >= 8 modes per axis, got {n}")
        if n % 2 != 0:
            raise ValueError(f"grid needs an even number of modes, got {n}")
        self.n = n
        self.cutoff = n // 3
        k = np.fft.fftfreq(n, d=1.0 / n)  # integer wavenumbers, FFT order
        self.kx, self.ky = np.meshgrid(k, k, indexing="ij")
        self.ksq = self.kx**2 + self.ky**2
        self.ikx = 1j * self.kx
        self.iky = 1j * self.ky
        with np.errstate(divide="ignore"):
            inv = 1.0 / self.ksq
        inv[0, 0] = 0.0
        self.ksq_inv = inv
        self.dealias_mask = (np.abs(self.kx) <= self.cutoff) & (
            np.abs(self.ky) <= self.cutoff
        )
        # Half-spectrum views (last axis 0..n/2) for real-transform fast paths.
        h = n // 2 + 1
        self.half = h
        self.kx_h = self.kx[:, :h].copy()
        self.ky_h = self.ky[:, :h].copy()
        self.ikx_h = self.ikx[:, :h].copy()
        self.iky_h = self.iky[:, :h].copy()
        self.ksq_inv_h = self.ksq_inv[:, :h].copy()
        self.dealias_mask_h = self.dealias_mask[:, :h].copy()

    # Physical collocation points, one axis (x_j = 2*pi*j/n).
    def axis_points(self) -> np.ndarray:
        return TWO_PI * np.arange(self.n) / self.n

    def meshgrid(self):
        x = self.axis_points()
        return np.meshgrid(x, x, indexing="ij")

    def __eq__(self, other):
        return isinstance(other, Grid) and other.n == self.n

    def __hash__(self):
        return hash(("Grid", self.n))

    def __repr__(self):
        return f"Grid(n={self.n})"


def _check_same_grid(a: "SpectralField", b: "SpectralField") -> None:
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")


class SpectralField:
    """A two-component coefficient array bound to its grid.

    The class is a thin value container; all operators live in
    :mod:`jumpns.spectral`.  Arithmetic is coefficient-wise and requires
    matching grids.
    """

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: Grid, coeffs: np.ndarray, copy: bool = False):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != (2, grid.n, grid.n):
            raise ValueError(
                f"coefficient array must have shape (2, {grid.n}, {grid.n}), "
                f"got {coeffs.shape}"
            )
        self.grid = grid
        self.coeffs = coeffs.copy() if copy else coeffs

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    @property
    def mean_coefficient(self) -> np.ndarray:
        return self.coeffs[:, 0, 0]

    def __repr__(self):
        return f"SpectralField(n={self.grid.n})"


def conj_reflect(coeffs: np.ndarray) -> np.ndarray:
    """Return ``conj(c(-k))`` for an array indexed in FFT wavenumber order."""
    out = coeffs[..., ::-1, ::-1]
    out = np.roll(out, 1, axis=-1)
    out = np.roll(out, 1, axis=-2)
    return np.conj(out)


def hermitianize(coeffs: np.ndarray) -> np.ndarray:
    """Project coefficients onto the Hermitian (real-field) subspace."""
    return 0.5 * (coeffs + conj_reflect(coeffs))


def expand_half(grid: Grid, half: np.ndarray) -> np.ndarray:
    """Rebuild full Hermitian coefficients from the last-axis half spectrum.

    ``half`` holds columns 0..n/2; the remaining columns follow from
    ``c(-k) = conj(c(k))``.
    """
    n = grid.n
    full = np.empty(half.shape[:-1] + (n,), np.complex128)
    full[..., : n // 2 + 1] = half
    tail = np.conj(half[..., 1 : n // 2])
    tail = tail[..., ::-1]
    tail = np.roll(tail[..., ::-1, :], 1, axis=-2)
    full[..., n // 2 + 1 :] = tail
    return full


def to_physical(field: SpectralField) -> np.ndarray:
    """Evaluate the field on the n x n collocation grid (real array)."""
    n = field.grid.n
    return np.fft.ifft2(field.coeffs, axes=(-2, -1)).real * (n * n)


def from_physical(grid: Grid, values: np.ndarray) -> SpectralField:
    """Build a field from physical samples of shape (2, n, n)."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (2, grid.n, grid.n):
        raise ValueError(f"expected physical samples of shape (2, {grid.n}, {grid.n})")
    coeffs = np.fft.fft2(values, axes=(-2, -1)) / (grid.n * grid.n)
    return SpectralField(grid, coeffs)


def zero_field(grid: Grid) -> SpectralField:
    return SpectralField(grid, np.zeros((2, grid.n, grid.n), dtype=np.complex128))


def single_mode(grid: Grid, k, amplitude) -> SpectralField:
    """Real field with coefficient ``amplitude`` at wavevector k.

    The conjugate coefficient at -k is set automatically so the field is
    real.  ``amplitude`` is a complex 2-vector (one entry per component).
    """
    k1, k2 = int(k[0]), int(k[1])
    half = grid.n // 2
    if max(abs(k1), abs(k2)) >= half:
        raise ValueError(f"wavevector {k} outside the resolved band of {grid}")
    if k1 == 0 and k2 == 0:
        raise ValueError("mean mode is pinned to zero; pick k != 0")
    amp = np.asarray(amplitude, dtype=np.complex128)
    if amp.shape != (2,):
        raise ValueError("amplitude must be a complex 2-vector")
    coeffs = np.zeros((2, grid.n, grid.n), dtype=np.complex128)
    coeffs[:, k1 % grid.n, k2 % grid.n] = amp
    coeffs[:, (-k1) % grid.n, (-k2) % grid.n] = np.conj(amp)
    return SpectralField(grid, coeffs)


def gradient_field(grid: Grid, phi_coeffs: np.ndarray) -> SpectralField:
    """Vector field grad(phi) for a scalar with given Fourier coefficients."""
    phi = np.asarray(phi_coeffs, dtype=np.complex128)
    if phi.shape != (grid.n, grid.n):
        raise ValueError("scalar coefficient array has wrong shape")
    coeffs = np.stack([1j * grid.kx * phi, 1j * grid.ky * phi])
    return SpectralField(grid, coeffs)


def taylor_green(grid: Grid, amplitude: float = 1.0) -> SpectralField:
    """Taylor-Green vortex a*(sin x1 cos x2, -cos x1 sin x2).

    Divergence-free single-shell field whose self-advection is a pure
    gradient; under the projected dynamics it decays as exp(-2t).
    """
    x1, x2 = grid.meshgrid()
    values = amplitude * np.stack(
        [np.sin(x1) * np.cos(x2), -np.cos(x1) * np.sin(x2)]
    )
    return from_physical(grid, values)


def random_field(
    grid: Grid,
    rng: np.random.Generator,
    slope: float = 1.0,
    solenoidal: bool = True,
    scale: float = 1.0,
) -> SpectralField:
    """Random real, mean-zero, band-limited field with power-law spectrum.

    Coefficients are complex Gaussian with standard deviation
    ``scale * |k|**(-slope)`` inside the dealiasing square.  With
    ``solenoidal=True`` the field is Leray-projected.
    """
    n = grid.n
    raw = rng.standard_normal((2, n, n)) + 1j * rng.standard_normal((2, n, n))
    with np.errstate(divide="ignore"):
        envelope = np.where(grid.ksq > 0, np.sqrt(grid.ksq) ** (-slope), 0.0)
    coeffs = hermitianize(raw) * envelope * grid.dealias_mask * scale
    coeffs[:, 0, 0] = 0.0
    field = SpectralField(grid, coeffs)
    if solenoidal:
        from .spectral import leray_project

        field = leray_project(field)
    return field


def vortex_blob(grid: Grid, concentration: float, center=(0.0, 0.0)) -> SpectralField:
    """Localized divergence-free vortex from a periodic Gaussian-like bump.

    Streamfunction ``psi = exp(c*(cos(x1-a) + cos(x2-b) - 2))``; the velocity
    is its perpendicular gradient, hence exactly solenoidal.  Large
    ``concentration`` gives a tight vortex, a useful near-extremal input for
    interpolation-inequality sweeps.
    """
    x1, x2 = grid.meshgrid()
    psi = np.exp(
        concentration * (np.cos(x1 - center[0]) + np.cos(x2 - center[1]) - 2.0)
    )
    psi_hat = np.fft.fft2(psi) / (grid.n * grid.n)
    # u = (d2 psi, -d1 psi)
    coeffs = np.stack([1j * grid.ky * psi_hat, -1j * grid.kx * psi_hat])
    coeffs *= grid.dealias_mask
    coeffs[:, 0, 0] = 0.0
    return SpectralField(grid, coeffs)
