"""Time grids and discrete field paths.

A :class:`FieldPath` holds one coefficient snapshot per node of a uniform
:class:`PathGrid`.  Paths are treated as piecewise constant from the left
node, so every time integral below uses the left-endpoint rectangle rule
over the ``m`` steps; suprema run over all ``m + 1`` nodes.
"""

from __future__ import annotations

import numpy as np

from .fields import VOLUME, Grid

_CHUNK = 64  # nodes per FFT batch; bounds transient memory


class PathGrid:
    """Uniform grid of m steps on [t0, t1]."""

    def __init__(self, t0: float, t1: float, m: int, _times: np.ndarray | None = None):
        m = int(m)
        if m < 2:
            raise ValueError(f"a path grid needs at least 2 steps, got {m}")
        if not t1 > t0:
            raise ValueError(f"empty time interval [{t0}, {t1}]")
        self.t0 = float(t0)
        self.t1 = float(t1)
        self.m = m
        self.times = np.linspace(t0, t1, m + 1) if _times is None else _times
        self.dt = (self.t1 - self.t0) / m

    def sub(self, i: int, j: int) -> "PathGrid":
        """Sub-grid over node indices [i, j]; nodes match the parent exactly."""
        if not (0 <= i < j <= self.m):
            raise ValueError(f"bad sub-grid node range [{i}, {j}]")
        times = self.times[i : j + 1]
        return PathGrid(times[0], times[-1], j - i, _times=times)

    def __eq__(self, other):
        return (
            isinstance(other, PathGrid)
            and other.m == self.m
            and other.t0 == self.t0
            and other.t1 == self.t1
        )

    def __hash__(self):
        return hash(("PathGrid", self.t0, self.t1, self.m))

    def __repr__(self):
        return f"PathGrid([{self.t0:g}, {self.t1:g}], m={self.m})"


def _check_compatible(a: "FieldPath", b: "FieldPath") -> None:
    if a.grid != b.grid or a.tgrid != b.tgrid:
        raise ValueError("field paths live on different grids")


class FieldPath:
    """Snapshots of a spectral field at the nodes of a path grid.

    ``coeffs`` has shape (m + 1, 2, n, n) in the same convention as
    :class:`~jumpns.fields.SpectralField`.
    """

    __slots__ = ("grid", "tgrid", "coeffs")

    def __init__(self, grid: Grid, tgrid: PathGrid, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        expected = (tgrid.m + 1, 2, grid.n, grid.n)
        if coeffs.shape != expected:
            raise ValueError(f"path coefficients must have shape {expected}")
        self.grid = grid
        self.tgrid = tgrid
        self.coeffs = coeffs

    @classmethod
    def zeros(cls, grid: Grid, tgrid: PathGrid) -> "FieldPath":
        return cls(
            grid, tgrid, np.zeros((tgrid.m + 1, 2, grid.n, grid.n), np.complex128)
        )

    def field(self, j: int):
        from .fields import SpectralField

        return SpectralField(self.grid, self.coeffs[j])

    def sub(self, i: int, j: int) -> "FieldPath":
        """View of nodes [i, j] on the corresponding sub-grid (no copy)."""
        return FieldPath(self.grid, self.tgrid.sub(i, j), self.coeffs[i : j + 1])

    def copy(self) -> "FieldPath":
        return FieldPath(self.grid, self.tgrid, self.coeffs.copy())

    def __add__(self, other: "FieldPath") -> "FieldPath":
        _check_compatible(self, other)
        return FieldPath(self.grid, self.tgrid, self.coeffs + other.coeffs)

    def __sub__(self, other: "FieldPath") -> "FieldPath":
        _check_compatible(self, other)
        return FieldPath(self.grid, self.tgrid, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "FieldPath":
        return FieldPath(self.grid, self.tgrid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "FieldPath":
        return FieldPath(self.grid, self.tgrid, -self.coeffs)

    def __repr__(self):
        return f"FieldPath(n={self.grid.n}, {self.tgrid!r})"


def node_lp_norms(path: FieldPath, p: int) -> np.ndarray:
    """Per-node L^p norms of the pointwise speed, batched over nodes."""
    if p not in (2, 4):
        raise ValueError(f"unsupported Lebesgue exponent p={p}; use 2 or 4")
    n = path.grid.n
    h = path.grid.half
    nodes = path.coeffs.shape[0]
    out = np.empty(nodes)
    # Real fields: transform the half spectrum only.  The raw inverse
    # transform is 1/n^2 of the physical samples; the scalings are folded
    # into the quadrature constants.
    w2 = VOLUME * (n * n)
    w4 = VOLUME * float(n) ** 6
    for lo in range(0, nodes, _CHUNK):
        hi = min(lo + _CHUNK, nodes)
        phys = np.fft.irfft2(path.coeffs[lo:hi, :, :, :h], s=(n, n), axes=(-2, -1))
        speed_sq = phys[:, 0] ** 2
        speed_sq += phys[:, 1] ** 2
        if p == 2:
            out[lo:hi] = np.sqrt(w2 * speed_sq.sum(axis=(-2, -1)))
        else:
            speed_sq *= speed_sq
            out[lo:hi] = (w4 * speed_sq.sum(axis=(-2, -1))) ** 0.25
    return out


def node_l2_norms(path: FieldPath) -> np.ndarray:
    """Per-node L^2 norms straight from coefficients (Parseval)."""
    return np.sqrt(VOLUME * np.sum(np.abs(path.coeffs) ** 2, axis=(1, 2, 3)))


def node_grad_l2_norms(path: FieldPath) -> np.ndarray:
    """Per-node Dirichlet norms ||grad v||_2."""
    ksq = path.grid.ksq
    return np.sqrt(VOLUME * np.sum(ksq * np.abs(path.coeffs) ** 2, axis=(1, 2, 3)))


def node_vprime_norms(path: FieldPath) -> np.ndarray:
    """Per-node dual Dirichlet norms || |k|^{-1} v ||_2 (mean-zero paths)."""
    inv = path.grid.ksq_inv
    return np.sqrt(VOLUME * np.sum(inv * np.abs(path.coeffs) ** 2, axis=(1, 2, 3)))


def node_stokes_l2_norms(path: FieldPath) -> np.ndarray:
    """Per-node norms || |k|^2 v ||_2."""
    ksq = path.grid.ksq
    return np.sqrt(VOLUME * np.sum(ksq**2 * np.abs(path.coeffs) ** 2, axis=(1, 2, 3)))


def rect_integral(node_values: np.ndarray, dt: float) -> float:
    """Left-endpoint rectangle rule over the steps of a path."""
    return float(dt * np.sum(node_values[:-1]))


def l4l4_norm(path: FieldPath) -> float:
    """Discrete L^4(0,T; L^4) norm: (sum_j dt ||v_j||_4^4)^{1/4}."""
    return rect_integral(node_lp_norms(path, 4) ** 4, path.tgrid.dt) ** 0.25


def l2v_norm(path: FieldPath) -> float:
    """Discrete L^2(0,T; V) norm with V the Dirichlet seminorm."""
    return rect_integral(node_grad_l2_norms(path) ** 2, path.tgrid.dt) ** 0.5


def l2vprime_norm(path: FieldPath) -> float:
    """Discrete L^2(0,T; V') norm."""
    return rect_integral(node_vprime_norms(path) ** 2, path.tgrid.dt) ** 0.5


def linf_h_norm(path: FieldPath) -> float:
    """Supremum over nodes of the L^2 norm."""
    return float(np.max(node_l2_norms(path)))


def l4l4_diff(a: FieldPath, b: FieldPath) -> float:
    """L^4L^4 norm of a - b without materializing the difference path."""
    _check_compatible(a, b)
    n = a.grid.n
    h = a.grid.half
    w4 = VOLUME * float(n) ** 6
    acc = 0.0
    for lo in range(0, a.coeffs.shape[0] - 1, _CHUNK):
        hi = min(lo + _CHUNK, a.coeffs.shape[0] - 1)
        diff = a.coeffs[lo:hi, :, :, :h] - b.coeffs[lo:hi, :, :, :h]
        phys = np.fft.irfft2(diff, s=(n, n), axes=(-2, -1))
        speed_sq = phys[:, 0] ** 2
        speed_sq += phys[:, 1] ** 2
        speed_sq *= speed_sq
        acc += float((w4 * speed_sq.sum(axis=(-2, -1))).sum())
    return (a.tgrid.dt * acc) ** 0.25


def prefix_l4l4(node_l4: np.ndarray, dt: float) -> np.ndarray:
    """Running L^4L^4 norms: entry j is the norm over the first j steps.

    ``prefix[j] = (dt * sum_{i<j} l4[i]^4)^{1/4}``, so ``prefix[0] = 0`` and
    ``prefix[m]`` matches :func:`l4l4_norm` of the whole path.
    """
    acc = np.concatenate([[0.0], np.cumsum(node_l4**4) * dt])
    return acc**0.25
