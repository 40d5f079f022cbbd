"""Sample-path solver built on the Duhamel integral and Picard iteration.

The path is assembled as u = Y + Zhat where Zhat collects everything
propagated by the semigroup alone (initial state plus jump convolution)
and Y solves the shifted integral equation

    Y(t) = - int_{t0}^{t} exp(-(t-s)A) B(Y(s) + Zhat(s), Y(s) + Zhat(s)) ds

by fixed-point iteration of the map Y -> duhamel(-B(Y + Zhat)).  The
iteration contracts once the window [t0, t0 + T0] is small enough that

    ||Zhat||_{L4L4} + ||duhamel(-B(Zhat))||_{L4L4}  <=  M / 2,

with M = 1 / (6 C') and C' the frozen Lipschitz constant of the iteration
map.  Windows are chosen by dyadic halving of the remaining steps; the
solution is continued window by window, folding the reached state into a
restarted Zhat, which is exact because the jump convolution satisfies the
semigroup restart identity node-wise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import Grid, SpectralField
from .noise import JumpNoiseModel, JumpRecord, stochastic_convolution
from .paths import (
    FieldPath,
    PathGrid,
    l4l4_diff,
    l4l4_norm,
    node_l2_norms,
    node_lp_norms,
)
from .nonlinear import advection_path, advection_path_coeffs
from .spectral import divergence_linf

__all__ = [
    "NonConvergenceError",
    "DivergenceError",
    "WindowSelectionError",
    "PicardStats",
    "SolveSegment",
    "MildSolution",
    "duhamel",
    "rectangle_duhamel",
    "decay_path",
    "picard_map",
    "choose_window",
    "picard_solve",
    "continue_solution",
    "mild_residual",
    "mild_residual_series",
]


class NonConvergenceError(RuntimeError):
    """Picard iteration ran out of iterations before reaching tolerance."""

    def __init__(self, message, ratios=None, increments=None):
        super().__init__(message)
        self.ratios = list(ratios or [])
        self.increments = list(increments or [])


class DivergenceError(NonConvergenceError):
    """An iteration step grew; the window or calibration is inconsistent."""


class WindowSelectionError(RuntimeError):
    """Even the smallest admissible window violates the smallness gate.

    This signals that the time step is too coarse for the noise amplitude:
    refine dt (more steps per horizon) so smaller windows become available.
    """

    def __init__(self, message, node_index=0, gate_value=None, gate_bound=None):
        super().__init__(message)
        self.node_index = node_index
        self.gate_value = gate_value
        self.gate_bound = gate_bound


def decay_path(state: SpectralField, tgrid: PathGrid) -> FieldPath:
    """Path t -> exp(-(t - t0) A) state at the nodes of ``tgrid``."""
    g = state.grid
    coeffs = np.empty((tgrid.m + 1, 2, g.n, g.n), np.complex128)
    coeffs[0] = state.coeffs
    factor = np.exp(-g.ksq * tgrid.dt)
    for j in range(tgrid.m):
        np.multiply(coeffs[j], factor, out=coeffs[j + 1])
    return FieldPath(g, tgrid, coeffs)


def duhamel(f: FieldPath) -> FieldPath:
    """Semigroup convolution of a left-piecewise-constant forcing path.

    Uses the exponential-integrator recursion

        Phi_{j+1} = exp(-dt A) Phi_j + A^{-1}(I - exp(-dt A)) f_j,

    which is the exact integral for forcing frozen at the left node; in
    particular it is exact at the nodes for time-constant forcing.
    """
    g = f.grid
    tg = f.tgrid
    decay = np.exp(-g.ksq * tg.dt)
    weight = np.where(g.ksq > 0, -np.expm1(-g.ksq * tg.dt) * g.ksq_inv, tg.dt)
    weight[0, 0] = 0.0  # forcing is mean-zero; keep the projection pinned
    out = np.empty_like(f.coeffs)
    out[0] = 0.0
    scratch = np.empty_like(out[0])
    for j in range(tg.m):
        np.multiply(out[j], decay, out=out[j + 1])
        np.multiply(f.coeffs[j], weight, out=scratch)
        out[j + 1] += scratch
    return FieldPath(g, tg, out)


def rectangle_duhamel(f: FieldPath) -> FieldPath:
    """Left-rectangle quadrature of the same convolution.

    Independent of :func:`duhamel` at O(dt): used as the residual-side
    quadrature so that the mild-equation defect measures a genuine
    discretization error rather than the solver's own fixed-point slack.
    """
    g = f.grid
    tg = f.tgrid
    decay = np.exp(-g.ksq * tg.dt)
    out = np.empty_like(f.coeffs)
    out[0] = 0.0
    scratch = np.empty_like(out[0])
    for j in range(tg.m):
        np.multiply(f.coeffs[j], tg.dt, out=scratch)
        scratch += out[j]
        np.multiply(scratch, decay, out=out[j + 1])
    return FieldPath(g, tg, out)


def picard_map(y: FieldPath, zhat: FieldPath) -> FieldPath:
    """One fixed-point sweep: duhamel of -B(Y + Zhat, Y + Zhat)."""
    if y.grid != zhat.grid or y.tgrid != zhat.tgrid:
        raise ValueError("Y and Zhat must share grids")
    forcing = advection_path_coeffs(y.grid, y.coeffs + zhat.coeffs, negate=True)
    return duhamel(FieldPath(y.grid, y.tgrid, forcing))


@dataclass
class WindowGate:
    """Diagnostics of the smallness inequality on the accepted window."""

    steps: int
    value: float
    bound: float
    zhat_part: float
    sweep_part: float


def _window_candidates(m_remaining: int) -> list[int]:
    """Dyadic ladder of step counts, smallest first, never leaving 1 step."""
    ladder = set()
    j = 0
    while True:
        cand = max(2, m_remaining >> j)
        if m_remaining - cand == 1:
            cand += 1  # a 1-step leftover could not form a window later
        ladder.add(cand)
        if m_remaining >> j <= 2:
            break
        j += 1
    return sorted(ladder)


def choose_window(
    zhat: FieldPath, m_ball: float
) -> tuple[int, WindowGate, FieldPath]:
    """Largest dyadic prefix of ``zhat`` passing the smallness gate.

    Returns the number of steps of the accepted window, gate diagnostics,
    and the first Picard sweep duhamel(-B(Zhat)) on the accepted window
    (computed anyway for the gate, and reusable as the first iterate).
    Both gate terms grow with the window, so the scan walks the dyadic
    ladder upward and keeps the last passing candidate; the advection path
    is evaluated lazily, only as far as the scan reaches.
    """
    tg = zhat.tgrid
    bound = 0.5 * m_ball
    candidates = _window_candidates(tg.m)
    g = zhat.grid

    zhat_l4 = None  # node norms up to the largest candidate probed so far
    phi = None  # first Picard sweep, extended lazily over the ladder
    phi_done = 0
    decay = np.exp(-g.ksq * tg.dt)
    weight = np.where(g.ksq > 0, -np.expm1(-g.ksq * tg.dt) * g.ksq_inv, tg.dt)
    weight[0, 0] = 0.0

    accepted: tuple[int, WindowGate, FieldPath] | None = None
    for cand in candidates:
        if zhat_l4 is None or zhat_l4.size < cand + 1:
            zhat_l4 = node_lp_norms(zhat.sub(0, cand), 4)
        zhat_part = float((tg.dt * np.sum(zhat_l4[:cand] ** 4)) ** 0.25)
        if zhat_part > bound:
            # The sweep term only adds; this and every larger window fail.
            gate = WindowGate(cand, zhat_part, bound, zhat_part, 0.0)
            break
        if phi is None:
            phi = np.zeros((tg.m + 1, 2, g.n, g.n), np.complex128)
            scratch = np.empty_like(phi[0])
        if phi_done < cand:
            forcing = advection_path_coeffs(
                g, zhat.coeffs[phi_done:cand], negate=True
            )
            for j in range(phi_done, cand):
                np.multiply(phi[j], decay, out=phi[j + 1])
                np.multiply(forcing[j - phi_done], weight, out=scratch)
                phi[j + 1] += scratch
            phi_done = cand
        sweep = FieldPath(g, tg.sub(0, cand), phi[: cand + 1])
        sweep_part = l4l4_norm(sweep)
        value = zhat_part + sweep_part
        gate = WindowGate(cand, value, bound, zhat_part, sweep_part)
        if value <= bound:
            accepted = (cand, gate, sweep)
        else:
            break
    if accepted is None:
        raise WindowSelectionError(
            f"smallness gate fails even on the minimal {candidates[0]}-step "
            f"window: {gate.value:.3e} > {gate.bound:.3e}; the time step is "
            "too coarse for this noise amplitude",
            gate_value=gate.value,
            gate_bound=gate.bound,
        )
    steps, gate, sweep = accepted
    return steps, gate, sweep.copy()


@dataclass
class PicardStats:
    """Per-window iteration record."""

    iterations: int
    increments: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)

    @property
    def final_increment(self) -> float:
        return self.increments[-1] if self.increments else 0.0


def picard_solve(
    zhat: FieldPath,
    tol: float = 1e-9,
    max_iter: int = 60,
    y_init: FieldPath | None = None,
    first_sweep: FieldPath | None = None,
) -> tuple[FieldPath, PicardStats]:
    """Iterate Y <- duhamel(-B(Y + Zhat)) to a fixed point.

    Stops when the L^4L^4 increment drops to ``tol``; with contraction
    factor r the returned path is within ``r * tol`` of the true fixed
    point, comfortably inside the 2*tol contract.  ``first_sweep`` may
    supply a precomputed image of the zero path (the window-selection scan
    produces it as a by-product).  Raises :class:`DivergenceError` if an
    increment ratio exceeds 1 and :class:`NonConvergenceError` when
    ``max_iter`` is exhausted; both carry the ratio history.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    y = y_init.copy() if y_init is not None else FieldPath.zeros(zhat.grid, zhat.tgrid)
    increments: list[float] = []
    ratios: list[float] = []
    prev_inc = None
    for it in range(1, max_iter + 1):
        if it == 1 and y_init is None and first_sweep is not None:
            y_next = first_sweep
        else:
            y_next = picard_map(y, zhat)
        inc = l4l4_diff(y_next, y)
        increments.append(inc)
        if prev_inc is not None and prev_inc > 0:
            ratio = inc / prev_inc
            ratios.append(ratio)
            if ratio > 1.0:
                raise DivergenceError(
                    f"fixed-point sweep grew by factor {ratio:.3f} at "
                    f"iteration {it}; window selection or calibration is "
                    "inconsistent",
                    ratios=ratios,
                    increments=increments,
                )
        y = y_next
        if inc <= tol:
            return y, PicardStats(it, increments, ratios)
        prev_inc = inc
    raise NonConvergenceError(
        f"no convergence within {max_iter} iterations "
        f"(last increment {increments[-1]:.3e}, tol {tol:.1e})",
        ratios=ratios,
        increments=increments,
    )


@dataclass
class SolveSegment:
    """One accepted window of the continued solution."""

    start: int  # node index into the full grid
    stop: int  # final node index (inclusive)
    gate: WindowGate
    stats: PicardStats
    y: FieldPath
    zhat: FieldPath


@dataclass
class MildSolution:
    """Continued sample path with its decomposition and window records.

    ``y`` and ``zhat`` are the window-local parts, concatenated so that
    ``u = y + zhat`` holds exactly at every node (at an interior window
    boundary the restarted values, with Y = 0, are stored).  ``norms`` is
    filled by the run-level audit with the report of every checked
    inequality.
    """

    grid: Grid
    tgrid: PathGrid
    u: FieldPath
    y: FieldPath
    zhat: FieldPath
    segments: list[SolveSegment]
    tol: float
    norms: object | None = None

    @property
    def total_iterations(self) -> int:
        return sum(s.stats.iterations for s in self.segments)

    @property
    def all_ratios(self) -> list[float]:
        out: list[float] = []
        for s in self.segments:
            out.extend(s.stats.ratios)
        return out


def _validate_initial_state(u0: SpectralField) -> None:
    if np.max(np.abs(u0.mean_coefficient)) > 1e-13:
        raise ValueError("initial state must be mean-zero")
    scale = float(np.max(np.abs(u0.coeffs)))
    if scale > 0 and divergence_linf(u0) > 1e-10 * scale:
        raise ValueError("initial state must be divergence-free")


def continue_solution(
    model: JumpNoiseModel,
    record: JumpRecord,
    u0: SpectralField,
    horizon: float,
    tgrid: PathGrid,
    m_ball: float,
    tol: float = 1e-9,
    max_iter: int = 60,
) -> MildSolution:
    """Solve on [0, horizon] by window continuation.

    On each window the shifted part is rebuilt from the reached state:
    ``Zhat(t) = exp(-(t - t*) A)(u(t*) - Z(t*)) + Z(t)``, which equals the
    initial-state decay plus the convolution restricted to (t*, t] by the
    semigroup restart identity.  Windows are solved by
    :func:`picard_solve`; failures propagate with the window's start node
    attached.
    """
    if u0.grid != model.grid:
        raise ValueError("initial state and noise model use different grids")
    if abs(tgrid.t0) > 1e-12 or abs(tgrid.t1 - horizon) > 1e-12:
        raise ValueError("time grid must span [0, horizon]")
    _validate_initial_state(u0)
    g = model.grid
    u0 = SpectralField(g, u0.coeffs * g.dealias_mask)

    z = stochastic_convolution(model, record, tgrid)
    u_coeffs = np.empty_like(z.coeffs)
    y_coeffs = np.zeros_like(z.coeffs)
    zhat_coeffs = np.empty_like(z.coeffs)

    segments: list[SolveSegment] = []
    i0 = 0
    state = u0
    while i0 < tgrid.m:
        rem_grid = tgrid.sub(i0, tgrid.m)
        base = SpectralField(g, state.coeffs - z.coeffs[i0])
        zhat_rem = decay_path(base, rem_grid)
        zhat_rem.coeffs += z.coeffs[i0:]
        try:
            steps, gate, sweep = choose_window(zhat_rem, m_ball)
            # Copy the window slice so the segment does not pin the whole
            # remaining-horizon array through a view.
            zhat_seg = zhat_rem.sub(0, steps).copy()
            y_seg, stats = picard_solve(
                zhat_seg, tol=tol, max_iter=max_iter, first_sweep=sweep
            )
        except (WindowSelectionError, NonConvergenceError) as err:
            err.args = (f"{err.args[0]} (window starting at node {i0})",)
            if isinstance(err, WindowSelectionError):
                err.node_index = i0
            raise
        u_seg = y_seg.coeffs + zhat_seg.coeffs
        u_coeffs[i0 : i0 + steps + 1] = u_seg
        y_coeffs[i0 : i0 + steps] = y_seg.coeffs[:-1]
        zhat_coeffs[i0 : i0 + steps] = zhat_seg.coeffs[:-1]
        if i0 + steps == tgrid.m:
            y_coeffs[tgrid.m] = y_seg.coeffs[-1]
            zhat_coeffs[tgrid.m] = zhat_seg.coeffs[-1]
        segments.append(
            SolveSegment(i0, i0 + steps, gate, stats, y_seg, zhat_seg)
        )
        state = SpectralField(g, u_seg[-1].copy())
        i0 += steps

    return MildSolution(
        grid=g,
        tgrid=tgrid,
        u=FieldPath(g, tgrid, u_coeffs),
        y=FieldPath(g, tgrid, y_coeffs),
        zhat=FieldPath(g, tgrid, zhat_coeffs),
        segments=segments,
        tol=tol,
    )


def mild_residual_series(
    sol: MildSolution,
    model: JumpNoiseModel,
    record: JumpRecord,
    z: FieldPath | None = None,
) -> np.ndarray:
    """Node-wise L^2 defect of the integral equation for the solved path.

    Compares u against ``exp(-tA) u0 - Phi[B(u,u)] + Z`` with the
    convolution quadrature of :func:`rectangle_duhamel`, which is
    independent of the solver's integrator, so the series scales like the
    time step rather than the fixed-point tolerance.
    """
    if z is None:
        z = stochastic_convolution(model, record, sol.tgrid)
    forcing = advection_path(sol.u)
    phi = rectangle_duhamel(forcing)
    u0 = sol.u.field(0)
    expected = decay_path(u0, sol.tgrid)
    expected.coeffs += z.coeffs - phi.coeffs
    return node_l2_norms(sol.u - expected)


def mild_residual(
    sol: MildSolution,
    model: JumpNoiseModel,
    record: JumpRecord,
    z: FieldPath | None = None,
) -> float:
    """Largest node-wise mild-equation defect along the path."""
    return float(np.max(mild_residual_series(sol, model, record, z)))
