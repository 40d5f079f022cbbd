"""Empirical calibration of the inequality constants, frozen for audits.

The continuum inequalities behind the solver (convective Hoelder bound,
interpolation, embedding, convolution stability, the Lipschitz constant of
the fixed-point sweep) hold with constants that are existential; the
package instead measures each constant as the extremal ratio over a
documented input family, freezes the results, and asserts the
inequalities on fresh inputs with a 5% headroom factor.

The iteration-map constant ``c_prime`` quantifies over the population the
contraction guarantee actually applies to: noise-realistic shifted paths
and iterates in the range of the sweep map.  Its soundness is backstopped
at run time, where every accepted window must exhibit measured
contraction ratios below 0.6.

``DEFAULT_CONSTANTS`` is the frozen output of
``jumpns calibrate`` at the default seed; regenerating it with the same
seed reproduces the numbers exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
import json

import numpy as np

from .fields import Grid, SpectralField, random_field, single_mode, taylor_green, vortex_blob
from .nonlinear import advection, trilinear
from .paths import FieldPath, PathGrid, l4l4_norm, linf_h_norm, l2v_norm, l2vprime_norm
from .spectral import (
    SobolevOrder,
    fractional_power_apply,
    grad_l2_norm,
    leray_project,
    lp_norm,
    sobolev_norm,
)

__all__ = [
    "FrozenConstants",
    "calibrate",
    "DEFAULT_CONSTANTS",
    "CALIBRATION_SEED",
    "MARGIN",
    "sweep_fields",
    "sweep_extremal_fields",
    "sweep_forcing_path",
]

#: Headroom factor applied to frozen constants in inequality assertions.
MARGIN = 1.05

CALIBRATION_SEED = 20260808
CALIBRATION_SAMPLES = 10000

_SLOPES = (0.6, 1.0, 1.5, 2.5)


@dataclass(frozen=True)
class FrozenConstants:
    """Measured inequality constants and the quantities derived from them."""

    c_b: float  # |b(u,v,w)| <= c_b ||u||_4 ||v||_4 ||grad w||_2
    c_gn: float  # ||v||_4 <= c_gn ||v||_2^1/2 ||grad v||_2^1/2
    c_emb: float  # ||v||_4 <= c_emb ||A^1/4 v||_2
    c_interp: float  # ||A^1/4 v||_2 <= c_interp ||grad v||_2^1/2 ||v||_2^1/2
    c_dul: float  # ||Phi_f||_LinfH + ||Phi_f||_L2V <= c_dul ||f||_L2V'
    c_prime: float  # Lipschitz constant of the fixed-point sweep
    c_smooth4: float  # sup_t (||e^-tA x||_4 t^alpha / ||x||_{-2alpha,4})^4
    alpha: float  # negative order used for c_smooth4
    seed: int
    n_samples: int

    @property
    def c_chain(self) -> float:
        """The single constant covering both convection bounds.

        The cross term needs c_b alone; the self term needs the product
        c_b * c_emb * c_interp through the half-order embedding chain.
        """
        return self.c_b * max(1.0, self.c_emb * self.c_interp)

    @property
    def c1(self) -> float:
        """Gronwall exponent constant, 27/2 * C^4."""
        return 13.5 * self.c_chain**4

    @property
    def c2(self) -> float:
        """Gronwall source constant, 2 * C^2."""
        return 2.0 * self.c_chain**2

    @property
    def m_ball(self) -> float:
        """Iteration ball radius 1 / (6 c')."""
        return 1.0 / (6.0 * self.c_prime)

    @property
    def c_sob1(self) -> float:
        """Space-time norm-equivalence constant, c_gn^4 / 2."""
        return 0.5 * self.c_gn**4

    def smoothing_time_constant(self, horizon: float) -> float:
        """c_smooth4 * T^(1-4a) / (1-4a), the decay-integral constant."""
        a = self.alpha
        return self.c_smooth4 * horizon ** (1.0 - 4.0 * a) / (1.0 - 4.0 * a)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "FrozenConstants":
        return cls(**json.loads(text))


def sweep_fields(grid: Grid, rng: np.random.Generator, count: int, solenoidal=True):
    """Random band-limited fields cycling through the spectral slopes."""
    for i in range(count):
        yield random_field(grid, rng, slope=_SLOPES[i % len(_SLOPES)],
                           solenoidal=solenoidal)


def sweep_extremal_fields(grid: Grid):
    """Deterministic near-extremal candidates for the pointwise sweeps."""
    out = []
    for k in [(1, 0), (0, 1), (1, 1), (2, 1), (1, -1), (3, 0), (2, 2)]:
        for amp in [(1.0, 0.0), (0.0, 1.0), (0.6, 0.8j)]:
            f = leray_project(single_mode(grid, k, amp))
            if np.max(np.abs(f.coeffs)) > 1e-12:
                out.append(f)
    for conc in (1.0, 4.0, 16.0):
        out.append(vortex_blob(grid, conc))
    out.append(taylor_green(grid))
    return out


def sweep_forcing_path(
    grid: Grid, rng: np.random.Generator, tgrid: PathGrid, slope: float,
    refresh: int = 4,
) -> FieldPath:
    """Random forcing path, piecewise-frozen every ``refresh`` nodes."""
    coeffs = np.empty((tgrid.m + 1, 2, grid.n, grid.n), np.complex128)
    current = random_field(grid, rng, slope=slope).coeffs
    for j in range(tgrid.m + 1):
        if j % refresh == 0 and j > 0:
            current = random_field(grid, rng, slope=slope).coeffs
        coeffs[j] = current
    return FieldPath(grid, tgrid, coeffs)


def _holder_gn_sweep(rng: np.random.Generator, n_samples: int, grid_n: int):
    grid = Grid(grid_n)
    extremals = sweep_extremal_fields(grid)
    c_b = 0.0
    c_gn = 0.0
    c_emb = 0.0
    c_interp = 0.0

    def visit_single(v: SpectralField):
        nonlocal c_gn, c_emb, c_interp
        l4 = lp_norm(v, 4)
        l2 = lp_norm(v, 2)
        grad = grad_l2_norm(v)
        half = lp_norm(fractional_power_apply(v, 0.5), 2)
        if l2 > 0 and grad > 0:
            c_gn = max(c_gn, l4 / np.sqrt(l2 * grad))
            c_interp = max(c_interp, half / np.sqrt(l2 * grad))
        if half > 0:
            c_emb = max(c_emb, l4 / half)

    def visit_triple(u, v, w):
        nonlocal c_b
        denom = lp_norm(u, 4) * lp_norm(v, 4) * grad_l2_norm(w)
        if denom > 0:
            c_b = max(c_b, abs(trilinear(u, v, w)) / denom)

    def visit_dual(u):
        # Exact maximizer of the dual pairing <B(u,u), w>/||grad w||: the
        # triple (u, u, A^{-1} B(u,u)) realizes ||B(u,u)||_V' / ||u||_4^2.
        b = advection(u, u)
        if np.max(np.abs(b.coeffs)) == 0:
            return
        visit_triple(u, u, fractional_power_apply(b, -2.0))

    for f in extremals:
        visit_single(f)
    for i, u in enumerate(extremals):
        v = extremals[(i + 1) % len(extremals)]
        w = extremals[(i + 2) % len(extremals)]
        visit_triple(u, v, w)
        visit_triple(u, u, v)
        visit_triple(u, v, v)
        visit_dual(u)

    triples = n_samples // 3
    for i in range(n_samples - triples):
        visit_single(random_field(grid, rng, slope=_SLOPES[i % len(_SLOPES)],
                                  solenoidal=bool(i % 2)))
    for i in range(triples):
        slope = _SLOPES[i % len(_SLOPES)]
        u = random_field(grid, rng, slope=slope, solenoidal=True)
        v = random_field(grid, rng, slope=slope, solenoidal=False)
        w = random_field(grid, rng, slope=_SLOPES[(i + 1) % len(_SLOPES)],
                         solenoidal=False)
        visit_triple(u, v, w)
        if i % 3 == 0:
            visit_dual(u)
    return c_b, c_gn, c_emb, c_interp


def _duhamel_sweep(rng: np.random.Generator, trials: int, grid_n: int) -> float:
    from .solver import duhamel

    grid = Grid(grid_n)
    best = 0.0
    horizons = (0.25, 1.0, 4.0)
    for i in range(trials):
        tgrid = PathGrid(0.0, horizons[i % 3], 8 + 8 * (i % 3))
        f = sweep_forcing_path(grid, rng, tgrid, slope=_SLOPES[i % len(_SLOPES)])
        denom = l2vprime_norm(f)
        if denom == 0:
            continue
        phi = duhamel(f)
        best = max(best, (linf_h_norm(phi) + l2v_norm(phi)) / denom)
    # Constant-in-time low modes accumulate the most; include them.
    for k in [(1, 0), (1, 1), (2, 0)]:
        mode = leray_project(single_mode(grid, k, (0.4, 0.8)))
        if np.max(np.abs(mode.coeffs)) < 1e-12:
            continue
        for horizon in horizons:
            tgrid = PathGrid(0.0, horizon, 16)
            f = FieldPath(grid, tgrid,
                          np.repeat(mode.coeffs[None], tgrid.m + 1, 0))
            phi = duhamel(f)
            best = max(best, (linf_h_norm(phi) + l2v_norm(phi)) / l2vprime_norm(f))
    return best


def _smoothing_sweep(
    rng: np.random.Generator, trials: int, grid_n: int, alpha: float
) -> float:
    grid = Grid(grid_n)
    t_values = np.logspace(-4, 0.5, 45)
    best = 0.0
    fields = list(sweep_fields(grid, rng, trials)) + sweep_extremal_fields(grid)
    for x in fields:
        denom = sobolev_norm(x, SobolevOrder(-2.0 * alpha, 4))
        if denom == 0:
            continue
        for t in t_values:
            decayed = SpectralField(grid, x.coeffs * np.exp(-grid.ksq * t))
            best = max(best, lp_norm(decayed, 4) * t**alpha / denom)
    return best**4


def _iteration_lipschitz_sweep(
    rng: np.random.Generator, trials: int
) -> float:
    """Self-consistent Lipschitz constant of the fixed-point sweep map.

    For every calibration window the sweep records the split gate value
    ``(gz, g0) = (||Zhat||, ||sweep(0)||)`` in the discrete L4L4 norm and
    the Lipschitz ratio ``r = ||G(Y1)-G(Y2)|| / ((||Y1+Z|| + ||Y2+Z||)
    ||Y1-Y2||)`` over sweep-range iterate pairs.  When the iteration
    starts from zero and contracts with factor 1/2, its iterates stay
    below ``2 g0``, so the realized contraction factor on that window is
    at most ``r (2 gz + 4 g0)``; the window is contraction-safe when this
    bound is at most 1/2.  The accepted ball radius is ``M = 2 h`` with
    ``h`` the largest recorded gate value ``gz + g0`` below the first
    unsafe member (ordered by gate value), and the returned constant is
    ``1/(6 M)``.

    The window population is the solver's operating regime: jump-noise
    shifted paths at the reference noise scale across the window-length
    ladder, with continuation-produced restart states folded in and
    scaled to spread gate values over the range the continuation
    encounters, plus zero-noise decaying states at the run-preset
    amplitudes.  The result is a regime constant, not a universal bound;
    window acceptance is additionally guarded at run time by the measured
    per-iteration contraction ratios, which must stay below 0.6 on every
    accepted window.
    """
    from .noise import JumpNoiseModel, MarkLaw, sample_jumps, stochastic_convolution
    from .solver import picard_map, duhamel, decay_path
    from .nonlinear import advection_path

    members: list[tuple[float, float]] = []  # (gate value, factor bound)

    def visit(zhat):
        sweep0 = duhamel(advection_path(zhat) * (-1.0))
        gz = l4l4_norm(zhat)
        g0 = l4l4_norm(sweep0)
        scale = gz + g0
        zero = FieldPath.zeros(zhat.grid, zhat.tgrid)
        y_a = sweep0
        y_b = picard_map(y_a, zhat)
        # Probe pairs must be well separated, else the ratio only samples
        # floating-point noise (e.g. fields whose self-advection vanishes).
        probes = []
        if l4l4_norm(y_a - y_b) > 1e-8 * scale:
            probes.append((y_a, y_b))
        if l4l4_norm(y_a) > 1e-8 * scale:
            probes.append((y_a, y_a * 0.5))
            probes.append((zero, y_b))
        rough = sweep_forcing_path(
            zhat.grid, rng, zhat.tgrid, slope=1.0, refresh=max(2, zhat.tgrid.m // 4)
        )
        rough = rough * (0.2 * scale / max(l4l4_norm(rough), 1e-300))
        smooth = duhamel(rough)
        smooth = smooth * (0.2 * scale / max(l4l4_norm(smooth), 1e-300))
        probes.append((rough, rough * 0.5))
        probes.append((smooth, zero))
        r = 0.0
        for y1, y2 in probes:
            den = (l4l4_norm(y1 + zhat) + l4l4_norm(y2 + zhat)) * l4l4_norm(y1 - y2)
            if den > 0:
                num = l4l4_norm(picard_map(y1, zhat) - picard_map(y2, zhat))
                r = max(r, num / den)
        members.append((gz + g0, r * (2.0 * gz + 4.0 * g0)))

    grid = Grid(64)
    model = JumpNoiseModel(
        grid, rate=10.0, mark_law=MarkLaw.symmetric_two_point(),
        gamma=1.5, sigma=0.5, alpha=0.1, profile_seed=CALIBRATION_SEED,
    )
    full = PathGrid(0.0, 1.0, 500)
    lengths = (8, 32, 125)
    for i in range(trials):
        rec = sample_jumps(model, 1.0, int(rng.integers(2**62)))
        z = stochastic_convolution(model, rec, full)
        length = lengths[i % len(lengths)]
        start = int(rng.integers(0, full.m - length - 1))
        window = z.sub(start, start + length)
        zhat = FieldPath(grid, window.tgrid, window.coeffs.copy())
        # Restart states of the kind the continuation produces (the
        # reached solution value, noise-scale), spread over amplitudes so
        # the recorded gate values cover the range windows can take.
        pick = int(rng.integers(0, full.m))
        state = z.coeffs[pick] + 0.2 * random_field(grid, rng, slope=1.5).coeffs
        state = state * (0.3, 1.0, 1.8, 2.6)[i % 4]
        decay = np.exp(-grid.ksq * window.tgrid.dt)
        folded = state.copy()
        for j in range(length + 1):
            zhat.coeffs[j] += folded
            folded = folded * decay
        visit(zhat)

    # Zero-noise members: decaying states at the run-preset amplitudes.
    grid_s = Grid(32)
    for horizon, steps in ((0.25, 16), (1.0, 32)):
        tgrid = PathGrid(0.0, horizon, steps)
        for amp in (0.25, 0.5):
            visit(decay_path(taylor_green(grid_s, amp), tgrid))
            state = random_field(grid_s, rng, slope=1.5)
            scale = amp / max(lp_norm(state, 4), 1e-30)
            visit(decay_path(state * scale, tgrid))

    members.sort()
    half = 0.0
    # Target factor 0.4 rather than the guaranteed 1/2: the headroom
    # absorbs fresh windows outside the sweep, keeping measured run-time
    # ratios clear of the 0.6 acceptance limit.
    for gate, factor_bound in members:
        if factor_bound > 0.4:
            break
        half = gate
    if half <= 0:
        raise RuntimeError("no contraction-safe window in the iteration sweep")
    return 1.0 / (12.0 * half)


def calibrate(
    seed: int = CALIBRATION_SEED,
    n_samples: int = CALIBRATION_SAMPLES,
    grid_n: int = 32,
    alpha: float = 0.1,
) -> FrozenConstants:
    """Run every sweep and return the frozen constants.

    Deterministic in ``seed``; the default invocation reproduces
    :data:`DEFAULT_CONSTANTS`.
    """
    if n_samples < 1000:
        raise ValueError("calibration needs at least 1000 samples")
    rng = np.random.default_rng(seed)
    c_b, c_gn, c_emb, c_interp = _holder_gn_sweep(rng, n_samples, grid_n)
    c_dul = _duhamel_sweep(rng, max(200, n_samples // 40), grid_n)
    c_smooth4 = _smoothing_sweep(rng, max(100, n_samples // 100), grid_n, alpha)
    c_prime = _iteration_lipschitz_sweep(rng, max(24, n_samples // 400))
    return FrozenConstants(
        c_b=c_b,
        c_gn=c_gn,
        c_emb=c_emb,
        c_interp=c_interp,
        c_dul=c_dul,
        c_prime=c_prime,
        c_smooth4=c_smooth4,
        alpha=alpha,
        seed=int(seed),
        n_samples=int(n_samples),
    )


# Frozen output of calibrate() at the defaults; regenerate with
#   jumpns calibrate --seed 20260808 --samples 10000
# (tests/test_calibration.py re-derives these from the same seed).
DEFAULT_CONSTANTS = FrozenConstants(
    c_b=0.33129846905250715,
    c_gn=0.44654540499286566,
    c_emb=0.4613810530204922,
    c_interp=1.0000000000000002,
    c_dul=1.2680415310172743,
    c_prime=0.014538237437526287,
    c_smooth4=0.26685919092860627,
    alpha=0.1,
    seed=CALIBRATION_SEED,
    n_samples=CALIBRATION_SAMPLES,
)
