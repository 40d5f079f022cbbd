"""Independent oracles and inequality auditors.

The IMEX Euler reference solver discretizes the same dynamics with a
different time scheme (explicit convection, exact viscous factor, jumps
applied at the nearest grid node), so agreement with the fixed-point
solver is a genuine cross-method check.  The audit functions evaluate the
energy, Gronwall and norm-equivalence inequalities on solved paths with
the frozen calibration constants, returning margins (bound minus value;
negative means violated beyond slack).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .fields import SpectralField, VOLUME
from .nonlinear import advection_path_coeffs, trilinear
from .noise import JumpNoiseModel, JumpRecord
from .paths import (
    FieldPath,
    PathGrid,
    l4l4_norm,
    linf_h_norm,
    l2v_norm,
    l2vprime_norm,
    node_grad_l2_norms,
    node_l2_norms,
    node_lp_norms,
    node_stokes_l2_norms,
    rect_integral,
)
from .spectral import fractional_power_apply, grad_l2_norm, lp_norm

__all__ = [
    "BlowUpError",
    "OracleConfig",
    "imex_oracle",
    "subsample",
    "relative_l4l4_gap",
    "energy_audit",
    "gronwall_audit",
    "lemma_sob1_audit",
    "duhamel_bound_audit",
    "sobolev_embedding_audit",
    "NormReport",
]


class BlowUpError(RuntimeError):
    """The reference integrator produced a non-finite state."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


@dataclass(frozen=True)
class OracleConfig:
    """Reference-integrator settings.

    ``dt`` should be at most half the fixed-point solver's step so that the
    cross-method gap is dominated by the coarser scheme.
    """

    dt: float
    scheme: str = "imex_euler"

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("oracle step must be positive")
        if self.scheme != "imex_euler":
            raise ValueError(f"unknown oracle scheme {self.scheme!r}")


def imex_oracle(
    model: JumpNoiseModel,
    record: JumpRecord,
    u0: SpectralField,
    horizon: float,
    cfg: OracleConfig,
) -> FieldPath:
    """Reference path: semi-implicit Euler with node-snapped jumps.

    Between jumps: ``u <- exp(-dt A)(u - dt (B(u, u) + mean_drift))`` with
    the compensator drift treated explicitly; each jump adds the mark's
    profile at the nearest grid node not earlier than the jump time, so
    any node carries exactly the jumps that have occurred by then (a
    backward snap would disagree with the exact convolution by a whole
    jump at one node, polluting path-norm comparisons at first order).
    Raises :class:`BlowUpError` on a non-finite state, reporting the time.
    """
    g = model.grid
    m = int(round(horizon / cfg.dt))
    if m < 2:
        raise ValueError("oracle grid needs at least 2 steps")
    tgrid = PathGrid(0.0, horizon, m)
    dt = tgrid.dt
    decay = np.exp(-g.ksq * dt)

    jumps_at: dict[int, np.ndarray] = {}
    for t_i, z_i in zip(record.times, record.marks):
        idx = min(max(int(np.ceil(t_i / dt - 1e-12)), 1), m)
        contrib = model.profile.coeffs * z_i
        jumps_at[idx] = jumps_at.get(idx, 0) + contrib

    mean_drift = model.mean_jump_field().coeffs

    coeffs = np.empty((m + 1, 2, g.n, g.n), np.complex128)
    coeffs[0] = u0.coeffs * g.dealias_mask
    state = coeffs[0].copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(m):
            b = advection_path_coeffs(g, state[None])[0]
            b += mean_drift
            b *= dt
            state -= b
            state *= decay
            if j + 1 in jumps_at:
                state += jumps_at[j + 1]
            if (j % 64 == 0 or j == m - 1) and not np.all(np.isfinite(state)):
                raise BlowUpError(
                    f"reference integrator blew up near t={tgrid.times[j + 1]:.4f}",
                    time=float(tgrid.times[j + 1]),
                )
            coeffs[j + 1] = state
    return FieldPath(g, tgrid, coeffs)


def subsample(path: FieldPath, stride: int) -> FieldPath:
    """Every ``stride``-th node as a path on the coarsened grid."""
    if path.tgrid.m % stride != 0:
        raise ValueError("stride must divide the number of steps")
    tg = PathGrid(path.tgrid.t0, path.tgrid.t1, path.tgrid.m // stride)
    return FieldPath(path.grid, tg, path.coeffs[::stride])


def relative_l4l4_gap(candidate: FieldPath, reference: FieldPath) -> float:
    """||candidate - reference|| / ||reference|| in the discrete L^4L^4 norm."""
    if candidate.tgrid.m != reference.tgrid.m:
        raise ValueError("paths must share the comparison grid")
    diff = FieldPath(
        candidate.grid, candidate.tgrid, candidate.coeffs - reference.coeffs
    )
    denom = l4l4_norm(reference)
    return l4l4_norm(diff) / denom if denom > 0 else l4l4_norm(diff)


# ---------------------------------------------------------------------------
# Inequality audits
# ---------------------------------------------------------------------------


@dataclass
class EnergyAuditResult:
    margin: float
    worst_node: int
    lhs: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)


def energy_audit(
    y: FieldPath,
    zhat: FieldPath,
    c1: float,
    c2: float,
    kappa: float = 10.0,
) -> EnergyAuditResult:
    """Discrete check of the differential energy inequality.

    At each step the forward difference of ||Y||_H^2 is tested against

        (||Y_{j+1}||^2 - ||Y_j||^2) / (2 dt) + 1/2 ||Y_j||_V^2
            <=  1/2 c1 ||Y_j||_H^2 ||Zhat_j||_4^4
              + 1/2 c2 ||Zhat_j||_4^2  +  slack_j,

    where the slack covers the forward-difference and quadrature-weight
    errors of the discrete dynamics:

        slack_j = kappa * dt * ( (||dY_j||_2 / dt)^2 + ||A Y_j||_2^2
                                 + ||grad dY_j||_2 / dt * ||grad Y_j||_2 ).

    Returns the minimum margin (rhs + slack - lhs) over the steps.
    """
    if y.tgrid != zhat.tgrid:
        raise ValueError("paths must share the time grid")
    dt = y.tgrid.dt
    y_l2 = node_l2_norms(y)
    y_v = node_grad_l2_norms(y)
    y_a = node_stokes_l2_norms(y)
    z_l4 = node_lp_norms(zhat, 4)
    dcoeffs = y.coeffs[1:] - y.coeffs[:-1]
    d_l2 = np.sqrt(VOLUME * np.sum(np.abs(dcoeffs) ** 2, axis=(1, 2, 3)))
    d_v = np.sqrt(
        VOLUME * np.sum(y.grid.ksq * np.abs(dcoeffs) ** 2, axis=(1, 2, 3))
    )
    lhs = (y_l2[1:] ** 2 - y_l2[:-1] ** 2) / (2.0 * dt) + 0.5 * y_v[:-1] ** 2
    rhs = 0.5 * c1 * y_l2[:-1] ** 2 * z_l4[:-1] ** 4 + 0.5 * c2 * z_l4[:-1] ** 2
    slack = kappa * dt * ((d_l2 / dt) ** 2 + y_a[:-1] ** 2 + (d_v / dt) * y_v[:-1])
    margins = rhs + slack - lhs
    worst = int(np.argmin(margins))
    return EnergyAuditResult(float(margins[worst]), worst, lhs, rhs + slack)


@dataclass
class GronwallAuditResult:
    sup_margin: float
    vbudget_margin: float
    bound: np.ndarray = field(repr=False)
    value: np.ndarray = field(repr=False)


def gronwall_audit(
    y: FieldPath, zhat: FieldPath, c1: float, c2: float
) -> GronwallAuditResult:
    """Integrated energy bound and the Dirichlet-norm budget.

    Checks, with rectangle-rule integrals on the shared grid,

        ||Y(t)||_H^2 <= c2 int_0^t exp(c1 int_s^t ||Zhat||_4^4 dr)
                                  ||Zhat(s)||_4^4 ds        (all nodes t)

    and

        int_0^T ||Y||_V^2 dt <= c1 sup_t ||Y||_H^2 int_0^T ||Zhat||_4^4 dt
                                + c2 int_0^T ||Zhat||_4^2 dt.

    Returns the worst pointwise margin of the first bound and the margin
    of the second.
    """
    if y.tgrid != zhat.tgrid:
        raise ValueError("paths must share the time grid")
    dt = y.tgrid.dt
    y_l2 = node_l2_norms(y)
    z_l4 = node_lp_norms(zhat, 4)
    z4 = z_l4**4
    # G_j = int_0^{t_j} ||Zhat||_4^4, left rectangles.
    big_g = np.concatenate([[0.0], np.cumsum(z4[:-1]) * dt])
    # bound_j = c2 * exp(c1 G_j) * sum_{s<j} dt exp(-c1 G_s) z4_s
    weights = np.exp(-c1 * big_g[:-1]) * z4[:-1] * dt
    partial = np.concatenate([[0.0], np.cumsum(weights)])
    bound = c2 * np.exp(c1 * big_g) * partial
    value = y_l2**2
    sup_margin = float(np.min(bound - value))

    y_v = node_grad_l2_norms(y)
    v_budget = rect_integral(y_v**2, dt)
    rhs = c1 * float(np.max(value)) * rect_integral(z4, dt) + c2 * rect_integral(
        z_l4**2, dt
    )
    return GronwallAuditResult(sup_margin, float(rhs - v_budget), bound, value)


def lemma_sob1_audit(v: FieldPath, c_sob1: float) -> float:
    """Margin of the space-time norm equivalence used by the iteration.

    Checks ``int ||v||_4^4 dt <= c_sob1 (||v||_{LinfH}^4 + ||v||_{L2V}^4)``.
    """
    lhs = rect_integral(node_lp_norms(v, 4) ** 4, v.tgrid.dt)
    rhs = c_sob1 * (linf_h_norm(v) ** 4 + l2v_norm(v) ** 4)
    return float(rhs - lhs)


def duhamel_bound_audit(f: FieldPath, c_dul: float) -> float:
    """Margin of the convolution stability bound.

    Checks ``||Phi_f||_{LinfH} + ||Phi_f||_{L2V} <= c_dul ||f||_{L2V'}``
    for the exponential-integrator convolution of the forcing path.
    """
    from .solver import duhamel

    phi = duhamel(f)
    lhs = linf_h_norm(phi) + l2v_norm(phi)
    return float(c_dul * l2vprime_norm(f) - lhs)


def sobolev_embedding_audit(fields) -> tuple[float, float]:
    """Extremal ratios of the half-order embedding and interpolation.

    Returns ``(max ||v||_4 / ||A^{1/4} v||_2,
               max ||A^{1/4} v||_2 / (||grad v||_2^{1/2} ||v||_2^{1/2}))``
    over the supplied mean-zero fields.  The second ratio equals 1 exactly
    on any single Fourier shell.
    """
    emb = 0.0
    interp = 0.0
    for v in fields:
        half = lp_norm(fractional_power_apply(v, 0.5), 2)
        l4 = lp_norm(v, 4)
        l2 = lp_norm(v, 2)
        grad = grad_l2_norm(v)
        if half > 0:
            emb = max(emb, l4 / half)
        denom = np.sqrt(grad * l2)
        if denom > 0:
            interp = max(interp, half / denom)
    return float(emb), float(interp)


def chain_rule_identity_gap(
    y: SpectralField, zhat: SpectralField
) -> tuple[float, float]:
    """|b(Y+Z, Y+Z, Y) + b(Y, Y, Z) + b(Z, Y, Z)| and its natural scale.

    The cancellation b(u, v, v) = 0 reduces the convection pairing in the
    energy identity to the two cross terms; this evaluates both sides by
    quadrature and returns (gap, scale).
    """
    w = y + zhat
    lhs = trilinear(w, w, y)
    t1 = trilinear(y, y, zhat)
    t2 = trilinear(zhat, y, zhat)
    scale = abs(lhs) + abs(t1) + abs(t2)
    return abs(lhs + t1 + t2), scale


# ---------------------------------------------------------------------------
# Norm report
# ---------------------------------------------------------------------------

SCHEMA_VERSION = 1


@dataclass
class NormReport:
    """Everything a run asserts about one path (or one ensemble).

    Margins are (bound - value); the audits pass when every margin clears
    its tolerance.  ``burkholder_*`` entries are ensemble statistics and
    stay None for single-path reports.
    """

    schema_version: int = SCHEMA_VERSION
    constants: dict = field(default_factory=dict)
    contraction_ratios: list = field(default_factory=list)
    iterations: int = 0
    windows: list = field(default_factory=list)
    max_iterate_norm: float = 0.0
    gate_values: list = field(default_factory=list)
    energy_margin: float = float("inf")
    gronwall_margin: float = float("inf")
    vbudget_margin: float = float("inf")
    sob1_margin: float = float("inf")
    smoothing_margin: float = float("inf")
    residual_max: float = 0.0
    u_l4l4: float = 0.0
    z_l4l4: float = 0.0
    zhat_l4l4: float = 0.0
    burkholder_lhs: float | None = None
    burkholder_rhs: float | None = None
    burkholder_ratio: float | None = None
    burkholder_se: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "NormReport":
        data = json.loads(text)
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(
                f"unsupported report schema {data.get('schema_version')!r}"
            )
        return cls(**data)

    def diff(self, other: "NormReport", rel_tol: float = 1e-9) -> list[str]:
        """Field-by-field comparison; returns human-readable mismatches."""
        mine = asdict(self)
        theirs = asdict(other)
        out = []
        for key in sorted(mine):
            a, b = mine[key], theirs.get(key)
            if not _close(a, b, rel_tol):
                out.append(f"{key}: {a!r} != {b!r}")
        return out


def _close(a, b, rel_tol) -> bool:
    if isinstance(a, float) and isinstance(b, float):
        if np.isnan(a) and np.isnan(b):
            return True
        scale = max(abs(a), abs(b), 1e-300)
        return abs(a - b) <= rel_tol * scale or a == b
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(
            _close(x, y, rel_tol) for x, y in zip(a, b)
        )
    if isinstance(a, dict) and isinstance(b, dict):
        return set(a) == set(b) and all(_close(a[k], b[k], rel_tol) for k in a)
    return a == b
