"""Run orchestration: single paths, ensembles, audits, persistence."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import DEFAULT_CONSTANTS, MARGIN, FrozenConstants, calibrate
from .config import ConfigError, RunManifest, SolverConfig
from .fields import Grid, SpectralField, random_field, taylor_green, zero_field
from .fieldio import (
    format_float,
    write_field,
    write_trajectory_csv,
)
from .noise import (
    JumpNoiseModel,
    MarkLaw,
    sample_jumps,
    smoothing_integral_ratio,
    stochastic_convolution,
)
from .paths import (
    FieldPath,
    PathGrid,
    l4l4_norm,
    node_grad_l2_norms,
    node_l2_norms,
    node_lp_norms,
)
from .solver import MildSolution, continue_solution, mild_residual_series
from .spectral import SobolevOrder, sobolev_norm
from .verify import NormReport, energy_audit, gronwall_audit, lemma_sob1_audit

__all__ = [
    "AuditError",
    "RunResult",
    "EnsembleResult",
    "build_model",
    "build_initial_state",
    "path_seed",
    "run_single",
    "run_ensemble",
    "audit_trajectory",
]

#: Relative tolerance for audit margins: margin >= -MARGIN_TOL * scale.
MARGIN_TOL = 1e-6


class AuditError(RuntimeError):
    """A solved path violated one of the audited inequalities."""

    def __init__(self, invariant: str, detail: str = ""):
        super().__init__(f"audit failed: {invariant}" + (f" ({detail})" if detail else ""))
        self.invariant = invariant


def path_seed(master: int, index: int) -> int:
    """Derived per-path seed: counter-keyed split of the master seed."""
    ss = np.random.SeedSequence(master, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


def build_model(config: SolverConfig, grid: Grid) -> JumpNoiseModel:
    law = {
        "two-point": MarkLaw.symmetric_two_point(),
        "uniform": MarkLaw.uniform(-1.0, 1.0),
        "gaussian": MarkLaw.truncated_gaussian(3.0),
    }[config.mark_law]
    return JumpNoiseModel(
        grid,
        rate=config.rate,
        mark_law=law,
        gamma=config.gamma,
        sigma=config.sigma,
        alpha=config.alpha,
        profile_seed=config.seed,
    )


def build_initial_state(config: SolverConfig, grid: Grid) -> SpectralField:
    if config.u0 == "zero":
        return zero_field(grid)
    if config.u0 == "taylor-green":
        return taylor_green(grid, config.u0_amplitude)
    rng = np.random.default_rng(config.u0_seed)
    state = random_field(grid, rng, slope=1.5, solenoidal=True)
    norm = sobolev_norm(state, SobolevOrder(-2.0 * config.alpha, 4))
    if norm == 0:
        return state
    return state * (config.u0_amplitude / norm)


@dataclass
class RunResult:
    solution: MildSolution
    report: NormReport
    record_json: str
    columns: dict
    files: dict = field(default_factory=dict)
    seed: int = 0


def _audit_solution(
    sol: MildSolution,
    model: JumpNoiseModel,
    record,
    constants: FrozenConstants,
    z: FieldPath,
    noise_ceiling: float,
) -> tuple[NormReport, dict]:
    """Evaluate every inequality on the solved path; raise on violation."""
    tg = sol.tgrid
    report = NormReport()
    report.constants = {
        "c_b": constants.c_b,
        "c_gn": constants.c_gn,
        "c_emb": constants.c_emb,
        "c_interp": constants.c_interp,
        "c_dul": constants.c_dul,
        "c_prime": constants.c_prime,
        "c_chain": constants.c_chain,
        "c1": constants.c1,
        "c2": constants.c2,
        "m_ball": constants.m_ball,
        "c_sob1": constants.c_sob1,
        "margin_factor": MARGIN,
    }

    u_l2 = node_l2_norms(sol.u)
    u_l4 = node_lp_norms(sol.u, 4)
    y_l2 = node_l2_norms(sol.y)
    y_l4 = node_lp_norms(sol.y, 4)
    grad_y = node_grad_l2_norms(sol.y)
    zhat_l2 = node_l2_norms(sol.zhat)
    zhat_l4 = node_lp_norms(sol.zhat, 4)
    z_l4 = node_lp_norms(z, 4)
    segment_ix = np.zeros(tg.m + 1, dtype=int)
    for s_ix, seg in enumerate(sol.segments):
        segment_ix[seg.start : seg.stop + 1] = s_ix

    for name, series in (
        ("u", u_l4),
        ("Y", y_l4),
        ("Zhat", zhat_l4),
        ("Z", z_l4),
    ):
        if not np.all(np.isfinite(series)):
            raise AuditError("pathwise finiteness", f"{name} norms not finite")

    report.u_l4l4 = l4l4_norm(sol.u)
    report.z_l4l4 = l4l4_norm(z)
    report.zhat_l4l4 = l4l4_norm(sol.zhat)
    if report.z_l4l4**4 > noise_ceiling:
        raise AuditError(
            "noise-path ceiling",
            f"int ||Z||_4^4 = {report.z_l4l4**4:.3e} > {noise_ceiling:.3e}",
        )

    # Contraction bookkeeping.
    report.contraction_ratios = [float(r) for r in sol.all_ratios]
    report.iterations = sol.total_iterations
    report.windows = [seg.stop - seg.start for seg in sol.segments]
    report.gate_values = [float(seg.gate.value) for seg in sol.segments]
    if report.contraction_ratios and max(report.contraction_ratios) > 0.6:
        raise AuditError(
            "contraction ratio",
            f"max measured ratio {max(report.contraction_ratios):.3f} > 0.6",
        )
    iterate_norms = [l4l4_norm(seg.y) for seg in sol.segments]
    report.max_iterate_norm = float(max(iterate_norms)) if iterate_norms else 0.0
    if report.max_iterate_norm > constants.m_ball:
        raise AuditError(
            "iterate ball",
            f"||Y|| = {report.max_iterate_norm:.3f} > M = {constants.m_ball:.3f}",
        )

    # Segment-wise inequality audits at the frozen constants.
    c1, c2 = constants.c1, constants.c2
    energy_m = np.inf
    gron_m = np.inf
    vbud_m = np.inf
    sob1_m = np.inf
    for seg in sol.segments:
        res_e = energy_audit(seg.y, seg.zhat, c1, c2)
        scale_e = max(np.max(np.abs(res_e.lhs)), np.max(np.abs(res_e.rhs)), 1e-300)
        energy_m = min(energy_m, res_e.margin / scale_e)
        res_g = gronwall_audit(seg.y, seg.zhat, c1, c2)
        scale_g = max(float(np.max(res_g.bound)), float(np.max(res_g.value)), 1e-300)
        gron_m = min(gron_m, res_g.sup_margin / scale_g)
        vbud_scale = max(abs(res_g.vbudget_margin), 1e-300)
        seg_vv = node_grad_l2_norms(seg.y)
        vbud_scale = max(
            float(np.sum(seg_vv[:-1] ** 2) * seg.y.tgrid.dt), vbud_scale
        )
        vbud_m = min(vbud_m, res_g.vbudget_margin / vbud_scale)
        sob1_margin = lemma_sob1_audit(seg.y, MARGIN * constants.c_sob1)
        sob1_scale = max(
            MARGIN
            * constants.c_sob1
            * (
                float(np.max(node_l2_norms(seg.y))) ** 4
                + (float(np.sum(seg_vv[:-1] ** 2)) * seg.y.tgrid.dt) ** 2
            ),
            1e-300,
        )
        sob1_m = min(sob1_m, sob1_margin / sob1_scale)
    report.energy_margin = float(energy_m)
    report.gronwall_margin = float(gron_m)
    report.vbudget_margin = float(vbud_m)
    report.sob1_margin = float(sob1_m)
    for name, value in (
        ("energy inequality", report.energy_margin),
        ("gronwall bound", report.gronwall_margin),
        ("dirichlet-norm budget", report.vbudget_margin),
        ("space-time norm equivalence", report.sob1_margin),
    ):
        if not np.isfinite(value) or value < -MARGIN_TOL:
            raise AuditError(name, f"relative margin {value:.3e}")

    # Semigroup smoothing of the jump profile (per unit mark; the ratio is
    # mark-independent because the profile is fixed).
    if model.rate > 0 and abs(model.alpha - constants.alpha) < 1e-12:
        ratio = smoothing_integral_ratio(model, tg)
        bound = MARGIN * constants.smoothing_time_constant(tg.t1 - tg.t0)
        report.smoothing_margin = float((bound - ratio) / bound)
        if report.smoothing_margin < -MARGIN_TOL:
            raise AuditError(
                "semigroup smoothing",
                f"decay-integral ratio {ratio:.3e} > bound {bound:.3e}",
            )

    columns = {
        "t": tg.times,
        "u_l2": u_l2,
        "u_l4": u_l4,
        "grad_y_l2": grad_y,
        "y_l2": y_l2,
        "z_l4": z_l4,
        "y_l4": y_l4,
        "zhat_l2": zhat_l2,
        "zhat_l4": zhat_l4,
        "segment": segment_ix,
    }
    return report, columns


def run_single(
    config: SolverConfig,
    constants: FrozenConstants | None = None,
    path_index: int = 0,
    write_files: bool = True,
) -> RunResult:
    """One sample path: sample jumps, solve, audit, persist.

    Raises :class:`AuditError` (or the solver's convergence errors) on any
    violated invariant; on success the trajectory CSV, the report JSON, the
    jump record and the manifest land in the output directory.
    """
    config.validate()
    constants = constants or DEFAULT_CONSTANTS
    t_start = time.perf_counter()
    grid = Grid(config.n)
    tgrid = PathGrid(0.0, config.horizon, config.steps)
    model = build_model(config, grid)
    u0 = build_initial_state(config, grid)
    seed = path_seed(config.seed, path_index)
    record = sample_jumps(model, config.horizon, seed)

    sol = continue_solution(
        model,
        record,
        u0,
        config.horizon,
        tgrid,
        m_ball=constants.m_ball,
        tol=config.tol,
        max_iter=config.max_iter,
    )
    z = stochastic_convolution(model, record, tgrid)
    report, columns = _audit_solution(
        sol, model, record, constants, z, config.noise_ceiling
    )
    sol.norms = report
    residual = mild_residual_series(sol, model, record, z=z)
    if not np.all(np.isfinite(residual)):
        raise AuditError("mild residual", "non-finite residual")
    columns["residual"] = residual
    report.residual_max = float(np.max(residual))

    files: dict = {}
    if write_files:
        outdir = Path(config.outdir) / f"path{path_index:04d}"
        outdir.mkdir(parents=True, exist_ok=True)
        traj = outdir / "trajectory.csv"
        write_trajectory_csv(traj, columns)
        rep = outdir / "report.json"
        rep.write_text(report.to_json() + "\n")
        rec = outdir / "record.json"
        rec.write_text(record.to_json() + "\n")
        files = {"trajectory": str(traj), "report": str(rep), "record": str(rec)}
        if config.snapshot_stride > 0:
            for j in range(0, tgrid.m + 1, config.snapshot_stride):
                snap = outdir / f"u_{j:06d}.jfld"
                write_field(snap, sol.u.field(j), solenoidal=True)
                files[f"snapshot_{j}"] = str(snap)
        manifest = RunManifest(
            config=config.to_dict(),
            config_hash=config.hash(),
            code_version=__version__,
            path_seeds=[seed],
            files=sorted(files.values()),
            timings={"wall_seconds": time.perf_counter() - t_start},
        )
        man = outdir / "manifest.json"
        man.write_text(manifest.to_json() + "\n")
        files["manifest"] = str(man)
    return RunResult(sol, report, record.to_json(), columns, files, seed)


def _path_summary(config_dict: dict, index: int, oracle_dt: float = 0.0) -> dict:
    """Worker entry: run one path and reduce it to plain scalars.

    With ``oracle_dt > 0`` the reference integrator is run on the same
    jump record and the relative path-norm gap is included.
    """
    config = SolverConfig(**config_dict)
    t0 = time.perf_counter()
    result = run_single(config, path_index=index, write_files=False)
    rep = result.report
    oracle_gap = float("nan")
    if oracle_dt > 0:
        from .noise import JumpRecord
        from .verify import OracleConfig, imex_oracle, relative_l4l4_gap, subsample

        record = JumpRecord.from_json(result.record_json)
        grid = result.solution.grid
        oracle = imex_oracle(
            build_model(config, grid),
            record,
            result.solution.u.field(0),
            config.horizon,
            OracleConfig(dt=oracle_dt),
        )
        stride = int(round(config.dt / oracle_dt))
        oracle_gap = relative_l4l4_gap(result.solution.u, subsample(oracle, stride))
    return {
        "index": index,
        "seed": result.seed,
        "jumps": _count_jumps(result.record_json),
        "oracle_gap": oracle_gap,
        "u_l4l4": rep.u_l4l4,
        "z_l4l4": rep.z_l4l4,
        "zhat_l4l4": rep.zhat_l4l4,
        "iterations": rep.iterations,
        "windows": len(rep.windows),
        "max_ratio": max(rep.contraction_ratios) if rep.contraction_ratios else 0.0,
        "max_iterate_norm": rep.max_iterate_norm,
        "energy_margin": rep.energy_margin,
        "gronwall_margin": rep.gronwall_margin,
        "vbudget_margin": rep.vbudget_margin,
        "sob1_margin": rep.sob1_margin,
        "smoothing_margin": rep.smoothing_margin,
        "residual_max": rep.residual_max,
        "wall_seconds": time.perf_counter() - t0,
    }


def _count_jumps(record_json: str) -> int:
    import json as _json

    return len(_json.loads(record_json)["times"])


@dataclass
class EnsembleResult:
    paths: list
    burkholder_lhs: float
    burkholder_se: float
    burkholder_rhs: float
    mean_u_l4l4: float
    ci_u_l4l4: float
    n_paths: int

    @property
    def burkholder_ratio(self) -> float:
        return self.burkholder_lhs / self.burkholder_rhs if self.burkholder_rhs else 0.0


def run_ensemble(
    config: SolverConfig,
    constants: FrozenConstants | None = None,
    oracle_dt: float = 0.0,
) -> EnsembleResult:
    """Run ``config.n_paths`` independent paths and aggregate.

    Any single-path failure aborts with the path's seed in the message.
    Results are reduced in path-index order whatever the worker count, so
    the aggregate is reproducible.  ``oracle_dt > 0`` adds a per-path
    cross-method gap against the reference integrator.
    """
    config.validate()
    if config.n_paths < 2:
        raise ConfigError("an ensemble needs n_paths >= 2")
    cfg = config.to_dict()
    indices = list(range(config.n_paths))
    summaries: list[dict | None] = [None] * config.n_paths
    try:
        if config.workers > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                for summary in pool.map(
                    _path_summary,
                    [cfg] * len(indices),
                    indices,
                    [oracle_dt] * len(indices),
                ):
                    summaries[summary["index"]] = summary
        else:
            for i in indices:
                summaries[i] = _path_summary(cfg, i, oracle_dt)
    except (AuditError, RuntimeError) as err:
        failed = sum(1 for s in summaries if s is not None)
        raise type(err)(
            f"{err} [path index {failed}, seed "
            f"{path_seed(config.seed, failed)}]"
        ) from err

    z_sq = np.array([s["z_l4l4"] ** 2 for s in summaries])
    u_norms = np.array([s["u_l4l4"] for s in summaries])
    grid = Grid(config.n)
    model = build_model(config, grid)
    rhs = model.assumption_integral(config.horizon)
    n = config.n_paths
    return EnsembleResult(
        paths=summaries,
        burkholder_lhs=float(z_sq.mean()),
        burkholder_se=float(z_sq.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
        burkholder_rhs=float(rhs),
        mean_u_l4l4=float(u_norms.mean()),
        ci_u_l4l4=float(1.96 * u_norms.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
        n_paths=n,
    )


ENSEMBLE_COLUMNS = (
    "index",
    "seed",
    "jumps",
    "oracle_gap",
    "u_l4l4",
    "z_l4l4",
    "zhat_l4l4",
    "iterations",
    "windows",
    "max_ratio",
    "max_iterate_norm",
    "energy_margin",
    "gronwall_margin",
    "vbudget_margin",
    "sob1_margin",
    "smoothing_margin",
    "residual_max",
)


def write_ensemble_csv(path, result: EnsembleResult) -> None:
    lines = [",".join(ENSEMBLE_COLUMNS)]
    for s in result.paths:
        row = []
        for c in ENSEMBLE_COLUMNS:
            v = s[c]
            row.append(str(v) if isinstance(v, (int, np.integer)) else format_float(v))
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def audit_trajectory(columns: dict, constants: FrozenConstants | None = None) -> dict:
    """Re-check the series-level inequalities on a written trajectory.

    Works from the norm columns alone (the differential energy audit needs
    field-level data and runs at solve time), re-evaluating the Gronwall
    bound, the Dirichlet budget and the space-time norm equivalence
    segment by segment.
    """
    constants = constants or DEFAULT_CONSTANTS
    c1, c2 = constants.c1, constants.c2
    t = columns["t"]
    dt = float(t[1] - t[0])
    for name in ("u_l2", "u_l4", "grad_y_l2", "y_l2", "z_l4", "residual"):
        if not np.all(np.isfinite(columns[name])):
            raise AuditError("pathwise finiteness", f"column {name}")
    segments = columns.get("segment")
    if segments is None:
        segments = np.zeros(len(t), dtype=int)
    gron = np.inf
    vbud = np.inf
    sob1 = np.inf
    for s_ix in np.unique(segments):
        sel = np.where(segments == s_ix)[0]
        lo, hi = sel[0], sel[-1]
        if hi - lo < 1:
            continue
        y2 = columns["y_l2"][lo : hi + 1] ** 2
        z4 = columns["zhat_l4"][lo : hi + 1] ** 4
        z2 = columns["zhat_l4"][lo : hi + 1] ** 2
        yv = columns["grad_y_l2"][lo : hi + 1]
        big_g = np.concatenate([[0.0], np.cumsum(z4[:-1]) * dt])
        weights = np.exp(-c1 * big_g[:-1]) * z4[:-1] * dt
        partial = np.concatenate([[0.0], np.cumsum(weights)])
        bound = c2 * np.exp(c1 * big_g) * partial
        scale = max(bound.max(), y2.max(), 1e-300)
        gron = min(gron, float(np.min(bound - y2)) / scale)
        lhs_v = float(np.sum(yv[:-1] ** 2) * dt)
        rhs_v = c1 * float(y2.max()) * float(np.sum(z4[:-1]) * dt) + c2 * float(
            np.sum(z2[:-1]) * dt
        )
        vbud = min(vbud, (rhs_v - lhs_v) / max(rhs_v, lhs_v, 1e-300))
        y4 = columns["y_l4"][lo : hi + 1] ** 4
        lhs_s = float(np.sum(y4[:-1]) * dt)
        rhs_s = (
            MARGIN
            * constants.c_sob1
            * (float(np.max(y2)) ** 2 + (float(np.sum(yv[:-1] ** 2)) * dt) ** 2)
        )
        sob1 = min(sob1, (rhs_s - lhs_s) / max(rhs_s, lhs_s, 1e-300))
    margins = {"gronwall": gron, "vbudget": vbud, "sob1": sob1}
    for name, value in margins.items():
        if value < -MARGIN_TOL:
            raise AuditError(name, f"relative margin {value:.3e}")
    return margins


def calibrate_to_file(path, seed: int, n_samples: int) -> FrozenConstants:
    constants = calibrate(seed=seed, n_samples=n_samples)
    Path(path).write_text(constants.to_json() + "\n")
    return constants
