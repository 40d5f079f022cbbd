"""Command-line interface.

Verbs: ``calibrate``, ``run``, ``ensemble``, ``audit <trajectory.csv>``,
``version``.  Exit codes: 0 success, 2 configuration error, 3 audit
failure, 4 non-convergence (window selection, iteration or blow-up).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields as dc_fields
from pathlib import Path

from . import __version__
from .config import ConfigError, SolverConfig
from .calibration import CALIBRATION_SEED, CALIBRATION_SAMPLES, FrozenConstants


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value configuration file")
    for f in dc_fields(SolverConfig):
        flag = "--" + f.name.replace("_", "-")
        parser.add_argument(flag, dest=f.name, default=None)


def _load_config(args) -> SolverConfig:
    overrides = {
        f.name: getattr(args, f.name)
        for f in dc_fields(SolverConfig)
        if getattr(args, f.name, None) is not None
    }
    if args.config:
        config = SolverConfig.from_file(args.config, overrides)
    else:
        config = SolverConfig.from_dict(overrides)
    return config.validate()


def _load_constants(args) -> FrozenConstants | None:
    if getattr(args, "constants", None):
        return FrozenConstants.from_json(Path(args.constants).read_text())
    return None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jumpns",
        description=(
            "Sample-path solver for 2D incompressible Navier-Stokes with "
            "compensated Poisson jump forcing, with built-in inequality "
            "audits"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_cal = sub.add_parser("calibrate", help="run the constant sweeps")
    p_cal.add_argument("--seed", type=int, default=CALIBRATION_SEED)
    p_cal.add_argument("--samples", type=int, default=CALIBRATION_SAMPLES)
    p_cal.add_argument("--out", default="constants.json")

    p_run = sub.add_parser("run", help="solve one sample path")
    _add_config_flags(p_run)
    p_run.add_argument("--constants", help="constants file from 'calibrate'")
    p_run.add_argument("--path-index", type=int, default=0)

    p_ens = sub.add_parser("ensemble", help="solve n-paths independent paths")
    _add_config_flags(p_ens)
    p_ens.add_argument("--constants", help="constants file from 'calibrate'")

    p_aud = sub.add_parser("audit", help="re-check a written trajectory")
    p_aud.add_argument("trajectory", help="trajectory.csv from a run")
    p_aud.add_argument("--constants", help="constants file from 'calibrate'")

    sub.add_parser("version", help="print the package version")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    from .runner import (
        AuditError,
        audit_trajectory,
        calibrate_to_file,
        run_ensemble,
        run_single,
        write_ensemble_csv,
    )
    from .solver import NonConvergenceError, WindowSelectionError
    from .verify import BlowUpError

    try:
        if args.command == "version":
            print(__version__)
            return 0
        if args.command == "calibrate":
            constants = calibrate_to_file(args.out, args.seed, args.samples)
            print(f"wrote {args.out}")
            print(constants.to_json())
            return 0
        if args.command == "run":
            config = _load_config(args)
            result = run_single(
                config, constants=_load_constants(args), path_index=args.path_index
            )
            rep = result.report
            print(
                f"path seed {result.seed}: windows={len(rep.windows)} "
                f"iterations={rep.iterations} "
                f"max_ratio={max(rep.contraction_ratios, default=0.0):.3f} "
                f"residual={rep.residual_max:.3e} ||u||={rep.u_l4l4:.4f}"
            )
            for name, f in sorted(result.files.items()):
                print(f"  {name}: {f}")
            return 0
        if args.command == "ensemble":
            config = _load_config(args)
            result = run_ensemble(config, constants=_load_constants(args))
            outdir = Path(config.outdir)
            outdir.mkdir(parents=True, exist_ok=True)
            csv = outdir / "ensemble.csv"
            write_ensemble_csv(csv, result)
            print(
                f"{result.n_paths} paths: "
                f"moment ratio {result.burkholder_ratio:.4f} "
                f"(lhs {result.burkholder_lhs:.4f} +- {result.burkholder_se:.4f}, "
                f"rhs {result.burkholder_rhs:.4f}); "
                f"||u|| mean {result.mean_u_l4l4:.4f} +- {result.ci_u_l4l4:.4f}"
            )
            print(f"  per-path table: {csv}")
            return 0
        if args.command == "audit":
            from .fieldio import read_trajectory_csv

            columns = read_trajectory_csv(args.trajectory)
            margins = audit_trajectory(columns, _load_constants(args))
            for name, value in sorted(margins.items()):
                print(f"{name}: relative margin {value:.3e}")
            print("all audits passed")
            return 0
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except AuditError as err:
        print(f"{err}", file=sys.stderr)
        return 3
    except (NonConvergenceError, WindowSelectionError, BlowUpError) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return 4
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
