"""
hullstate - Command-line entry point
Runs WLS Monte Carlo campaigns, interval estimates or both, and writes reports

Commands:
- hullstate run --net <file> --placement <file> --method {wls|interval|compare} ...
- hullstate run --scenario <file>
- hullstate status
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from bench_harness import emit_report, load_scenario, run
from config import config
from errors import HullstateError
from models import ComparisonReport, Scenario

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parent / "data"
EXIT_INPUT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hullstate",
        description="Interval and WLS state estimation benchmarks for radial distribution networks",
    )
    parser.add_argument("--log-level", default=None, help="Override logging.level from config.json")
    sub = parser.add_subparsers(dest="command", required=True)

    run_cmd = sub.add_parser("run", help="Run a benchmark scenario")
    run_cmd.add_argument("--scenario", type=Path, default=None,
                         help="Scenario document; replaces the scenario flags below")
    run_cmd.add_argument("--net", type=Path, default=DATA_DIR / "ieee34_mod.json", help="Network document")
    run_cmd.add_argument("--placement", type=Path, default=DATA_DIR / "feeder34_base.json", help="Placement document")
    run_cmd.add_argument("--method", choices=["wls", "interval", "compare"], default="compare")
    run_cmd.add_argument("--trials", type=int, default=1000, help="WLS Monte Carlo trials")
    run_cmd.add_argument("--seed", type=int, default=0, help="Base seed; trial i uses seed + i")
    run_cmd.add_argument("--noise-scada", type=float, default=None, help="SCADA max error as a share of the true value")
    run_cmd.add_argument("--noise-pseudo", type=float, default=None, help="Pseudo-measurement max error share")
    run_cmd.add_argument("--zero-noise", action="store_true", help="Use true values as measurements")
    run_cmd.add_argument("--load-scale", type=float, default=None, help="Multiply every load")
    run_cmd.add_argument("--dg-scale", type=float, default=1.0, help="Multiply every DG output")
    run_cmd.add_argument("--profile-band", type=float, nargs=2, metavar=("LO", "HI"), default=None,
                         help="Scale loads until the lowest |V| falls in [LO, HI]")
    run_cmd.add_argument("--dg-band", type=float, nargs=2, metavar=("LO", "HI"), default=None,
                         help="With --profile-band, also scale DG until the highest |V| falls in [LO, HI]")
    run_cmd.add_argument("--tol", type=float, default=None, help="Gauss-Newton ‖Δx‖∞ tolerance")
    run_cmd.add_argument("--max-iter", type=int, default=None, help="Gauss-Newton iteration cap")
    run_cmd.add_argument("--eps", type=float, default=None, help="Krawczyk stopping tolerance")
    run_cmd.add_argument("--repeats", type=int, default=None, help="Timed repeats of the interval solve")
    run_cmd.add_argument("--threads", type=int, default=None, help="Trial parallelism (overrides HULLSTATE_THREADS)")
    run_cmd.add_argument("--out", type=Path, default=None, help="Report file; stdout JSON when omitted")
    run_cmd.add_argument("--format", choices=["json", "csv"], default="json")

    sub.add_parser("status", help="Print the effective configuration")
    return parser


def scenario_from_args(args: argparse.Namespace) -> Scenario:
    return Scenario(
        net_path=args.net,
        placement_path=args.placement,
        method=args.method,
        trials=args.trials,
        base_seed=args.seed,
        load_scale=args.load_scale,
        dg_scale=args.dg_scale,
        profile_band=tuple(args.profile_band) if args.profile_band else None,
        dg_band=tuple(args.dg_band) if args.dg_band else None,
        noise_scada=args.noise_scada,
        noise_pseudo=args.noise_pseudo,
        zero_noise=args.zero_noise,
        wls_tol=args.tol,
        wls_max_iter=args.max_iter,
        eps=args.eps,
        timing_repeats=args.repeats,
        threads=args.threads,
    )


def print_summary(report, file=None):
    file = file or sys.stdout
    reports = report.reports if isinstance(report, ComparisonReport) else [report]
    print(f"\n📊 Scenario {report.scenario_hash}", file=file)
    print("=" * 40, file=file)
    for rep in reports:
        print(f"🔹 {rep.method}: MAE real {rep.mae_real:.3e}, imag {rep.mae_imag:.3e} p.u.", file=file)
        if rep.max_rmse_real is not None:
            print(f"   max RMSE real {rep.max_rmse_real:.3e}, imag {rep.max_rmse_imag:.3e} p.u. "
                  f"over {len(rep.trial_seeds)} trials", file=file)
        if rep.beta is not None:
            print(f"   β = {rep.beta:.4f}, {rep.krawczyk_iterations} Krawczyk iterations, "
                  f"hull radius ≤ {rep.hull_radius_max:.3e}", file=file)
        print(f"   ⏱️  {rep.solve_time_ms:.2f} ms per solve, redundancy {rep.redundancy:.3f}", file=file)
    if isinstance(report, ComparisonReport):
        print(f"⚖️  Time ratio interval / WLS trial: {report.time_ratio:.3f}", file=file)
    print("=" * 40, file=file)


def fail(category: str, exit_code: int, payload: dict) -> int:
    print(f"❌ {category} error: {payload.get('message', '')}", file=sys.stderr)
    print(json.dumps({"error": category, **payload}), file=sys.stderr)
    return exit_code


def cli(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    config.setup_logging(args.log_level)

    if args.command == "status":
        config.print_status()
        return 0

    try:
        scenario = load_scenario(args.scenario) if args.scenario else scenario_from_args(args)
    except ValidationError as e:
        return fail("input", EXIT_INPUT, {"type": "ValidationError", "message": str(e)})
    except HullstateError as e:
        return fail(e.category, e.exit_code, e.to_dict())

    # stdout carries only the report when no --out is given
    status = sys.stdout if args.out else sys.stderr
    print(f"🚀 Running {scenario.method} on {scenario.net_path.name} with {scenario.placement_path.name}",
          file=status)
    try:
        report = run(scenario)
        print_summary(report, file=status)
        if args.out:
            path = emit_report(report, args.format, args.out)
            print(f"✅ Report written to {path}", file=status)
        else:
            print(report.model_dump_json(indent=2))
    except HullstateError as e:
        logger.debug("Run failed", exc_info=True)
        return fail(e.category, e.exit_code, e.to_dict())
    return 0


def main():
    sys.exit(cli())


if __name__ == "__main__":
    main()
