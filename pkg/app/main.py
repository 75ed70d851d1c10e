import argparse
import logging
import os
import sys
from pathlib import Path
from dotenv import load_dotenv

if __package__ is None or __package__ == "":
    repo_root = Path(__file__).resolve().parents[1]
    if str(repo_root) not in sys.path:
        sys.path.insert(0, str(repo_root))

from app.errors import BalancerError
from app.services.config_loader import apply_overrides, load_experiment_config, resolve_output_path
from app.services.experiment import (
    build_scheduler_config,
    format_summary,
    load_profile_eval,
    run_experiment,
    summarize_experiment,
)
from app.services.property_check import check_properties
from app.services.scheduler import solve_schedule
from app.services.telemetry_storage import TelemetryStorage

load_dotenv()

logger = logging.getLogger("app")


def cmd_simulate(args) -> int:
    cfg = load_experiment_config(args.config)
    cfg = apply_overrides(cfg, out=args.out, seed=args.seed, duration=args.duration)

    records = run_experiment(cfg)
    report = summarize_experiment(cfg, records)

    storage = TelemetryStorage(resolve_output_path(cfg))
    storage.write_records(records, n_modules=cfg.pack.n)
    storage.write_summary(report)

    print(format_summary(report))
    print(f"\nTelemetry written to {storage.csv_path}")
    print(f"Summary written to {storage.summary_path}")
    return 0


def cmd_solve(args) -> int:
    cfg = load_experiment_config(args.config)
    sched_cfg = build_scheduler_config(cfg)
    load = args.load if args.load is not None else load_profile_eval(cfg.load_profile, 0.0)
    solver = args.solver or sched_cfg.solver

    result = solve_schedule(sched_cfg.ocvs, sched_cfg.impedances, sched_cfg.scaling, load, solver)

    print(f"Load: {result.load_ohms:.6g} ohm ({solver})")
    print(f"beta_opt: {result.beta_opt:.9f} A (binding module {result.binding_module})")
    print(f"{'module':>6} {'V_opt [V]':>12} {'duty':>10} {'I [A]':>12}")
    for k, (v, duty, i) in enumerate(zip(result.voltages, result.duties, result.currents), start=1):
        print(f"{k:>6} {v:12.6f} {duty:10.6f} {i:12.6f}")
    print(f"V_bus: {result.v_bus:.6f} V, I_bus: {result.i_bus:.6f} A")
    return 0


def cmd_check(args) -> int:
    seed = args.seed if args.seed is not None else 0
    report = check_properties(instances=args.instances, seed=seed, workers=args.workers)

    print(f"Checked {report.instances} random instances (seed {report.seed})")
    for name, failures in report.failures.items():
        status = "ok" if failures == 0 else f"{failures} FAILED"
        print(f"  {name:<20} worst {report.worst[name]:.3e}  {status}")
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="balancer",
        description="Recursive optimal current scheduling for parallel buck-regulated battery modules",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    simulate = subparsers.add_parser("simulate", help="run an experiment config, write CSV telemetry and a summary")
    simulate.add_argument("--config", help="experiment config (JSON); defaults to $BALANCER_CONFIG")
    simulate.add_argument("--out", help="telemetry CSV path")
    simulate.add_argument("--seed", type=int, help="plant noise seed")
    simulate.add_argument("--duration", type=float, help="run length in seconds")
    simulate.set_defaults(handler=cmd_simulate)

    solve = subparsers.add_parser("solve", help="one-shot schedule for the config's pack at a fixed load")
    solve.add_argument("--config", help="experiment config (JSON); defaults to $BALANCER_CONFIG")
    solve.add_argument("--load", type=float, help="load resistance in ohms (default: profile value at t=0)")
    solve.add_argument("--solver", choices=["linprog", "analytic"])
    solve.set_defaults(handler=cmd_solve)

    check = subparsers.add_parser("check", help="run the property suite on random instances")
    check.add_argument("--instances", type=int, default=1000)
    check.add_argument("--seed", type=int)
    check.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    check.set_defaults(handler=cmd_check)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.getenv("BALANCER_LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except BalancerError as e:
        logger.debug("%s failed", args.command, exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
