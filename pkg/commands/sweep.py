import argparse
import logging

from commands import load_run_config, output_path, threads
from csv_export import emit_csv
from experiments import run_rmse_sweep, summary_rows

logger = logging.getLogger(__name__)


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "sweep",
        parents=parents,
        help="RMSE sweep over the configured levels, written as CSV",
    )
    parser.add_argument("--levels", type=int, nargs="+", default=None,
                        help="override sweep_levels from the config")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    rows, summaries = run_rmse_sweep(config, args.levels, threads(args))
    path = emit_csv(rows + summary_rows(config, summaries), output_path(args, config, "sweep.csv"))

    for s in summaries:
        print(f"L={s.L:2d}  n={s.n:6d}  rmse {s.rmse:.6g}  steps {s.total_euler_steps}  "
              f"wall {s.total_wall_seconds:.2f}s")
    print(f"wrote {path}")

    degraded = sum(s.degraded_count for s in summaries)
    if degraded:
        logger.warning(f"{degraded} degraded rows in {path}")
        return 3
    return 0
