import argparse
import logging
import math

import numpy as np

from commands import load_run_config, threads
from experiments import benchmark_value, run_estimate, run_replications
from utils import rmse

logger = logging.getLogger(__name__)


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "estimate",
        parents=parents,
        help="run the configured estimator and print its report",
    )
    parser.add_argument("--once", action="store_true",
                        help="single run with the base seed instead of M replications")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args)

    if args.once:
        report = run_estimate(config, config.seed, threads=threads(args))
        print(report.model_dump_json(indent=2))
        return 0

    benchmark = benchmark_value(config)
    replications = run_replications(config, config.L, threads(args))
    estimates = np.array([r.report.estimate for r in replications])
    for r in replications:
        flag = "  DEGRADED" if r.degraded else ""
        print(f"rep {r.rep:3d}  seed {r.seed:20d}  estimate {r.report.estimate:.8f}{flag}")

    sd = float(np.std(estimates, ddof=1)) if estimates.size > 1 else 0.0
    print(f"method     {config.method}")
    print(f"benchmark  {benchmark:.8f}")
    print(f"mean       {float(np.mean(estimates)):.8f}")
    print(f"sd         {sd:.6g}")
    print(f"mean se    {sd / math.sqrt(estimates.size):.6g}")
    print(f"rmse       {rmse(estimates, benchmark):.6g}")
    print(f"steps      {sum(r.report.euler_steps_total for r in replications)}")
    print(f"skipped    {sum(r.report.skipped_updates for r in replications)}")

    degraded = sum(r.degraded for r in replications)
    if degraded:
        logger.warning(f"{degraded} of {len(replications)} replications were degraded")
        return 3
    return 0
