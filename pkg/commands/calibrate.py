import argparse

from commands import load_run_config, output_path
from csv_export import emit_trajectory_csv
from experiments import run_calibration


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "calibrate",
        parents=parents,
        help="run one level's tilt recursion and compare it with the oracle minimizer",
    )
    parser.add_argument("--level", type=int, default=None, help="override calibration_level")
    parser.add_argument("--no-oracle", action="store_true", help="skip the variance surface")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    result, _ = run_calibration(config, args.level, with_oracle=not args.no_oracle)
    path = emit_trajectory_csv(result.iterates, result.averages,
                               output_path(args, config, f"calibration_level{result.level}.csv"))

    print(f"level        {result.level}")
    print(f"theta_final  {result.theta_final}")
    if result.oracle_theta is not None:
        print(f"oracle_theta {result.oracle_theta}")
        print(f"distance     {result.distance:.6g}")
    print(f"skipped      {result.skipped_updates}")
    print(f"wrote {path}")
    return 0
