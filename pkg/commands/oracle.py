import argparse

from commands import load_run_config, output_path
from csv_export import emit_surface_csv, emit_weak_error_csv
from experiments import WEAK_ERROR_STEPS, run_oracle, run_weak_error
from oracle import grid_argmin


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "oracle",
        parents=parents,
        help="variance surfaces for every level and the limit, with grid minimizers",
    )
    parser.add_argument("--weak-error", type=int, default=None, metavar="SAMPLES",
                        help=f"also fit the weak-error rate over n in {WEAK_ERROR_STEPS}, "
                             f"written next to the surfaces as <out>_weak_error.csv")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    surfaces = run_oracle(config)
    path = emit_surface_csv(surfaces, output_path(args, config, "oracle.csv"))

    for surface in surfaces:
        best = grid_argmin(surface)
        name = "limit" if surface.level is None else str(surface.level)
        print(f"level {name:>5}  theta* {best['theta_star']}  value {best['value']:.6g}")
    print(f"wrote {path}")

    if args.weak_error is not None:
        fit = run_weak_error(config, args.weak_error)
        print(f"weak error   slope {fit.slope:.4f} +/- {fit.slope_stderr:.4f}  "
              f"alpha {fit.alpha:.4f}  C_psi {fit.c_psi:.6g}")
        fit_path = emit_weak_error_csv(fit, path.with_name(f"{path.stem}_weak_error.csv"))
        print(f"wrote {fit_path}")
    return 0
