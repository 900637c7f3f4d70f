import argparse

from commands import load_run_config
from experiments import build_plan
from mlmc_engine import complexity_model, level_cost


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "plan",
        parents=parents,
        help="print the level sample sizes and the cost model",
    )
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    plan = build_plan(config)
    I = config.I if config.method != "standard" else 0
    cost = complexity_model(plan, I)

    print(f"m={plan.m} L={plan.L} n={plan.n} alpha={plan.alpha} T={plan.T}")
    print(f"{'level':>5} {'N':>14} {'a':>8} {'cost/sample':>12} {'steps':>16}")
    for ell, (N, a) in enumerate(zip(plan.N, plan.a)):
        per_sample = level_cost(plan, ell)
        print(f"{ell:>5} {N:>14} {a:>8.4g} {per_sample:>12} {N * per_sample:>16}")
    print(f"steps_standard   {cost.steps_standard}")
    print(f"steps_ais (I={I}) {cost.steps_ais}")
    print(f"ratio            {cost.ratio:.6f}")
    print(f"overhead I*sum   {cost.overhead_bound}")
    print(f"optimal standard {cost.optimal_standard:.6g}")
    print(f"optimal ais      {cost.optimal_ais:.6g}")
    return 0
