import argparse
import logging
import sys
from typing import List, Optional

# Import subcommands with aliases to avoid conflicts
from commands.calibrate import register as register_calibrate
from commands.estimate import register as register_estimate
from commands.oracle import register as register_oracle
from commands.plan import register as register_plan
from commands.sweep import register as register_sweep

from config import settings
from exceptions import ConfigError, EstimationDegradedError, MlmcError

# Configure logging
logging.basicConfig(
    level=getattr(logging, settings.LOG_LEVEL),
    format=settings.LOG_FORMAT,
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DEGRADED = 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="run config file")
    common.add_argument("--seed", type=int, default=None, metavar="U64",
                        help="base seed, overrides the config")
    common.add_argument("--out", default=None, metavar="PATH", help="output CSV path")
    common.add_argument("--threads", type=int, default=settings.DEFAULT_THREADS, metavar="N",
                        help="worker threads for replications")

    parser = argparse.ArgumentParser(
        prog="mlmc-ais",
        description="Multilevel Monte Carlo Euler estimators with adaptive importance sampling",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for register in (register_estimate, register_sweep, register_calibrate, register_oracle, register_plan):
        register(subparsers, [common])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logger.info(f"Starting '{args.command}' - Environment: {settings.ENVIRONMENT}")

    # Global exception handler
    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error(f"Config error: {e}")
        return EXIT_CONFIG
    except EstimationDegradedError as e:
        logger.error(f"Estimation degraded: {e.detail}")
        return EXIT_DEGRADED
    except MlmcError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_FAILURE
    except Exception as e:
        logger.error(f"Unhandled exception in '{args.command}': {str(e)}", exc_info=True)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
