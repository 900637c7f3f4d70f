import argparse
from pathlib import Path

from pydantic import ValidationError

from exceptions import ConfigError
from run_config import load_config
from schemas import RunConfig

__all__ = ["estimate", "sweep", "calibrate", "oracle", "plan"]


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """Config file named by --config, with --seed taking precedence over the file."""
    config = load_config(args.config)
    if args.seed is not None:
        try:
            config = RunConfig(**{**config.model_dump(), "seed": args.seed})
        except ValidationError as e:
            raise ConfigError(e.errors()[0]["msg"], key="seed") from e
    return config


def output_path(args: argparse.Namespace, config: RunConfig, default: str) -> Path:
    return Path(args.out or config.output or default)


def threads(args: argparse.Namespace) -> int:
    return max(1, int(args.threads))
