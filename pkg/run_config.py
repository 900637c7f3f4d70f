"""
Line-oriented run configs:

    # benchmark call
    s0 = 130
    K = 100
    r = log(1.1)
    m = 4
    L = 4

One `key = value` per line, `#` starts a comment. Numbers may be written as
`log(x)`, `exp(x)` or `sqrt(x)` of a literal; lists are comma separated.
"""
from __future__ import annotations

import logging
import math
import re
from pathlib import Path
from typing import Dict, Union

from pydantic import ValidationError

from exceptions import ConfigError
from schemas import RunConfig

logger = logging.getLogger(__name__)

_FUNCTIONS = {"log": math.log, "exp": math.exp, "sqrt": math.sqrt}
_CALL = re.compile(r"^(log|exp|sqrt)\(\s*([^()]+?)\s*\)$")
_LIST_FIELDS = {"sweep_levels"}


def _parse_value(key: str, raw: str, line: int):
    if key in _LIST_FIELDS:
        return [item.strip() for item in raw.split(",") if item.strip()]
    match = _CALL.match(raw)
    if match:
        name, argument = match.groups()
        try:
            return _FUNCTIONS[name](float(argument))
        except ValueError as e:
            raise ConfigError(f"cannot evaluate {raw!r}: {e}", key=key, line=line) from e
    return raw


def parse_config(text: str) -> RunConfig:
    """Parse and validate config text; errors name the offending key and line."""
    values: Dict[str, object] = {}
    lines: Dict[str, int] = {}

    for number, raw_line in enumerate(text.splitlines(), start=1):
        content = raw_line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"expected 'key = value', got {content!r}", line=number)
        key, raw = (part.strip() for part in content.split("=", 1))
        if key not in RunConfig.model_fields:
            raise ConfigError("unknown key", key=key, line=number)
        if key in values:
            raise ConfigError("duplicate key", key=key, line=number)
        if not raw:
            raise ConfigError("missing value", key=key, line=number)
        values[key] = _parse_value(key, raw, number)
        lines[key] = number

    try:
        config = RunConfig(**values)
    except ValidationError as e:
        error = e.errors()[0]
        key = str(error["loc"][0]) if error["loc"] else None
        raise ConfigError(error["msg"], key=key, line=lines.get(key)) from e

    logger.debug(f"Parsed config: {config.model_dump()}")
    return config


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e.strerror}") from e
    return parse_config(text)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ", ".join(_format(v) for v in value)
    return str(value)


def serialize_config(config: RunConfig) -> str:
    """Inverse of parse_config: every set field, one per line, floats at full precision."""
    lines = [
        f"{key} = {_format(value)}"
        for key, value in config.model_dump().items()
        if value is not None
    ]
    return "\n".join(lines) + "\n"
