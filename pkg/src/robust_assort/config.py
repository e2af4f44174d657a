"""Flat TOML experiment configs: parsing, typed validation and echo.

Errors carry the file name and the line of the offending key so the CLI can
point at it directly.
"""

import re
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from robust_assort.simulator import ExperimentConfig

REQUIRED = ("n", "k", "t")
INT_KEYS = ("n", "k", "t", "trials", "seed", "checkpoints")
FLOAT_KEYS = ("eps", "eps_bar", "ucb_c1")
STR_KEYS = ("adversary", "instance", "out")
BOOL_KEYS = ("full_trace",)
KNOWN = set(INT_KEYS + FLOAT_KEYS + STR_KEYS + BOOL_KEYS + ("policies", "explore_scale"))


class ConfigError(ValueError):
    pass


def _key_line(text, key):
    m = re.search(rf"^\s*{re.escape(key)}\s*=", text, flags=re.M)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _where(source, line):
    if line is None:
        return source
    return f"{source}:{line}"


def coerce(key, value):
    """Type-check one config value; raises ValueError with a short reason."""
    if key in INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError(f"expected an integer, got {value!r}")
        return value
    if key in FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"expected a number, got {value!r}")
        return float(value)
    if key in STR_KEYS:
        if not isinstance(value, str):
            raise ValueError(f"expected a string, got {value!r}")
        return value
    if key in BOOL_KEYS:
        if not isinstance(value, bool):
            raise ValueError(f"expected true/false, got {value!r}")
        return value
    if key == "policies":
        if isinstance(value, str):
            value = [p.strip() for p in value.split(",") if p.strip()]
        if not isinstance(value, list) or not all(isinstance(p, str) for p in value):
            raise ValueError(f"expected a list of policy names, got {value!r}")
        return tuple(value)
    if key == "explore_scale":
        if value == "auto":
            return value
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"expected 'auto' or a number, got {value!r}")
        return float(value)
    raise ValueError("unknown key")


def parse_config_text(text, source="<config>"):
    """Parse TOML text into a dict of typed values (no defaults applied)."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    out = {}
    for key, value in raw.items():
        line = _key_line(text, key)
        if key not in KNOWN:
            raise ConfigError(f"{_where(source, line)}: unknown field '{key}'")
        try:
            out[key] = coerce(key, value)
        except ValueError as exc:
            raise ConfigError(f"{_where(source, line)}: field '{key}': {exc}") from None
    return out


def load_config_file(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config_text(text, str(path)), text


def build_config(values, source="<config>", text=""):
    """Apply defaults and cross-field validation; returns an ExperimentConfig."""
    for key in REQUIRED:
        if key not in values:
            raise ConfigError(f"{source}: missing required field '{key}'")
    try:
        return ExperimentConfig(**values)
    except ValueError as exc:
        # problems() messages start with the field name
        first = str(exc).split(";")[0].strip()
        key = first.split(":")[0]
        raise ConfigError(f"{_where(source, _key_line(text, key))}: {first}") from None


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {v!r}")


def dump_config(config):
    """Flat TOML text that parses back to an equal ExperimentConfig."""
    return "".join(f"{k} = {_toml_value(v)}\n" for k, v in config.to_dict().items())
