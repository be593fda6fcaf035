"""INI configuration resolution.

Layout::

    [run]
    seed = 7
    budget_factor = 2.0

    [duhamel-l2]
    ladder = anharmonic

Precedence, lowest first: built-in defaults, ``[run]``, the experiment's own
section, command-line flags, ``--set key=value``.  Values are coerced to the
type of the default; unknown keys are rejected by name.
"""

from __future__ import annotations

import configparser

from .experiments import COMMON, DEFAULTS
from .parabolic_solver import ConfigurationError

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def coerce(key: str, raw, default):
    if isinstance(raw, type(default)) and not (isinstance(default, int) and isinstance(raw, bool)):
        return raw
    text = str(raw).strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigurationError(f"{key}: cannot read {text!r} as {type(default).__name__}") from None
    return text


def defaults_for(experiment: str) -> dict:
    if experiment not in DEFAULTS:
        raise ConfigurationError(f"unknown experiment {experiment!r}; known: {sorted(DEFAULTS)}")
    return {**COMMON, **DEFAULTS[experiment]}


def _apply(params: dict, items, where: str) -> None:
    for key, raw in items:
        if key not in params:
            raise ConfigurationError(f"unknown key {key!r} in {where}")
        params[key] = coerce(key, raw, params[key])


def read_ini(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys such as R and K are case sensitive
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigurationError(f"config {path}: {exc}") from exc
    for section in cp.sections():
        if section != "run" and section not in DEFAULTS:
            raise ConfigurationError(f"unknown section [{section}] in {path}")
    return cp


def resolve(experiment: str, ini_path=None, overrides: dict | None = None, sets=()) -> dict:
    params = defaults_for(experiment)
    if ini_path is not None:
        cp = read_ini(ini_path)
        if cp.has_section("run"):
            # [run] may only carry keys shared by every experiment or known here
            _apply(params, [(k, v) for k, v in cp.items("run") if k in params or k in COMMON], "[run]")
            stray = [k for k, _ in cp.items("run") if k not in params and not _known_anywhere(k)]
            if stray:
                raise ConfigurationError(f"unknown key {stray[0]!r} in [run]")
        if cp.has_section(experiment):
            _apply(params, cp.items(experiment), f"[{experiment}]")
    if overrides:
        _apply(params, [(k, v) for k, v in overrides.items() if v is not None], "command line")
    pairs = []
    for item in sets:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        pairs.append((k.strip(), v.strip()))
    _apply(params, pairs, "--set")
    return params


def _known_anywhere(key: str) -> bool:
    return key in COMMON or any(key in d for d in DEFAULTS.values())
