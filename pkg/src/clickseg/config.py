"""Pipeline configuration: one JSON document, every leaf flag-overridable.

The nested default tree below is the single source of truth for field names,
types, and defaults. A config file replaces leaves wholesale; command-line
overrides address leaves by their dotted name (e.g. ``sampler.n``).
"""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any

from .errors import ConfigError

DEFAULTS: dict[str, Any] = {
    "paths": {
        "log": None,          # input click-data CSV
        "link_graph": None,   # edge-list or JSON link graph
        "traces": None,       # generated training log, one trace per line
        "model": None,        # trained model file (ensemble members derive from it)
        "output": None,       # segmented CSV
        "truth": None,        # ground-truth boundaries JSON, {user: [gap, ...]}
        "metrics": None,      # metrics JSON (stdout if unset)
        "dfg": None,          # DFG DOT file (stdout if unset)
        "ts_dot": None,       # optional DOT dump of the pruned transition system
    },
    "columns": {"timestamp": "timestamp", "activity": "screen", "user": "user"},
    "window": 2,
    "epsilon": 0,
    "end_mode": "local",
    "sampler": {"n": 10000, "max_len": 50, "traces_per_sequence": 10, "seed": 7},
    "train": {
        "embedding_dim": 32,
        "window_radius": 1,
        "epochs": 5,
        "learning_rate": 0.025,
        "min_learning_rate": 0.0001,
        "seed": 7,
        "ensemble": 1,
    },
    "segment": {
        "b1": 1.2,
        "b2": 1.2,
        "b3": 1.5,
        "k": 5,
        "aggregation": "mean",
        "extended_neighborhood": False,
    },
    "eval": {"tolerance": 0},
    "dfg": {"min_arc_freq": 1},
    "threads": 1,
    "figures": False,
}


def default_config() -> dict[str, Any]:
    return copy.deepcopy(DEFAULTS)


def _merge(base: dict[str, Any], override: dict[str, Any], trail: str) -> None:
    for key, value in override.items():
        dotted = f"{trail}{key}"
        if key not in base:
            raise ConfigError(f"unknown config field: {dotted}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config field {dotted} must be an object")
            _merge(base[key], value, f"{dotted}.")
        else:
            base[key] = value


def load_config(path: str | Path) -> dict[str, Any]:
    """Defaults overlaid with the JSON document at ``path``."""
    with open(path, encoding="utf-8") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    config = default_config()
    _merge(config, document, "")
    return config


def flatten(tree: dict[str, Any], prefix: str = "") -> dict[str, Any]:
    """Leaves of the config tree keyed by dotted names."""
    flat: dict[str, Any] = {}
    for key, value in tree.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, f"{dotted}."))
        else:
            flat[dotted] = value
    return flat


def _coerce(dotted: str, raw: str, default: Any) -> Any:
    if isinstance(default, bool):
        lowered = raw.strip().lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{dotted}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        kind = "an integer" if isinstance(default, int) else "a number"
        raise ConfigError(f"{dotted}: expected {kind}, got {raw!r}") from None
    return raw  # string and path leaves (default None) stay strings


def set_dotted(config: dict[str, Any], dotted: str, raw: str) -> None:
    """Apply one command-line override to its leaf, coercing by default type."""
    node = config
    parts = dotted.split(".")
    for part in parts[:-1]:
        node = node.get(part) if isinstance(node, dict) else None
        if not isinstance(node, dict):
            raise ConfigError(f"unknown config field: {dotted}")
    leaf = parts[-1]
    if not isinstance(node, dict) or leaf not in node or isinstance(node[leaf], dict):
        raise ConfigError(f"unknown config field: {dotted}")
    node[leaf] = _coerce(dotted, raw, flatten(DEFAULTS)[dotted])


def require_paths(config: dict[str, Any], *names: str) -> list[str]:
    """Resolve mandatory path fields, failing with the flag name to set."""
    values = []
    for name in names:
        value = config["paths"].get(name)
        if not value:
            raise ConfigError(f"paths.{name} is required (set it in the config or via --paths.{name})")
        values.append(value)
    return values
