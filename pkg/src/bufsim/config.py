"""Experiment configuration: a single JSON document validated against a schema."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .algorithms import parse_algorithm
from .engine import SimConfig
from .model import LinkConfig
from .output import FORMATS
from .sync import SYNC_NAMES, parse_sync

ALGORITHM_NAMES = ["reno", "md", "cubic", "scalable", "bbr", "bbr_cycle", "bbr_increment",
                   "randomized_reno"]
SWEEP_PARAMETERS = ["n_flows", "buffer", "bdp", "seed", "duration", "algorithm", "sync",
                    "init_spread"]
SUITE_IDS = ["thm2", "thm3", "thm4", "appc", "thm5", "lemma6", "random-loss", "appc-exhaustive"]

_NUM = {"type": "number"}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "link": {
            "type": "object",
            "additionalProperties": False,
            "required": ["bdp", "buffer"],
            "properties": {"bdp": {"type": "number", "exclusiveMinimum": 0},
                           "buffer": {"type": "number", "minimum": 0}},
        },
        "n_flows": {"type": "integer", "minimum": 1},
        "algorithm": {
            "oneOf": [
                {"type": "string", "enum": ALGORITHM_NAMES},
                {"type": "object", "additionalProperties": False, "required": ["name"],
                 "properties": {"name": {"enum": ALGORITHM_NAMES},
                                "beta": {"type": "number", "exclusiveMinimum": 0,
                                         "exclusiveMaximum": 1}}},
            ],
        },
        "sync": {
            "oneOf": [
                {"type": "string", "enum": list(SYNC_NAMES)},
                {"type": "object", "additionalProperties": False, "required": ["name"],
                 "properties": {"name": {"enum": list(SYNC_NAMES)},
                                "p": {"type": "number", "minimum": 0, "maximum": 1},
                                "k": {"type": "integer", "minimum": 0},
                                "threshold": {"type": "number", "minimum": 0},
                                "mark_fraction": {"type": "number", "exclusiveMinimum": 0,
                                                  "maximum": 1}}},
            ],
        },
        "duration": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "fairness_clamp": {"type": ["array", "null"], "items": _NUM, "minItems": 2, "maxItems": 2},
        "theorem_mode": {"type": "boolean"},
        "record_flows": {"type": "boolean"},
        "init_spread": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "search": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"target": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                           "tolerance": {"type": "number", "exclusiveMinimum": 0},
                           "window": {"type": "integer", "minimum": 1},
                           "percentile": {"type": "number", "minimum": 0, "maximum": 1}},
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["parameter", "values"],
            "properties": {"parameter": {"enum": SWEEP_PARAMETERS},
                           "values": {"type": "array", "minItems": 1}},
        },
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "suite": {"oneOf": [{"const": "default"},
                                    {"type": "array", "minItems": 1,
                                     "items": {"enum": SUITE_IDS}}]},
                "seeds": {"type": "integer", "minimum": 1},
                "band": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                "trials": {"type": "integer", "minimum": 1000},
                "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"},
                           "formats": {"type": "array", "items": {"enum": list(FORMATS)}}},
        },
    },
}

SIM_FIELDS = ("n_flows", "algorithm", "sync", "duration", "seed", "fairness_clamp",
              "theorem_mode", "record_flows", "init_spread")


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps it to exit code 2."""


@dataclass
class Experiment:
    raw: dict
    sim: SimConfig | None
    sweep: dict | None = None
    verify: dict | None = None
    search: dict = field(default_factory=dict)
    out_dir: str | None = None
    formats: tuple = ("csv", "json")


def _line_of(text: str, path) -> int | None:
    """Best-effort line number of the last key in ``path`` within ``text``."""
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(keys[-1]), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _field(path) -> str:
    return ".".join(str(p) for p in path) or "<root>"


def parse_config(data: dict, text: str = "") -> Experiment:
    """Validate ``data`` and build the experiment it describes."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    err = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if err is not None:
        where = _field(err.absolute_path)
        line = _line_of(text, err.absolute_path)
        loc = f" (line {line})" if line else ""
        raise ConfigError(f"field {where}{loc}: {err.message}")
    sim = None
    if "link" in data or "n_flows" in data or "algorithm" in data:
        missing = [k for k in ("link", "n_flows", "algorithm") if k not in data]
        if missing:
            raise ConfigError(f"field {missing[0]}: required for a simulation config")
        try:
            link = LinkConfig.from_bdp(data["link"]["bdp"], data["link"]["buffer"])
            kwargs = {k: data[k] for k in SIM_FIELDS if k in data}
            if kwargs.get("fairness_clamp") is not None:
                kwargs["fairness_clamp"] = tuple(kwargs["fairness_clamp"])
            sim = SimConfig(link=link, **kwargs)
        except ValueError as exc:
            raise ConfigError(f"field {_guess_field(str(exc))}: {exc}") from exc
    sweep = data.get("sweep")
    if sweep is not None:
        if sim is None:
            raise ConfigError("field sweep: a sweep needs a base simulation config")
        for value in sweep["values"]:
            try:
                sweep_point(sim, sweep["parameter"], value)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"field sweep.values: {value!r} is invalid: {exc}") from exc
    output = data.get("output", {})
    return Experiment(
        raw=data,
        sim=sim,
        sweep=sweep,
        verify=data.get("verify"),
        search=data.get("search", {}),
        out_dir=output.get("dir"),
        formats=tuple(output.get("formats", ("csv", "json"))),
    )


def _guess_field(message: str) -> str:
    for name in ("ecn threshold", "fairness_clamp", "n_flows", "duration", "seed", "bdp",
                 "buffer", "init_spread", "beta", "sync", "algorithm"):
        if name in message:
            return {"ecn threshold": "sync.threshold"}.get(name, name)
    return "<config>"


def load_config(path) -> Experiment:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: the config must be a JSON object")
    return parse_config(data, text)


def sweep_point(base: SimConfig, parameter: str, value) -> SimConfig:
    """``base`` with one parameter replaced."""
    if parameter == "algorithm":
        return base.replace(algorithm=parse_algorithm(value))
    if parameter == "sync":
        return base.replace(sync=parse_sync(value))
    if parameter in ("buffer", "bdp"):
        return base.replace(**{parameter: float(value)})
    if parameter == "init_spread":
        return base.replace(init_spread=float(value))
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError(f"{parameter} takes integer values")
    return base.replace(**{parameter: value})
