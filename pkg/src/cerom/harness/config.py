"""Experiment configuration: YAML files validated against ``schema.json``."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import jsonschema
import yaml

from ..exceptions import ConfigError
from ..filters import FilterSpec
from ..pod import DEFAULT_RANK_TOL
from ..closure import DEFAULT_RCOND

DEFAULTS: Dict[str, Any] = {
    "name": "experiment",
    "problem": "burgers_smooth",
    "nu": 0.1,
    "n_cells": 2048,
    "dt": 1e-3,
    "t_end": 1.0,
    "snapshot_file": None,
    "convection": "burgers1d",
    "pod": {"rank_tol": DEFAULT_RANK_TOL, "n_modes": None},
    "filters": [{"kind": "projection"}],
    "r": [2],
    "variants": ["grom", "ddc", "ice_ddc", "ce_ddc"],
    "ce": {"include_initial": True, "laplacian_filter": None, "horizon": None},
    "closure": {
        "rcond": DEFAULT_RCOND,
        "scale_columns": True,
        "state": "truncated",
        "fit_skip_initial": 0,
        "ice_targets": "tau",
    },
    "rom": {"method": "bdf2", "delta_mode": "fixed"},
    "seed": 0,
    "output_dir": "out",
}


def _schema() -> dict:
    text = resources.files("cerom.harness").joinpath("schema.json").read_text()
    return json.loads(text)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_override(item: str):
    """Split ``a.b.c=value`` into a key path and a YAML-parsed value."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ConfigError(f"override {item!r} has an empty key")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {raw!r}: {exc}") from exc
    if isinstance(value, str):
        # YAML 1.1 reads exponent literals without a dot (1e-6) as strings
        try:
            value = float(value)
        except ValueError:
            pass
    return path, value


def apply_overrides(raw: dict, overrides: Iterable[str]) -> dict:
    out = copy.deepcopy(raw)
    for item in overrides:
        path, value = parse_override(item)
        node = out
        for part in path[:-1]:
            nxt = node.setdefault(part, {})
            if not isinstance(nxt, dict):
                raise ConfigError(f"override {item!r} descends into a non-mapping")
            node = nxt
        node[path[-1]] = value
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment configuration; ``raw`` is the validated mapping."""

    raw: Dict[str, Any]

    def __getattr__(self, name):
        raw = object.__getattribute__(self, "raw")
        if name in raw:
            return raw[name]
        raise AttributeError(name)

    @property
    def filters(self) -> List[FilterSpec]:
        return [FilterSpec(f["kind"], f.get("delta", 0.0)) for f in self.raw["filters"]]

    @property
    def n_modes(self) -> Optional[int]:
        return self.raw["pod"]["n_modes"]

    def canonical_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    @classmethod
    def from_mapping(cls, mapping: Optional[dict], overrides: Iterable[str] = ()) -> "ExperimentConfig":
        mapping = {} if mapping is None else mapping
        if not isinstance(mapping, dict):
            raise ConfigError("configuration must be a mapping at top level")
        raw = apply_overrides(_merge(DEFAULTS, mapping), overrides)
        try:
            jsonschema.Draft7Validator(_schema()).validate(raw)
        except jsonschema.ValidationError as exc:
            where = ".".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"invalid configuration at {where}: {exc.message}") from exc
        _check_semantics(raw)
        return cls(raw=raw)

    @classmethod
    def load(cls, path, overrides: Iterable[str] = ()) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            mapping = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        return cls.from_mapping(mapping, overrides)


def _check_semantics(raw: dict):
    n_modes = raw["pod"]["n_modes"]
    if n_modes is not None:
        bad = [r for r in raw["r"] if r > n_modes]
        if bad:
            raise ConfigError(f"r values {bad} exceed the pinned number of modes {n_modes}")
    if raw["problem"] == "external" and not raw.get("snapshot_file"):
        raise ConfigError("problem 'external' requires snapshot_file")
    steps = raw["t_end"] / raw["dt"]
    if raw["problem"] != "external" and abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        raise ConfigError("t_end must be a multiple of dt")
