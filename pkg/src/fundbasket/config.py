"""Run configuration for the command-line pipeline.

A run is described by one TOML file. Every output written by the CLI embeds
the fully resolved configuration so a result can be traced back to its inputs.
"""
from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dataset import DEFAULT_HISTORY_LENGTH, DEFAULT_REPEAT_WINDOW, PanelDataset, SplitSpec, temporal_split
from .eval.harness import ALL_TASKS, DEFAULT_KS, TaskKind
from .exceptions import ConfigError, DataError
from .models import REGISTRY
from .quarters import format_quarter, quarter_range, to_quarter
from .synth import SynthConfig

SOURCES = ("edgar", "synth", "files")
DEFAULT_MODELS = tuple(REGISTRY)


@dataclass
class RunConfig:
    source: str = "synth"
    window: Optional[tuple] = None
    history_length: int = DEFAULT_HISTORY_LENGTH
    repeat_window: int = DEFAULT_REPEAT_WINDOW
    split: Optional[dict] = None
    models: tuple = DEFAULT_MODELS
    params: dict = field(default_factory=dict)
    ks: tuple = DEFAULT_KS
    tasks: tuple = tuple(t.value for t in ALL_TASKS)
    empty_target: str = "skip"
    seed: int = 0
    out: str = "runs/default"
    jobs: int = 1
    bootstrap_resamples: int = 2000
    confidence: float = 0.95
    min_history: int = 2
    edgar: dict = field(default_factory=dict)
    synth: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.source not in SOURCES:
            raise ConfigError(f"source must be one of {SOURCES}, got {self.source!r}")
        if self.window is not None:
            try:
                start, end = (to_quarter(q) for q in self.window)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"window must be [start, end] quarters: {exc}") from exc
            if end < start:
                raise ConfigError("window end precedes its start")
            self.window = (format_quarter(start), format_quarter(end))
        unknown = [m for m in self.models if m not in REGISTRY]
        if unknown:
            raise ConfigError(f"unknown model(s) {unknown}; available: {', '.join(REGISTRY)}")
        if not self.models:
            raise ConfigError("at least one model is required")
        self.models = tuple(self.models)
        stray = set(self.params) - set(REGISTRY)
        if stray:
            raise ConfigError(f"parameters given for unknown model(s) {sorted(stray)}")
        for name, values in self.params.items():
            valid = REGISTRY[name]().get_params()
            bad = set(values) - set(valid)
            if bad:
                raise ConfigError(f"{name} has no hyperparameter(s) {sorted(bad)}")
        try:
            self.ks = tuple(sorted({int(k) for k in self.ks}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad K values: {exc}") from exc
        if not self.ks or self.ks[0] < 1:
            raise ConfigError("K values must be positive integers")
        try:
            self.tasks = tuple(TaskKind.parse(t).value for t in self.tasks)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not self.tasks:
            raise ConfigError("at least one task is required")
        if self.empty_target not in ("skip", "zero"):
            raise ConfigError("empty_target must be 'skip' or 'zero'")
        if self.history_length < 1 or self.repeat_window < 1 or self.min_history < 1:
            raise ConfigError("history_length, repeat_window and min_history must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.bootstrap_resamples < 1 or not 0 < self.confidence < 1:
            raise ConfigError("bad bootstrap settings")
        if self.split is not None:
            self._split_from_overrides()
        if self.source == "edgar" and not self.edgar.get("ciks"):
            raise ConfigError("edgar source needs a non-empty edgar.ciks list")
        if self.source == "edgar" and self.window is None:
            raise ConfigError("edgar source needs a study window")
        if self.synth:
            self.synth_config()

    def _split_from_overrides(self) -> SplitSpec:
        s = self.split
        try:
            history = tuple(to_quarter(q) for q in s["history"])
            valid = to_quarter(s["valid_target"])
            test = to_quarter(s["test_target"])
        except KeyError as exc:
            raise ConfigError(f"split override missing {exc}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad split override: {exc}") from exc
        if not history:
            raise ConfigError("split history is empty")
        leaked = [format_quarter(q) for q in history if q >= valid]
        if leaked:
            raise ConfigError(f"split history {leaked} reaches the validation target {format_quarter(valid)}")
        if test <= valid:
            raise ConfigError("test target must come after the validation target")
        fit_target = to_quarter(s.get("fit_target", max(history)))
        if fit_target < max(history) or fit_target >= valid:
            raise ConfigError("fit_target must be the last history quarter or later, and before the validation target")
        try:
            return SplitSpec(history, fit_target, valid, test, self.repeat_window)
        except DataError as exc:
            raise ConfigError(str(exc)) from exc

    def resolve_split(self, panel: PanelDataset) -> SplitSpec:
        """Split for ``panel``: the explicit override when given, else the default temporal split."""
        if self.split is not None:
            split = self._split_from_overrides()
            missing = [format_quarter(q) for q in (*split.history, split.valid_target, split.test_target)
                       if q not in panel.quarters]
            if missing:
                raise DataError(f"split quarters {missing} are not in the panel")
            return split
        return temporal_split(panel, self.history_length, self.repeat_window)

    def synth_config(self) -> SynthConfig:
        values = dict(self.synth)
        values.setdefault("seed", self.seed)
        try:
            return SynthConfig.from_mapping(values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad synth settings: {exc}") from exc

    def model_params(self, name: str) -> dict:
        params = dict(self.params.get(name, {}))
        if name == "random":
            params.setdefault("seed", self.seed)
        return params

    def window_quarters(self):
        if self.window is None:
            return None
        return quarter_range(*self.window)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = copy.deepcopy(getattr(self, f.name))
            if isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        out.pop("jobs")  # execution detail, does not affect results
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config key(s) {sorted(unknown)}")
        for key in ("window", "models", "ks", "tasks"):
            if key in data and data[key] is not None:
                data[key] = tuple(data[key])
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            raw = tomllib.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(_flatten(raw))

    def with_overrides(self, **overrides) -> "RunConfig":
        data = self.to_dict()
        data["jobs"] = self.jobs
        data.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_dict(data)


def _flatten(raw: dict) -> dict:
    """Map the sectioned TOML layout onto :class:`RunConfig` fields."""
    raw = dict(raw)
    data = {}
    for key in ("source", "seed", "out", "jobs", "window", "min_history"):
        if key in raw:
            data[key] = raw.pop(key)
    split = raw.pop("split", {})
    for key in ("history_length", "repeat_window"):
        if key in split:
            data[key] = split.pop(key)
    if split:
        data["split"] = split
    ev = raw.pop("eval", {})
    mapping = {"models": "models", "ks": "ks", "tasks": "tasks", "empty_target": "empty_target",
               "bootstrap_resamples": "bootstrap_resamples", "confidence": "confidence"}
    for key, target in mapping.items():
        if key in ev:
            data[target] = ev.pop(key)
    if ev:
        raise ConfigError(f"unknown [eval] key(s) {sorted(ev)}")
    if "params" in raw:
        data["params"] = raw.pop("params")
    for section in ("edgar", "synth", "files"):
        if section in raw:
            data[section] = raw.pop(section)
    if raw:
        raise ConfigError(f"unknown config key(s) {sorted(raw)}")
    return data
