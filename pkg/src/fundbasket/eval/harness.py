"""NBR / NNBR / NBRR evaluation of fitted scorers."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from ..dataset import ExploreMask, PanelDataset, SplitSpec, explore_mask
from ..exceptions import ConfigError, ModelError
from ..quarters import QuarterLike, format_quarter, to_quarter
from .metrics import ndcg_at_k, rank_topk, recall_at_k

logger = logging.getLogger(__name__)

METRICS = ("recall", "ndcg")
DEFAULT_KS = (10, 20)


class TaskKind(str, enum.Enum):
    NBR = "NBR"
    NNBR = "NNBR"
    NBRR = "NBRR"

    @classmethod
    def parse(cls, value) -> "TaskKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ConfigError(f"unknown task {value!r}; choose from {[t.value for t in cls]}") from None


ALL_TASKS = (TaskKind.NBR, TaskKind.NBRR, TaskKind.NNBR)


def metric_key(task, metric: str, k: int) -> str:
    return f"{TaskKind.parse(task).value}/{metric}@{k}"


def task_filter(targets: Sequence, scores: np.ndarray, mask: Optional[ExploreMask], task,
                funds: Optional[Sequence[int]] = None):
    """Restrict targets and candidate items to the task's item universe.

    NBR keeps everything, NNBR keeps novel items (E=1), NBRR repeat items
    (E=0). Returns ``(filtered_targets, candidates)`` where ``candidates``
    is a boolean array shaped like ``scores``.
    """
    task = TaskKind.parse(task)
    scores = np.atleast_2d(scores)
    if len(targets) != scores.shape[0]:
        raise ValueError("targets and scores disagree on the number of funds")
    if funds is None:
        funds = range(len(targets))
    if task is TaskKind.NBR:
        return [frozenset(int(t) for t in T) for T in targets], np.ones(scores.shape, dtype=bool)
    if mask is None:
        raise ValueError(f"{task.value} requires an explore mask")
    if mask.shape[1] != scores.shape[1]:
        raise ValueError("mask and scores disagree on the number of items")
    candidates = np.empty(scores.shape, dtype=bool)
    filtered = []
    for row, (u, T) in enumerate(zip(funds, targets)):
        repeat = mask.repeat_row(int(u))
        candidates[row] = repeat if task is TaskKind.NBRR else ~repeat
        filtered.append(frozenset(int(t) for t in T if candidates[row, int(t)]))
    return filtered, candidates


@dataclass
class EvalOutcome:
    """Per-fund metric values for one model at one target quarter.

    ``values[key]`` is aligned with ``fund_ids``; NaN marks ABSTAIN (empty
    task-filtered target).
    """

    model: str
    target: pd.Period
    fund_ids: list
    values: dict
    tasks: tuple
    ks: tuple
    empty_target: str = "skip"
    params: dict = field(default_factory=dict)
    label: str = ""

    def population(self, task) -> int:
        key = metric_key(task, METRICS[0], self.ks[0])
        return int(np.count_nonzero(~np.isnan(self.values[key])))

    def mean(self, key: str) -> Optional[float]:
        vals = self.values[key]
        vals = vals[~np.isnan(vals)]
        return float(vals.mean()) if len(vals) else None

    def ci(self, key: str, level: float = 0.95, resamples: int = 2000, seed: int = 0):
        return bootstrap_ci(self.values[key], level, resamples, seed)

    def to_dict(self, level: float = 0.95, resamples: int = 2000, seed: int = 0) -> dict:
        aggregate = {}
        for key in self.values:
            ci = self.ci(key, level, resamples, seed)
            aggregate[key] = {
                "mean": self.mean(key),
                "ci": list(ci) if ci is not None else None,
                "n": int(np.count_nonzero(~np.isnan(self.values[key]))),
            }
        return {
            "model": self.model,
            "label": self.label,
            "params": self.params,
            "target": format_quarter(self.target),
            "tasks": [TaskKind.parse(t).value for t in self.tasks],
            "ks": list(self.ks),
            "empty_target": self.empty_target,
            "population": {TaskKind.parse(t).value: self.population(t) for t in self.tasks},
            "aggregate": aggregate,
            "funds": list(self.fund_ids),
            "per_fund": {k: [None if np.isnan(v) else float(v) for v in vals]
                         for k, vals in self.values.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalOutcome":
        values = {k: np.array([np.nan if v is None else v for v in vals], dtype=np.float64)
                  for k, vals in data["per_fund"].items()}
        return cls(data["model"], to_quarter(data["target"]), list(data["funds"]), values,
                   tuple(TaskKind.parse(t) for t in data["tasks"]), tuple(data["ks"]),
                   data.get("empty_target", "skip"), data.get("params", {}), data.get("label", ""))


def evaluate(model, panel: PanelDataset, split: SplitSpec, target: QuarterLike,
             ks: Sequence[int] = DEFAULT_KS, tasks: Sequence = ALL_TASKS,
             empty_target: str = "skip", name: Optional[str] = None, label: str = "",
             chunk_size: int = 512) -> EvalOutcome:
    """Score every fund holding a basket at ``target`` and compute all metrics."""
    target = to_quarter(target)
    tasks = tuple(TaskKind.parse(t) for t in tasks)
    ks = tuple(sorted(set(int(k) for k in ks)))
    if not ks or ks[0] < 1:
        raise ConfigError("K values must be positive")
    if empty_target not in ("skip", "zero"):
        raise ConfigError("empty_target must be 'skip' or 'zero'")
    seen = getattr(model, "history_quarters_", None)
    if seen is None:
        raise ModelError("model must be fitted before evaluation")
    if seen and max(seen) >= target:
        raise ModelError(f"model was fitted on quarters up to {max(seen)}, not before target {target}")
    if target <= split.history[-1]:
        raise ConfigError(f"target {target} is not after the split history")

    mask = explore_mask(panel, target, split.repeat_window)
    funds = np.flatnonzero(panel.present(target))
    truth = panel.incidence(target)
    max_k = ks[-1]
    keys = [metric_key(t, m, k) for t in tasks for m in METRICS for k in ks]
    values = {key: np.full(len(funds), np.nan) for key in keys}
    fill = np.nan if empty_target == "skip" else 0.0

    for start in range(0, len(funds), chunk_size):
        block = funds[start:start + chunk_size]
        scores = model.decision_function(block)
        targets = [truth.indices[truth.indptr[u]:truth.indptr[u + 1]] for u in block]
        for task in tasks:
            filtered, candidates = task_filter(targets, scores, mask, task, block)
            for row, T in enumerate(filtered):
                pos = start + row
                if not T:
                    for m in METRICS:
                        for k in ks:
                            values[metric_key(task, m, k)][pos] = fill
                    continue
                ranked = rank_topk(scores[row], max_k, candidates[row])
                for k in ks:
                    values[metric_key(task, "recall", k)][pos] = recall_at_k(ranked[:k], T)
                    values[metric_key(task, "ndcg", k)][pos] = ndcg_at_k(ranked, T, k)

    for task in tasks:
        n = int(np.count_nonzero(~np.isnan(values[metric_key(task, "recall", ks[0])])))
        if n == 0:
            logger.warning("%s has an empty population at %s", task.value, target)
    params = model.get_params() if hasattr(model, "get_params") else {}
    return EvalOutcome(name or type(model).__name__, target,
                       [panel.vocab.fund_ids[u] for u in funds], values, tasks, ks,
                       empty_target, params, label)


def bootstrap_ci(values, level: float = 0.95, resamples: int = 2000, seed: int = 0):
    """Percentile bootstrap CI of the mean over non-NaN values; None below two values."""
    vals = np.asarray(values, dtype=np.float64)
    vals = vals[~np.isnan(vals)]
    if len(vals) < 2:
        return None
    if np.all(vals == vals[0]):
        return (float(vals[0]), float(vals[0]))
    res = stats.bootstrap((vals,), np.mean, confidence_level=level, n_resamples=resamples,
                          method="percentile", vectorized=True,
                          random_state=np.random.default_rng(seed))
    return (float(res.confidence_interval.low), float(res.confidence_interval.high))


def paired_difference_ci(a, b, level: float = 0.95, resamples: int = 2000, seed: int = 0):
    """Bootstrap CI of mean(a - b) over funds where both are defined."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    both = ~np.isnan(a) & ~np.isnan(b)
    return bootstrap_ci(a[both] - b[both], level, resamples, seed)


def significantly_different(a, b, level: float = 0.95, resamples: int = 2000, seed: int = 0) -> bool:
    ci = paired_difference_ci(a, b, level, resamples, seed)
    return ci is not None and (ci[0] > 0 or ci[1] < 0)
