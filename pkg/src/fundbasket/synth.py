"""Seeded synthetic fund-portfolio panels.

Funds belong to one of ``latent_dim`` investment styles. Each style has its
own Zipf-shaped taste over the item universe, blended with a global
popularity curve, so that funds of the same style co-hold items and novel
additions are predictable from co-occurrence. Every quarter a fund sells a
turnover-propensity fraction of its smallest positions and buys replacements
drawn from its style distribution.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .dataset import PanelDataset, Vocab
from .exceptions import ConfigError
from .quarters import quarter_range, to_quarter


@dataclass(frozen=True)
class SynthConfig:
    n_funds: int = 200
    n_items: int = 500
    n_quarters: int = 7
    start_quarter: str = "2020Q1"
    size_log_mean: float = math.log(69)
    size_log_std: float = 0.9
    max_size_fraction: float = 0.5
    turnover_beta: tuple = (1.0, 15.0)
    popularity_exponent: float = 1.1
    latent_dim: int = 8
    style_strength: float = 0.8
    weight_log_std: float = 1.0
    weight_drift: float = 0.15
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "turnover_beta", tuple(float(x) for x in self.turnover_beta))
        if min(self.n_funds, self.n_items, self.latent_dim) < 1:
            raise ConfigError("n_funds, n_items and latent_dim must be positive")
        if self.n_quarters < 7:
            raise ConfigError("n_quarters must be at least 7")
        if len(self.turnover_beta) != 2 or min(self.turnover_beta) <= 0:
            raise ConfigError("turnover_beta must be two positive numbers")
        if self.size_log_std <= 0 or self.popularity_exponent <= 0 or self.weight_log_std <= 0:
            raise ConfigError("size_log_std, popularity_exponent and weight_log_std must be positive")
        if not 0 <= self.style_strength <= 1:
            raise ConfigError("style_strength must lie in [0, 1]")
        if not 0 < self.max_size_fraction <= 1:
            raise ConfigError("max_size_fraction must lie in (0, 1]")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def max_size(self) -> int:
        return max(1, int(self.n_items * self.max_size_fraction))

    @classmethod
    def from_file(cls, path) -> "SynthConfig":
        """Read ``key = value`` pairs (an optional ``[synth]`` section is accepted)."""
        text = Path(path).read_text()
        parser = configparser.ConfigParser()
        if not text.lstrip().startswith("["):
            text = "[synth]\n" + text
        parser.read_string(text)
        section = parser["synth"] if parser.has_section("synth") else parser[parser.sections()[0]]
        return cls.from_mapping(dict(section))

    @classmethod
    def from_mapping(cls, values: dict) -> "SynthConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigError(f"unknown synth option {key!r}")
            default = getattr(cls, key, None)
            if key == "turnover_beta":
                parts = raw if isinstance(raw, (list, tuple)) else str(raw).replace(",", " ").split()
                kwargs[key] = tuple(float(x) for x in parts)
            elif isinstance(default, bool):
                kwargs[key] = str(raw).lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                kwargs[key] = int(raw)
            elif isinstance(default, float):
                kwargs[key] = float(raw)
            else:
                kwargs[key] = str(raw)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["turnover_beta"] = list(self.turnover_beta)
        return out


def _zipf(rng: np.random.Generator, n: int, exponent: float) -> np.ndarray:
    ranks = rng.permutation(n)
    w = 1.0 / (ranks + 1.0) ** exponent
    return w / w.sum()


def _sample_without(rng, probs: np.ndarray, exclude: np.ndarray, k: int) -> np.ndarray:
    p = probs.copy()
    p[exclude] = 0.0
    avail = np.count_nonzero(p)
    k = min(k, avail)
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    return rng.choice(len(p), size=k, replace=False, p=p / p.sum())


def generate(cfg: Optional[SynthConfig] = None, **overrides) -> PanelDataset:
    """Generate a panel; identical configs give identical panels."""
    if cfg is None:
        cfg = SynthConfig(**overrides)
    elif overrides:
        cfg = SynthConfig(**{**asdict(cfg), **overrides})
    if math.exp(cfg.size_log_mean) > cfg.max_size:
        raise ConfigError(f"median basket size {math.exp(cfg.size_log_mean):.0f} exceeds "
                          f"the {cfg.max_size} items a fund may hold")
    rng = np.random.default_rng(cfg.seed)
    n, m = cfg.n_funds, cfg.n_items

    popularity = _zipf(rng, m, cfg.popularity_exponent)
    styles = np.stack([_zipf(rng, m, cfg.popularity_exponent) for _ in range(cfg.latent_dim)])
    fund_style = rng.integers(cfg.latent_dim, size=n)
    taste = (1 - cfg.style_strength) * popularity + cfg.style_strength * styles[fund_style]

    sizes = np.rint(rng.lognormal(cfg.size_log_mean, cfg.size_log_std, size=n)).astype(int)
    sizes = np.clip(sizes, 1, cfg.max_size)
    propensity = rng.beta(*cfg.turnover_beta, size=n)
    equity_share = rng.uniform(0.85, 1.0, size=n)

    quarters = quarter_range(to_quarter(cfg.start_quarter), to_quarter(cfg.start_quarter) + cfg.n_quarters - 1)
    rows = [[] for _ in quarters]
    cols = [[] for _ in quarters]
    vals = [[] for _ in quarters]

    for u in range(n):
        held = rng.choice(m, size=sizes[u], replace=False, p=taste[u])
        raw = rng.lognormal(0.0, cfg.weight_log_std, size=len(held))
        for t in range(len(quarters)):
            if t > 0:
                n_sell = rng.binomial(len(held), propensity[u])
                if n_sell:
                    # smallest positions are the likeliest exits
                    p_sell = 1.0 / raw
                    sold = rng.choice(len(held), size=n_sell, replace=False, p=p_sell / p_sell.sum())
                    keep = np.setdiff1d(np.arange(len(held)), sold)
                    bought = _sample_without(rng, taste[u], held, n_sell)
                    median = np.median(raw[keep]) if len(keep) else 1.0
                    new_raw = median * rng.lognormal(-0.5, cfg.weight_log_std, size=len(bought))
                    held = np.concatenate([held[keep], bought])
                    raw = np.concatenate([raw[keep], new_raw])
                raw = raw * rng.lognormal(0.0, cfg.weight_drift, size=len(raw))
            w = raw / raw.sum() * equity_share[u]
            rows[t].extend([u] * len(held))
            cols[t].extend(held.tolist())
            vals[t].extend(w.tolist())

    vocab = Vocab(tuple(f"F{u:05d}" for u in range(n)), tuple(f"I{i:05d}" for i in range(m)))
    mats = {q: sp.csr_matrix((vals[t], (rows[t], cols[t])), shape=(n, m)) for t, q in enumerate(quarters)}
    return PanelDataset(vocab, quarters, mats)
