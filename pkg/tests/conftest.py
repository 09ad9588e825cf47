import os
import sys
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import HealthCheck, settings

from fundbasket.dataset import PanelDataset, Vocab
from fundbasket.quarters import quarter_range, to_quarter

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

FIXTURES = Path(__file__).parent / "fixtures"


def random_panel(rng, n_funds=8, n_items=12, n_quarters=6, density=0.3, gap_prob=0.15,
                 start="2019Q1") -> PanelDataset:
    """Random weighted panel; some fund-quarters are left without a basket."""
    vocab = Vocab(tuple(f"F{u}" for u in range(n_funds)), tuple(f"I{i}" for i in range(n_items)))
    quarters = quarter_range(start, to_quarter(start) + n_quarters - 1)
    mats = {}
    for q in quarters:
        dense = np.zeros((n_funds, n_items))
        for u in range(n_funds):
            if rng.random() < gap_prob:
                continue
            held = rng.random(n_items) < density
            if not held.any():
                held[rng.integers(n_items)] = True
            w = rng.random(n_items) * held
            dense[u] = w / w.sum() * rng.uniform(0.5, 1.0)
        mats[q] = sp.csr_matrix(dense)
    return PanelDataset(vocab, quarters, mats)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_panel(rng):
    return random_panel(rng)


@pytest.fixture(scope="session")
def synth_panel():
    import math
    from fundbasket.synth import SynthConfig, generate
    return generate(SynthConfig(n_funds=60, n_items=120, n_quarters=7, size_log_mean=math.log(15), seed=3))


@pytest.fixture
def fixtures_dir():
    return FIXTURES
