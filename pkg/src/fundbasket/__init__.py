"""Next-basket recommendation benchmark for mutual fund portfolio holdings."""
from .dataset import PanelDataset, SplitSpec, Vocab, build_panel, explore_mask, temporal_split
from .eval.harness import EvalOutcome, TaskKind, evaluate
from .models import make_model
from .synth import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "PanelDataset", "SplitSpec", "Vocab", "build_panel", "explore_mask", "temporal_split",
    "EvalOutcome", "TaskKind", "evaluate", "make_model", "SynthConfig", "generate",
]
