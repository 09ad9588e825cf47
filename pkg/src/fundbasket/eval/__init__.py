from .harness import ALL_TASKS, EvalOutcome, TaskKind, bootstrap_ci, evaluate, paired_difference_ci
from .metrics import ndcg_at_k, rank_topk, recall_at_k

__all__ = ["ALL_TASKS", "EvalOutcome", "TaskKind", "bootstrap_ci", "evaluate", "paired_difference_ci",
           "ndcg_at_k", "rank_topk", "recall_at_k"]
