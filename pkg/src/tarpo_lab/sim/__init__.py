"""Desk-scale simulator: synthetic table-QA tasks, a toy policy and the training loop."""

from .policy import RolloutOutcome, SimConfig, TaskView, ToyPolicy, sample_group, score_outcomes
from .stats import TrainStats, ema
from .tasks import QUESTION_KINDS, STRATEGIES, ShapeConfig, SyntheticTask, generate_tasks, split_tasks
from .training import ALGORITHMS, TrainConfig, evaluate, expected_metrics, group_surrogate, train

__all__ = [
    "ALGORITHMS", "QUESTION_KINDS", "STRATEGIES", "RolloutOutcome", "ShapeConfig", "SimConfig",
    "SyntheticTask", "TaskView", "ToyPolicy", "TrainConfig", "TrainStats", "ema", "evaluate",
    "expected_metrics", "generate_tasks", "group_surrogate", "sample_group", "score_outcomes",
    "split_tasks", "train",
]
