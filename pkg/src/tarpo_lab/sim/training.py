"""Training loop comparing GRPO, fixed-weight TARPO and decaying-weight TARPO on synthetic tasks."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from ..advantage import GroupRewards, compute_advantages
from ..errors import DivergenceDetected
from ..objective import tarpo_objective, tarpo_objective_logp_grad
from ..reward import RewardConfig, alpha_schedule, answer_reward, mixed_reward, region_reward
from .policy import SimConfig, TaskView, ToyPolicy, sample_group, score_outcomes
from .stats import TrainStats
from .tasks import ShapeConfig, generate_tasks, split_tasks

log = logging.getLogger(__name__)

ALGORITHMS = ("grpo", "tarpo-fixed", "tarpo")


@dataclass(frozen=True)
class TrainConfig:
    algorithm: str = "tarpo"
    steps: int = 300
    group_size: int = 16
    batch_size: int = 8
    learning_rate: float = 0.5
    alpha_fixed: float = 0.15
    eval_every: int = 25
    seed: int = 0
    task_seed: int = 0
    n_tasks: int = 500
    val_fraction: float = 0.1
    ema_decay: float = 0.05
    reward: RewardConfig = field(default_factory=RewardConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    shape: ShapeConfig = field(default_factory=ShapeConfig)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.group_size < 2:
            raise ValueError("group_size must be >= 2")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.alpha_fixed <= 1.0:
            raise ValueError("alpha_fixed must be in [0, 1]")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")

    def alpha(self, step: int) -> float:
        if self.algorithm == "grpo":
            return 0.0
        if self.algorithm == "tarpo-fixed":
            return self.alpha_fixed
        return alpha_schedule(step, self.reward)

    @property
    def penalty_strength(self) -> float:
        return 0.0 if self.algorithm == "grpo" else self.reward.lam


def build_views(tasks, sim: SimConfig) -> list[TaskView]:
    return [TaskView(t, sim) for t in tasks]


def group_surrogate(policy: ToyPolicy, params: np.ndarray, view: TaskView, choices: np.ndarray,
                    a_eff, logp_old, reward: RewardConfig) -> tuple[float, np.ndarray]:
    """Objective of one sampled group at ``params`` and its analytic gradient.

    Choices, effective advantages and behaviour log-probs stay fixed; only the
    current policy moves. The reference log-probs come from ``policy.ref_params``.
    """
    logp = policy.logprob(view, choices, params)
    logp_ref = policy.logprob(view, choices, policy.ref_params)
    value = tarpo_objective(a_eff, logp, logp_old, logp_ref, reward.epsilon, reward.beta)
    coef = tarpo_objective_logp_grad(a_eff, logp, logp_old, logp_ref, reward.epsilon, reward.beta)
    return value, coef @ policy.grad_logprob(view, choices, params)


def _expected_answer_reward(view: TaskView, kc: int, kr: int, s: int, v: int, reward: RewardConfig) -> float:
    """Answer reward averaged over the environment's distraction noise."""
    gold = view.task.gold_answer
    p_d = view.distraction_probability(kc, kr, v)
    clean = answer_reward(view.answer(kc, kr, s), gold, reward)
    if p_d == 0.0:
        return clean
    cells = view.distractors(kc, kr) or [
        view.task.table.rows[r][c] for r in view.row_cands[kr] for c in view.col_cands[kc]
    ]
    noisy = float(np.mean([answer_reward(c, gold, reward) for c in cells])) if cells else 0.0
    return (1.0 - p_d) * clean + p_d * noisy


def evaluate(policy: ToyPolicy, tasks, reward: RewardConfig | None = None, sim: SimConfig | None = None,
             greedy: bool = True, samples: int = 1, seed: int = 0) -> tuple[float, float, float]:
    """(accuracy, mean region reward, mean response length) over ``tasks``.

    Greedy mode takes the argmax of every factor and averages the answer
    reward exactly over the distraction noise. Sampled mode draws ``samples``
    responses per task from a fresh generator seeded with ``seed``.
    """
    reward = reward or RewardConfig()
    sim = sim or SimConfig()
    views = [t if isinstance(t, TaskView) else TaskView(t, sim) for t in tasks]
    acc, reg, length = [], [], []
    if greedy:
        for view in views:
            kc, kr, s, v = (int(np.argmax(lp)) for lp in policy.factor_logprobs(view))
            acc.append(_expected_answer_reward(view, kc, kr, s, v, reward))
            reg.append(region_reward(view.region(kc, kr), view.task.gold_region))
            length.append(view.length(kc, kr, v))
    else:
        rng = np.random.default_rng(seed)
        for view in views:
            outs = sample_group(policy, view, max(samples, 2), rng)[:samples]
            r_t, r_a = score_outcomes(outs, view.task.gold_region, view.task.gold_answer, reward)
            acc.extend(r_a)
            reg.extend(r_t)
            length.extend(o.length for o in outs)
    return float(np.mean(acc)), float(np.mean(reg)), float(np.mean(length))


def expected_metrics(policy: ToyPolicy, tasks, reward: RewardConfig | None = None,
                     sim: SimConfig | None = None) -> tuple[float, float, float]:
    """Exact expectation of sampled-mode ``evaluate`` by enumerating every joint choice."""
    reward = reward or RewardConfig()
    sim = sim or SimConfig()
    views = [t if isinstance(t, TaskView) else TaskView(t, sim) for t in tasks]
    acc = reg = length = 0.0
    for view in views:
        probs = policy.factor_probs(view)
        for kc, kr, s, v in product(*(range(len(p)) for p in probs)):
            w = probs[0][kc] * probs[1][kr] * probs[2][s] * probs[3][v]
            acc += w * _expected_answer_reward(view, kc, kr, s, v, reward)
            reg += w * region_reward(view.region(kc, kr), view.task.gold_region)
            length += w * view.length(kc, kr, v)
    n = len(views)
    return acc / n, reg / n, length / n


@dataclass
class StepResult:
    grad: np.ndarray
    objective: float
    mean_reward: float
    mean_region_reward: float
    train_acc: float
    mean_len: float
    clamped_groups: int


def train_step(policy: ToyPolicy, views, config: TrainConfig, step: int, rng: np.random.Generator) -> StepResult:
    """Sample one batch, score it and return the ascent direction (no update applied)."""
    alpha = config.alpha(step)
    lam = config.penalty_strength
    batch = rng.choice(len(views), size=min(config.batch_size, len(views)), replace=False)
    grad = np.zeros_like(policy.params)
    objective = 0.0
    mixed, regions, answers, lengths = [], [], [], []
    clamped = 0
    for idx in batch:
        view = views[int(idx)]
        outs = sample_group(policy, view, config.group_size, rng)
        r_t, r_a = score_outcomes(outs, view.task.gold_region, view.task.gold_answer, config.reward)
        adv = compute_advantages(GroupRewards(r_t, r_a, alpha), lam)
        clamped += adv.clamped
        choices = np.array([o.choices for o in outs], dtype=np.int64)
        logp_old = np.array([o.logp_old for o in outs])
        value, g = group_surrogate(policy, policy.params, view, choices, adv.effective, logp_old, config.reward)
        grad += g
        objective += value
        mixed.extend(mixed_reward(a, b, alpha) for a, b in zip(r_t, r_a))
        regions.extend(r_t)
        answers.extend(r_a)
        lengths.extend(o.length for o in outs)
    n = len(batch)
    return StepResult(grad / n, objective / n, float(np.mean(mixed)), float(np.mean(regions)),
                      float(np.mean(answers)), float(np.mean(lengths)), clamped)


def train(config: TrainConfig, tasks=None, policy: ToyPolicy | None = None) -> tuple[TrainStats, ToyPolicy]:
    """Run ``config.steps`` gradient-ascent steps; fully determined by the config seeds."""
    if tasks is None:
        tasks = generate_tasks(config.task_seed, config.n_tasks, config.shape)
    train_tasks, val_tasks = split_tasks(tasks, config.val_fraction)
    train_views = build_views(train_tasks, config.sim)
    val_views = build_views(val_tasks, config.sim)
    policy = policy.copy() if policy is not None else ToyPolicy.uniform(config.sim)
    rng = np.random.default_rng(config.seed)
    stats = TrainStats(ema_decay=config.ema_decay)

    for step in range(config.steps):
        res = train_step(policy, train_views, config, step, rng)
        if not np.isfinite(res.objective):
            raise DivergenceDetected(step, "objective")
        policy.params = policy.params + config.learning_rate * res.grad
        if not np.all(np.isfinite(policy.params)):
            raise DivergenceDetected(step, "parameters")
        if res.clamped_groups:
            log.debug("step %d: std floor applied in %d groups", step, res.clamped_groups)
        stats.mean_reward.append(res.mean_reward)
        stats.mean_region_reward.append(res.mean_region_reward)
        stats.train_acc.append(res.train_acc)
        stats.mean_len.append(res.mean_len)
        stats.alpha.append(config.alpha(step))
        stats.objective.append(res.objective)
        if (step + 1) % config.eval_every == 0 or step + 1 == config.steps:
            stats.val_acc[step] = evaluate(policy, val_views, config.reward, config.sim)[0]

    val_acc, val_region, val_len = evaluate(policy, val_views, config.reward, config.sim)
    stats.summary = {
        "seed": config.seed,
        "task_seed": config.task_seed,
        "steps": config.steps,
        "val_acc": val_acc,
        "val_region_reward": val_region,
        "val_mean_len": val_len,
        "mean_len": stats.smoothed("mean_len")[-1] if config.steps else val_len,
        "final_alpha": config.alpha(config.steps),
        "verbosity_marginal": [float(x) for x in policy.verbosity_marginal(config.sim)],
    }
    return stats, policy


def with_seed(config: TrainConfig, seed: int) -> TrainConfig:
    return replace(config, seed=seed)
