"""Factored softmax policy standing in for an LLM, and group sampling.

A response is four independent choices: a column subset and a row subset
(from capped per-task candidate lists), an answer strategy, and a verbosity
level. Column/row logits are linear in observable features of the candidate
(how much of what the question mentions it covers, how much else it drags
in); strategy logits are tabular per question kind; verbosity logits are a
single shared table. The log-probability of a response is the sum of the
four factor log-probabilities, so the score function is exact.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from ..reward import AnswerSpec, RewardConfig, answer_reward, region_reward
from ..table import TableRegion, extract_subtable, serialize_region
from .tasks import QUESTION_KINDS, STRATEGIES, SyntheticTask, candidate_subsets, compute_answer

N_COL_FEATURES = 3
N_ROW_FEATURES = 3
N_STRATEGY_FEATURES = len(QUESTION_KINDS) * len(STRATEGIES)
FACTORS = ("columns", "rows", "strategy", "verbosity")

_TOKEN = re.compile(r"\w+|[^\w\s]")


def count_tokens(text: str) -> int:
    return len(_TOKEN.findall(text))


@dataclass(frozen=True)
class SimConfig:
    """Environment knobs.

    ``distraction_rate`` is the chance that each cell outside the gold region,
    when included in the chosen region, derails the computation. The
    ``verbosity_error`` term couples verbosity into the answer reward; at 0
    verbosity is reward-free and only shows up in the length channel.
    """

    candidate_cap: int = 8
    distraction_rate: float = 0.03
    verbosity_levels: int = 4
    verbosity_tokens: int = 24
    base_tokens: int = 32
    verbosity_error: float = 0.0
    perception_noise: float = 0.15
    view_seed: int = 0

    def __post_init__(self):
        if self.candidate_cap < 2:
            raise ValueError("candidate_cap must be >= 2")
        if not 0.0 <= self.distraction_rate < 1.0:
            raise ValueError("distraction_rate must be in [0, 1)")
        if not 0.0 <= self.verbosity_error < 1.0:
            raise ValueError("verbosity_error must be in [0, 1)")
        if not 0.0 <= self.perception_noise < 0.5:
            raise ValueError("perception_noise must be in [0, 0.5)")
        if self.verbosity_levels < 1:
            raise ValueError("verbosity_levels must be >= 1")

    @property
    def n_params(self) -> int:
        return N_COL_FEATURES + N_ROW_FEATURES + N_STRATEGY_FEATURES + self.verbosity_levels


def param_slices(sim: SimConfig) -> dict[str, slice]:
    a = N_COL_FEATURES
    b = a + N_ROW_FEATURES
    c = b + N_STRATEGY_FEATURES
    return {"columns": slice(0, a), "rows": slice(a, b), "strategy": slice(b, c),
            "verbosity": slice(c, c + sim.verbosity_levels)}


def _subset_features(cand: tuple[int, ...], relevant: set[int], total: int) -> list[float]:
    s = set(cand)
    coverage = len(s & relevant) / len(relevant) if relevant else 1.0
    extra = len(s - relevant) / total if total else 0.0
    return [coverage, extra, len(s) / total if total else 0.0]


def _perceive(relevant: set[int], total: int, noise: float, rng: np.random.Generator) -> set[int]:
    """Relevance as the policy sees it: each index is misjudged with probability ``noise``."""
    flips = rng.random(total) < noise
    return {i for i in range(total) if (i in relevant) != bool(flips[i])}


class TaskView:
    """Per-task candidate lists and factor feature matrices (rows: choices, cols: params)."""

    def __init__(self, task: SyntheticTask, sim: SimConfig):
        self.task = task
        self.sim = sim
        table = task.table
        rng = np.random.default_rng([sim.view_seed, task.task_id])
        self.col_cands = candidate_subsets(task.gold_region.columns, table.n_cols, sim.candidate_cap, rng)
        self.row_cands = candidate_subsets(task.gold_region.rows, table.n_rows, sim.candidate_cap, rng)
        sl = param_slices(sim)
        d = sim.n_params
        rel_cols = _perceive(task.relevant_columns(), table.n_cols, sim.perception_noise, rng)
        rel_rows = _perceive(task.relevant_rows(), table.n_rows, sim.perception_noise, rng)

        col = np.zeros((len(self.col_cands), d))
        for i, cand in enumerate(self.col_cands):
            col[i, sl["columns"]] = _subset_features(cand, rel_cols, table.n_cols)
        row = np.zeros((len(self.row_cands), d))
        for i, cand in enumerate(self.row_cands):
            row[i, sl["rows"]] = _subset_features(cand, rel_rows, table.n_rows)
        strat = np.zeros((len(STRATEGIES), d))
        k = QUESTION_KINDS.index(task.question_kind)
        for j in range(len(STRATEGIES)):
            strat[j, sl["strategy"].start + k * len(STRATEGIES) + j] = 1.0
        verb = np.zeros((sim.verbosity_levels, d))
        for j in range(sim.verbosity_levels):
            verb[j, sl["verbosity"].start + j] = 1.0
        self.features = (col, row, strat, verb)
        self._answers: dict = {}
        self._region_tokens: dict = {}

    def region(self, kc: int, kr: int) -> TableRegion:
        return TableRegion(self.col_cands[kc], self.row_cands[kr])

    def answer(self, kc: int, kr: int, strategy: int) -> str | None:
        key = (kc, kr, strategy)
        if key not in self._answers:
            sub = extract_subtable(self.task.table, self.region(kc, kr))
            self._answers[key] = compute_answer(self.task, sub, STRATEGIES[strategy])
        return self._answers[key]

    def distractors(self, kc: int, kr: int) -> list[str]:
        """Cell values inside the chosen region but outside the gold region."""
        gold = self.task.gold_region
        gc, gr = set(gold.columns), set(gold.rows)
        rows = self.task.table.rows
        return [rows[r][c] for r in self.row_cands[kr] for c in self.col_cands[kc]
                if not (c in gc and r in gr)]

    def distraction_probability(self, kc: int, kr: int, level: int) -> float:
        n_extra = len(self.col_cands[kc]) * len(self.row_cands[kr]) - (
            len(set(self.col_cands[kc]) & set(self.task.gold_region.columns))
            * len(set(self.row_cands[kr]) & set(self.task.gold_region.rows))
        )
        keep = (1.0 - self.sim.distraction_rate) ** n_extra * (1.0 - self.sim.verbosity_error) ** level
        return 1.0 - keep

    def length(self, kc: int, kr: int, level: int) -> int:
        key = (kc, kr)
        if key not in self._region_tokens:
            self._region_tokens[key] = count_tokens(serialize_region(self.region(kc, kr), self.task.table))
        return self.sim.base_tokens + level * self.sim.verbosity_tokens + self._region_tokens[key]


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    return z - np.log(np.exp(z).sum())


@dataclass
class ToyPolicy:
    params: np.ndarray
    ref_params: np.ndarray

    @classmethod
    def uniform(cls, sim: SimConfig) -> "ToyPolicy":
        return cls(np.zeros(sim.n_params), np.zeros(sim.n_params))

    @classmethod
    def oracle(cls, sim: SimConfig, scale: float = 500.0) -> "ToyPolicy":
        """Sharply peaked on full coverage, no extras, and the correct strategy."""
        sl = param_slices(sim)
        p = np.zeros(sim.n_params)
        p[sl["columns"]] = [scale, -scale, 0.0]
        p[sl["rows"]] = [scale, -scale, 0.0]
        for k in range(len(QUESTION_KINDS)):
            p[sl["strategy"].start + k * len(STRATEGIES)] = scale
        return cls(p, p.copy())

    def copy(self) -> "ToyPolicy":
        return ToyPolicy(self.params.copy(), self.ref_params.copy())

    def factor_logprobs(self, view: TaskView, params: np.ndarray | None = None) -> list[np.ndarray]:
        theta = self.params if params is None else params
        return [_log_softmax(phi @ theta) for phi in view.features]

    def factor_probs(self, view: TaskView) -> list[np.ndarray]:
        return [np.exp(lp) for lp in self.factor_logprobs(view)]

    def logprob(self, view: TaskView, choices: np.ndarray, params: np.ndarray | None = None) -> np.ndarray:
        """Log-probability of each row of ``choices`` (shape G x 4)."""
        lps = self.factor_logprobs(view, params)
        return sum(lp[choices[:, f]] for f, lp in enumerate(lps))

    def grad_logprob(self, view: TaskView, choices: np.ndarray, params: np.ndarray | None = None) -> np.ndarray:
        """Score function d log pi / d params for each rollout (G x n_params)."""
        theta = self.params if params is None else params
        out = np.zeros((len(choices), len(theta)))
        for f, phi in enumerate(view.features):
            p = np.exp(_log_softmax(phi @ theta))
            out += phi[choices[:, f]] - p @ phi
        return out

    def verbosity_marginal(self, sim: SimConfig) -> np.ndarray:
        return np.exp(_log_softmax(self.params[param_slices(sim)["verbosity"]]))


@dataclass(frozen=True)
class RolloutOutcome:
    region: TableRegion
    answer: str | None
    length: int
    choices: tuple[int, int, int, int]
    logp_current: float
    logp_old: float
    logp_ref: float
    distracted: bool = field(default=False, compare=False)


def _sample_index(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), len(cdf) - 1)


def sample_group(policy: ToyPolicy, task, G: int, seed, sim: SimConfig | None = None) -> list[RolloutOutcome]:
    """Draw ``G`` responses for one task. ``seed`` may be an int or a numpy Generator."""
    if G < 2:
        raise ValueError("group size must be >= 2")
    view = task if isinstance(task, TaskView) else TaskView(task, sim or SimConfig())
    rng = np.random.default_rng(seed)
    choices = np.empty((G, len(FACTORS)), dtype=np.int64)
    for f, lp in enumerate(policy.factor_logprobs(view)):
        choices[:, f] = _sample_index(np.cumsum(np.exp(lp)), rng.random(G))
    logp = policy.logprob(view, choices)
    logp_ref = policy.logprob(view, choices, policy.ref_params)
    noise = rng.random(G)
    picks = rng.random(G)
    outcomes = []
    for i, (kc, kr, s, v) in enumerate(choices.tolist()):
        answer = view.answer(kc, kr, s)
        distracted = bool(noise[i] < view.distraction_probability(kc, kr, v))
        if distracted:
            cells = view.distractors(kc, kr) or [
                view.task.table.rows[r][c] for r in view.row_cands[kr] for c in view.col_cands[kc]
            ]
            answer = cells[int(picks[i] * len(cells))] if cells else None
        outcomes.append(RolloutOutcome(
            view.region(kc, kr), answer, view.length(kc, kr, v), (kc, kr, s, v),
            float(logp[i]), float(logp[i]), float(logp_ref[i]), distracted,
        ))
    return outcomes


def score_outcomes(outcomes, gold_region: TableRegion, gold_answer: AnswerSpec, config: RewardConfig):
    """Region and answer rewards as two float arrays."""
    r_t = np.array([region_reward(o.region, gold_region) for o in outcomes])
    r_a = np.array([answer_reward(o.answer, gold_answer, config) for o in outcomes])
    return r_t, r_a
