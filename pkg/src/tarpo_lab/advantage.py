"""Group-relative advantages, their region/answer split, and the consistency penalty."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GroupTooSmall

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class GroupRewards:
    """Region and answer rewards of one group, mixed with a shared ``alpha``.

    The mixed reward is always recomputed from the components.
    """

    region: np.ndarray
    answer: np.ndarray
    alpha: float

    def __post_init__(self):
        region = np.asarray(self.region, dtype=np.float64)
        answer = np.asarray(self.answer, dtype=np.float64)
        if region.shape != answer.shape or region.ndim != 1:
            raise ValueError("region and answer rewards must be 1-d arrays of equal length")
        object.__setattr__(self, "region", region)
        object.__setattr__(self, "answer", answer)

    @property
    def mixed(self) -> np.ndarray:
        return self.alpha * self.region + (1.0 - self.alpha) * self.answer

    def __len__(self):
        return len(self.region)


@dataclass(frozen=True)
class GroupAdvantages:
    advantage: np.ndarray
    region_part: np.ndarray
    answer_part: np.ndarray
    penalty: np.ndarray
    clamped: bool = False

    @property
    def effective(self) -> np.ndarray:
        return effective_advantage(self)


def normalize_group(rewards: GroupRewards) -> GroupAdvantages:
    """Normalize mixed rewards within the group (population std).

    Returns the advantage and its exact split into region and answer parts; the
    penalty is left at zero. A zero-variance group yields all-zero advantages.
    Standard deviations in (0, STD_FLOOR) are floored and ``clamped`` is set.
    """
    g = len(rewards)
    if g < 2:
        raise GroupTooSmall(f"group size must be >= 2, got {g}")
    alpha = rewards.alpha
    region_dev = _deviation(rewards.region)
    answer_dev = _deviation(rewards.answer)
    # Built from the component deviations so the split is exact and a
    # constant group cannot leak rounding noise through the std floor.
    centered = alpha * region_dev + (1.0 - alpha) * answer_dev
    std = float(np.sqrt(np.mean(centered**2)))
    zeros = np.zeros(g)
    if std == 0.0:
        return GroupAdvantages(zeros, zeros.copy(), zeros.copy(), zeros.copy())
    clamped = std < STD_FLOOR
    denom = max(std, STD_FLOOR)
    region_part = alpha * region_dev / denom
    answer_part = (1.0 - alpha) * answer_dev / denom
    advantage = region_part + answer_part
    return GroupAdvantages(advantage, region_part, answer_part, zeros, clamped)


def _deviation(x: np.ndarray) -> np.ndarray:
    """Deviation from the group mean; exactly zero for a constant array."""
    if np.ptp(x) == 0.0:
        return np.zeros_like(x)
    return x - x.mean()


def consistency_penalty(region_part, answer_part, region_dev, answer_dev, lam: float) -> np.ndarray:
    """Penalty for rollouts whose region and answer deviations disagree in sign.

    The sign test uses the raw reward deviations; the magnitude uses the
    advantage parts. A zero product (a tie on either axis) is not penalized.
    """
    region_part = np.asarray(region_part, dtype=np.float64)
    answer_part = np.asarray(answer_part, dtype=np.float64)
    inconsistent = np.asarray(region_dev) * np.asarray(answer_dev) < 0
    return np.where(inconsistent, -lam * region_part * answer_part, 0.0)


def effective_advantage(group: GroupAdvantages) -> np.ndarray:
    return group.advantage - group.penalty


def compute_advantages(rewards: GroupRewards, lam: float) -> GroupAdvantages:
    """normalize_group followed by the consistency penalty."""
    adv = normalize_group(rewards)
    penalty = consistency_penalty(
        adv.region_part,
        adv.answer_part,
        _deviation(rewards.region),
        _deviation(rewards.answer),
        lam,
    )
    return GroupAdvantages(adv.advantage, adv.region_part, adv.answer_part, penalty, adv.clamped)
