"""Answer reward, region IoU reward, decaying region weight and the mixed reward."""

from __future__ import annotations

import math
import re
import string
from dataclasses import dataclass, fields
from typing import Sequence, Union

from .table import TableRegion

Number = Union[int, float]


@dataclass(frozen=True)
class RewardConfig:
    """Reward and objective hyperparameters.

    ``epsilon`` and ``beta`` have no published values; the defaults are
    conventional choices for clipped group-relative objectives.
    """

    zeta: float = 0.6
    gamma: float = 0.3
    rho: float = 9e-4
    lam: float = 0.1
    epsilon: float = 0.2
    beta: float = 0.001
    numeric_tolerance: float = 1e-9
    strict_threshold: bool = True

    def __post_init__(self):
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError(f"zeta must be in [0, 1], got {self.zeta}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if not self.rho > 0.0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        if self.lam < 0.0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.numeric_tolerance < 0.0:
            raise ValueError("numeric_tolerance must be >= 0")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class AnswerSpec:
    """Gold answer. ``kind`` is "numeric", "text" or "list".

    List elements that are ints/floats are matched numerically, strings by Rouge-L.
    """

    kind: str
    value: Union[Number, str, tuple]

    def __post_init__(self):
        if self.kind == "numeric":
            v = self.value
            if isinstance(v, str):
                v = parse_number(v)
            if v is None or isinstance(v, bool) or not math.isfinite(float(v)):
                raise ValueError(f"numeric gold must be a finite real, got {self.value!r}")
            object.__setattr__(self, "value", float(v))
        elif self.kind == "text":
            object.__setattr__(self, "value", str(self.value))
        elif self.kind == "list":
            items = tuple(self.value)
            if not items:
                raise ValueError("list gold must be non-empty")
            for item in items:
                if isinstance(item, bool) or not isinstance(item, (int, float, str)):
                    raise ValueError(f"bad list element {item!r}")
                if isinstance(item, float) and not math.isfinite(item):
                    raise ValueError("list gold numbers must be finite")
            object.__setattr__(self, "value", items)
        else:
            raise ValueError(f"unknown answer kind {self.kind!r}")

    def to_record(self) -> dict:
        value = list(self.value) if self.kind == "list" else self.value
        return {"kind": self.kind, "value": value}

    @classmethod
    def from_record(cls, record: dict) -> "AnswerSpec":
        value = record["value"]
        if record["kind"] == "list":
            value = tuple(value)
        return cls(record["kind"], value)

    def render(self) -> str:
        if self.kind == "list":
            return ", ".join(_render_scalar(v) for v in self.value)
        return _render_scalar(self.value)


def _render_scalar(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v)


# --- text matching ----------------------------------------------------------

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})


def tokenize(text: str) -> list[str]:
    """Lowercase, replace ASCII punctuation with spaces, split on whitespace."""
    return text.lower().translate(_PUNCT_TABLE).split()


def lcs_length(a: Sequence, b: Sequence) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(prediction: str, reference: str) -> float:
    """Token-level Rouge-L F1 (equal precision/recall weighting)."""
    pred, ref = tokenize(prediction), tokenize(reference)
    if not pred or not ref:
        return 0.0
    lcs = lcs_length(pred, ref)
    if lcs == 0:
        return 0.0
    p = lcs / len(pred)
    r = lcs / len(ref)
    return 2 * p * r / (p + r)


_NUMBER_JUNK = re.compile(r"[,%$€£¥\s]")


def parse_number(text: str) -> float | None:
    """Locale-free parse; strips thousands separators, "%", currency symbols."""
    cleaned = _NUMBER_JUNK.sub("", str(text))
    if not cleaned:
        return None
    try:
        value = float(cleaned)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _text_match(pred: str, gold: str, config: RewardConfig) -> bool:
    score = rouge_l(pred, gold)
    return score > config.zeta if config.strict_threshold else score >= config.zeta


def _numeric_match(pred: str, gold: float, config: RewardConfig) -> bool:
    value = parse_number(pred)
    return value is not None and abs(value - gold) <= config.numeric_tolerance


def _element_match(pred: str, gold, config: RewardConfig) -> bool:
    if isinstance(gold, str):
        return _text_match(pred, gold, config)
    return _numeric_match(pred, float(gold), config)


def answer_reward(predicted: str | None, gold: AnswerSpec, config: RewardConfig) -> float:
    """1.0 when ``predicted`` matches ``gold``, else 0.0. Never raises on bad predictions."""
    if predicted is None:
        return 0.0
    predicted = str(predicted).strip()
    if gold.kind == "numeric":
        return 1.0 if _numeric_match(predicted, gold.value, config) else 0.0
    if gold.kind == "text":
        return 1.0 if _text_match(predicted, gold.value, config) else 0.0
    parts = [p.strip() for p in re.split(r"[;,]", predicted) if p.strip()]
    for item in gold.value:
        if not any(_element_match(p, item, config) for p in parts):
            return 0.0
    return 1.0


# --- region reward ----------------------------------------------------------

def set_iou(a, b) -> float:
    """|a & b| / |a | b|, with IoU(empty, empty) = 1."""
    a, b = set(a), set(b)
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


def region_reward(predicted: TableRegion | None, gold: TableRegion) -> float:
    """Mean of the column-axis and row-axis IoU; a missing region scores 0."""
    if predicted is None:
        return missing_region_reward()
    return (set_iou(predicted.columns, gold.columns) + set_iou(predicted.rows, gold.rows)) / 2


def missing_region_reward() -> float:
    return 0.0


# --- mixing -----------------------------------------------------------------

def alpha_schedule(step: int, config: RewardConfig) -> float:
    """Region weight at optimizer step ``step``: gamma * exp(-rho * step)."""
    if step < 0:
        raise ValueError("step must be non-negative")
    return config.gamma * math.exp(-config.rho * step)


def mixed_reward(r_t: float, r_a: float, alpha: float) -> float:
    return alpha * r_t + (1.0 - alpha) * r_a
