"""Synthetic table-QA tasks with exactly computable gold answers and minimal gold regions."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ..reward import AnswerSpec
from ..table import Table, TableRegion, extract_subtable

QUESTION_KINDS = ("cell-lookup", "column-sum", "column-max", "filtered-count")
STRATEGIES = ("correct", "wrong-aggregate", "wrong-column")

_NAMES = (
    "apple", "banana", "cherry", "damson", "elder", "fig", "grape", "hazel",
    "iris", "juniper", "kiwi", "lemon", "mango", "nutmeg", "olive", "peach",
)
_GROUPS = ("red", "green", "blue")
_METRICS = ("points", "wins", "goals", "assists", "games", "height", "weight", "rank")
KEY_COLUMN = "name"
GROUP_COLUMN = "group"


@dataclass(frozen=True)
class ShapeConfig:
    min_rows: int = 3
    max_rows: int = 8
    min_cols: int = 3
    max_cols: int = 8
    max_value: int = 99
    kinds: tuple[str, ...] = QUESTION_KINDS

    def __post_init__(self):
        if not 1 <= self.min_rows <= self.max_rows <= len(_NAMES):
            raise ValueError("row bounds must satisfy 1 <= min_rows <= max_rows <= 16")
        if not 3 <= self.min_cols <= self.max_cols <= 2 + len(_METRICS):
            raise ValueError("column bounds must satisfy 3 <= min_cols <= max_cols <= 10")
        unknown = set(self.kinds) - set(QUESTION_KINDS)
        if unknown or not self.kinds:
            raise ValueError(f"bad question kinds {sorted(unknown)}")


@dataclass(frozen=True)
class SyntheticTask:
    """One question about one table.

    ``target`` names the column being read, ``key``/``value`` the row filter
    (lookup key, or group value for sum/count). Unused fields are None.
    """

    table: Table
    question_kind: str
    gold_region: TableRegion
    gold_answer: AnswerSpec
    question: str
    target: str | None = None
    key: str | None = None
    value: str | None = None
    task_id: int = field(default=0, compare=False)

    def relevant_columns(self) -> set[int]:
        names = {n for n in (self.target, self.key) if n is not None}
        return {self.table.column_index(n) for n in names}

    def relevant_rows(self) -> set[int]:
        """Rows singled out by the question text (visible to a reader of the table)."""
        t = self.table
        if self.question_kind == "column-max":
            col = t.column(t.column_index(self.target))
            best = max(int(v) for v in col)
            return {i for i, v in enumerate(col) if int(v) == best}
        col = t.column(t.column_index(self.key))
        return {i for i, v in enumerate(col) if v == self.value}


def _fmt(x: int) -> str:
    return str(int(x))


def compute_answer(task: SyntheticTask, sub: Table, strategy: str = "correct") -> str | None:
    """Answer ``task`` by reading only ``sub``; None when the sub-table lacks what is needed."""
    cols = sub.columns
    kind = task.question_kind

    def col(name):
        return sub.column(cols.index(name))

    def numeric_others():
        return [c for c in cols if c not in (KEY_COLUMN, GROUP_COLUMN, task.target)]

    if kind == "filtered-count":
        if task.key not in cols:
            return None
        keys = col(task.key)
        if strategy == "correct":
            return _fmt(sum(v == task.value for v in keys))
        if strategy == "wrong-aggregate":
            return _fmt(len(keys))
        return _fmt(sum(v != task.value for v in keys))

    target = task.target
    if strategy == "wrong-column":
        others = numeric_others()
        if not others:
            return None
        target = others[0]
    if target not in cols:
        return None
    values = col(target)

    if kind == "column-max":
        if not values:
            return None
        nums = [int(v) for v in values]
        return _fmt(min(nums) if strategy == "wrong-aggregate" else max(nums))

    if kind == "cell-lookup":
        if strategy == "wrong-aggregate":
            return values[0] if values else None
        if task.key not in cols:
            return None
        hits = [v for k, v in zip(col(task.key), values) if k == task.value]
        return hits[0] if len(hits) == 1 else None

    # column-sum over the rows of one group
    if task.key not in cols:
        return None
    picked = [int(v) for k, v in zip(col(task.key), values) if k == task.value]
    if strategy == "wrong-aggregate":
        return _fmt(max(picked)) if picked else None
    return _fmt(sum(picked))


def answer_in_region(task: SyntheticTask, region: TableRegion, strategy: str = "correct") -> str | None:
    return compute_answer(task, extract_subtable(task.table, region), strategy)


def is_minimal(task: SyntheticTask) -> bool:
    """Gold region yields the gold answer, and dropping any single row or column breaks it."""
    gold = task.gold_answer.render()
    region = task.gold_region
    if answer_in_region(task, region) != gold:
        return False
    for c in region.columns:
        smaller = TableRegion(tuple(x for x in region.columns if x != c), region.rows)
        if answer_in_region(task, smaller) == gold:
            return False
    for r in region.rows:
        smaller = TableRegion(region.columns, tuple(x for x in region.rows if x != r))
        if answer_in_region(task, smaller) == gold:
            return False
    return True


def _make_table(rng: np.random.Generator, shape: ShapeConfig) -> Table:
    n_rows = int(rng.integers(shape.min_rows, shape.max_rows + 1))
    n_cols = int(rng.integers(shape.min_cols, shape.max_cols + 1))
    names = [str(x) for x in rng.choice(_NAMES, size=n_rows, replace=False)]
    groups = [str(x) for x in rng.choice(_GROUPS, size=n_rows)]
    metrics = [str(x) for x in rng.choice(_METRICS, size=n_cols - 2, replace=False)]
    values = rng.integers(1, shape.max_value + 1, size=(n_rows, n_cols - 2))
    columns = [KEY_COLUMN, GROUP_COLUMN] + metrics
    order = rng.permutation(n_cols)
    columns = [columns[i] for i in order]
    rows = []
    for i in range(n_rows):
        full = [names[i], groups[i]] + [str(v) for v in values[i]]
        rows.append(tuple(full[j] for j in order))
    return Table(tuple(columns), tuple(rows))


def _make_task(rng: np.random.Generator, table: Table, kind: str) -> SyntheticTask | None:
    metrics = [c for c in table.columns if c not in (KEY_COLUMN, GROUP_COLUMN)]
    key_idx = table.column_index(KEY_COLUMN)
    group_idx = table.column_index(GROUP_COLUMN)
    if kind == "cell-lookup":
        row = int(rng.integers(table.n_rows))
        target = str(rng.choice(metrics + [GROUP_COLUMN]))
        name = table.rows[row][key_idx]
        t_idx = table.column_index(target)
        cell = table.rows[row][t_idx]
        gold = AnswerSpec("text", cell) if target == GROUP_COLUMN else AnswerSpec("numeric", int(cell))
        return SyntheticTask(
            table, kind, TableRegion((key_idx, t_idx), (row,)), gold,
            f"What is the {target} of {name}?", target=target, key=KEY_COLUMN, value=name,
        )
    if kind == "column-max":
        target = str(rng.choice(metrics))
        t_idx = table.column_index(target)
        col = [int(v) for v in table.column(t_idx)]
        best = max(col)
        if col.count(best) != 1:
            return None
        return SyntheticTask(
            table, kind, TableRegion((t_idx,), (col.index(best),)), AnswerSpec("numeric", best),
            f"What is the highest {target}?", target=target,
        )
    group = str(rng.choice(sorted(set(table.column(group_idx)))))
    rows = tuple(i for i, g in enumerate(table.column(group_idx)) if g == group)
    if kind == "filtered-count":
        return SyntheticTask(
            table, kind, TableRegion((group_idx,), rows), AnswerSpec("numeric", len(rows)),
            f"How many rows have group {group}?", key=GROUP_COLUMN, value=group,
        )
    target = str(rng.choice(metrics))
    t_idx = table.column_index(target)
    total = sum(int(table.rows[i][t_idx]) for i in rows)
    return SyntheticTask(
        table, kind, TableRegion((group_idx, t_idx), rows), AnswerSpec("numeric", total),
        f"What is the total {target} of group {group}?", target=target, key=GROUP_COLUMN, value=group,
    )


def generate_tasks(seed: int, count: int, shape: ShapeConfig | None = None) -> list[SyntheticTask]:
    """Deterministic task list for ``seed``; question kinds cycle through ``shape.kinds``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    shape = shape or ShapeConfig()
    rng = np.random.default_rng(seed)
    tasks = []
    while len(tasks) < count:
        kind = shape.kinds[len(tasks) % len(shape.kinds)]
        task = _make_task(rng, _make_table(rng, shape), kind)
        if task is None or not is_minimal(task):
            continue
        object.__setattr__(task, "task_id", len(tasks))
        tasks.append(task)
    return tasks


def split_tasks(tasks: list, val_fraction: float = 0.1) -> tuple[list, list]:
    """Train/validation split (9:1 by default), taking the tail as validation."""
    n_val = max(1, int(round(len(tasks) * val_fraction)))
    if n_val >= len(tasks):
        raise ValueError("not enough tasks to hold out a validation split")
    return tasks[:-n_val], tasks[-n_val:]


def candidate_subsets(gold: tuple[int, ...], n: int, cap: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    """Capped list of index subsets of range(n) for the policy to choose from.

    When every subset fits under ``cap`` the list is exhaustive (including the
    empty set); otherwise it holds the gold subset, its one-element edits, the
    full set and random fillers, then is cut down to ``cap``.
    """
    if 2 ** n <= cap:
        subsets = [tuple(c) for k in range(n + 1) for c in combinations(range(n), k)]
        return [subsets[int(i)] for i in rng.permutation(len(subsets))]
    gold_set = set(gold)
    pool = [tuple(sorted(gold_set))]
    pool += [tuple(sorted(gold_set - {x})) for x in sorted(gold_set)]
    pool += [tuple(sorted(gold_set | {x})) for x in range(n) if x not in gold_set]
    pool.append(tuple(range(n)))
    for _ in range(cap):
        size = int(rng.integers(1, n + 1))
        pool.append(tuple(sorted(int(x) for x in rng.choice(n, size=size, replace=False))))
    unique = list(dict.fromkeys(pool))
    keep = list(dict.fromkeys([unique[0], tuple(range(n))]))
    rest = [s for s in unique if s not in keep]
    picked = rng.choice(len(rest), size=min(cap - len(keep), len(rest)), replace=False)
    chosen = keep + [rest[int(i)] for i in sorted(picked)]
    return [chosen[int(i)] for i in rng.permutation(len(chosen))]
