"""Line-delimited dataset and transcript files.

Dataset record (one JSON object per line)::

    {"schema_version": 1, "id": "q1", "table": {"columns": [...], "rows": [[...]]},
     "question": "...", "gold_answer": {"kind": "numeric", "value": 3},
     "gold_region": {"columns": ["Single"], "rows": [0, 2]}, "reasoning_kind": "TCoT"}

``table`` may also be a markdown pipe table string. Transcript record::

    {"id": "q1", "response": "... T_reg = {[\\"Single\\"], [0, 2]} ... Final Answer: 3"}
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .errors import MalformedTable, RowIndexOutOfRange, SchemaError, UnknownColumn
from .reward import AnswerSpec
from .table import REASONING_KINDS, RawRegion, Table, TableRegion, canonicalize_region, parse_table

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    table: Table
    question: str
    gold_answer: AnswerSpec
    gold_region: TableRegion
    reasoning_kind: str = "TCoT"

    def to_record(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "table": self.table.to_record(),
            "question": self.question,
            "gold_answer": self.gold_answer.to_record(),
            "gold_region": {"columns": list(self.gold_region.columns), "rows": list(self.gold_region.rows)},
            "reasoning_kind": self.reasoning_kind,
        }


@dataclass(frozen=True)
class Transcript:
    id: str
    response: str
    line: int


def read_jsonl(path: str | Path):
    """Yield (line number, object) for every non-blank line; SchemaError on bad JSON."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(path, lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise SchemaError(path, lineno, "record must be a JSON object")
            yield lineno, obj


def parse_record(obj: dict, path="<memory>", lineno: int = 0) -> DatasetRecord:
    def fail(reason):
        raise SchemaError(path, lineno, reason)

    version = obj.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        fail(f"unsupported schema_version {version!r}")
    for key in ("id", "table", "question", "gold_answer", "gold_region"):
        if key not in obj:
            fail(f"missing field {key!r}")
    try:
        raw_table = obj["table"]
        table = parse_table(raw_table) if isinstance(raw_table, str) else Table.from_record(raw_table)
    except MalformedTable as exc:
        fail(f"bad table: {exc}")
    try:
        gold_answer = AnswerSpec.from_record(obj["gold_answer"])
    except (KeyError, TypeError, ValueError) as exc:
        fail(f"bad gold_answer: {exc}")
    region = obj["gold_region"]
    if not isinstance(region, dict) or not isinstance(region.get("columns"), list) \
            or not isinstance(region.get("rows"), list):
        fail("gold_region needs 'columns' and 'rows' lists")
    try:
        gold_region = canonicalize_region(RawRegion(tuple(region["columns"]), tuple(region["rows"])), table)
    except (UnknownColumn, RowIndexOutOfRange) as exc:
        fail(f"gold_region does not fit the table: {exc}")
    kind = obj.get("reasoning_kind", "TCoT")
    if kind not in REASONING_KINDS:
        fail(f"unknown reasoning_kind {kind!r}")
    return DatasetRecord(str(obj["id"]), table, str(obj["question"]), gold_answer, gold_region, kind)


def load_dataset(path: str | Path) -> dict[str, DatasetRecord]:
    records: dict[str, DatasetRecord] = {}
    for lineno, obj in read_jsonl(path):
        rec = parse_record(obj, path, lineno)
        if rec.id in records:
            raise SchemaError(path, lineno, f"duplicate id {rec.id!r}")
        records[rec.id] = rec
    return records


def load_transcripts(path: str | Path) -> list[Transcript]:
    out = []
    for lineno, obj in read_jsonl(path):
        if "id" not in obj or not isinstance(obj.get("response"), str):
            raise SchemaError(path, lineno, "transcript needs 'id' and a string 'response'")
        out.append(Transcript(str(obj["id"]), obj["response"], lineno))
    return out


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def write_atomic(path: str | Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_jsonl(path: str | Path, records) -> None:
    write_atomic(path, "".join(dumps(r) + "\n" for r in records))
