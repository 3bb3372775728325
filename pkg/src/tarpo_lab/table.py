"""Tables, table regions and region declarations embedded in model responses.

Rows are addressed by 0-based position among the data rows (the header is not
a row). Columns are addressed by name or 0-based index on input and stored as
indices. Gold data must follow the same convention.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterator

from .errors import MalformedTable, RegionSyntaxError, RowIndexOutOfRange, UnknownColumn

REASONING_KINDS = ("DP", "TCoT", "SCoT", "PoT")


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        columns = tuple(str(c).strip() for c in self.columns)
        if len(set(columns)) != len(columns):
            raise MalformedTable(f"duplicate column names: {list(columns)}")
        rows = tuple(tuple(str(cell).strip() for cell in row) for row in self.rows)
        for i, row in enumerate(rows):
            if len(row) != len(columns):
                raise MalformedTable(
                    f"row {i} has {len(row)} cells, expected {len(columns)}"
                )
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "rows", rows)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    def column_index(self, name: str) -> int:
        try:
            return self.columns.index(name.strip())
        except ValueError:
            raise UnknownColumn(name) from None

    def column(self, index: int) -> list[str]:
        return [row[index] for row in self.rows]

    def to_record(self) -> dict:
        return {"columns": list(self.columns), "rows": [list(r) for r in self.rows]}

    @classmethod
    def from_record(cls, record: dict) -> "Table":
        try:
            return cls(tuple(record["columns"]), tuple(tuple(r) for r in record["rows"]))
        except (KeyError, TypeError) as exc:
            raise MalformedTable(f"bad table record: {exc}") from None


@dataclass(frozen=True)
class TableRegion:
    """Canonical region: sorted, duplicate-free column and row indices."""

    columns: tuple[int, ...] = ()
    rows: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(sorted(set(int(c) for c in self.columns))))
        object.__setattr__(self, "rows", tuple(sorted(set(int(r) for r in self.rows))))

    @property
    def n_cells(self) -> int:
        return len(self.columns) * len(self.rows)


@dataclass(frozen=True)
class RawRegion:
    """A region as declared in text: column names or indices, row indices, unvalidated."""

    columns: tuple = ()
    rows: tuple = ()


@dataclass(frozen=True)
class RegionAnnotatedResponse:
    raw_text: str
    region: TableRegion | None
    answer_text: str | None
    reasoning_kind: str = "TCoT"
    raw_region: RawRegion | None = None
    region_span: tuple[int, int] | None = None
    region_error: str | None = field(default=None, compare=False)


# --- markdown ---------------------------------------------------------------

_SEPARATOR_CELL = re.compile(r"^:?-+:?$")
_PIPE_SPLIT = re.compile(r"(?<!\\)\|")


def _split_row(line: str) -> list[str]:
    line = line.strip()
    if line.startswith("|"):
        line = line[1:]
    if line.endswith("|") and not line.endswith("\\|"):
        line = line[:-1]
    return [cell.strip().replace("\\|", "|") for cell in _PIPE_SPLIT.split(line)]


def parse_table(text: str) -> Table:
    """Parse a markdown pipe table (header, separator, zero or more body rows)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2 or "|" not in lines[0]:
        raise MalformedTable("missing header or separator row")
    header = _split_row(lines[0])
    separator = _split_row(lines[1])
    if not all(_SEPARATOR_CELL.match(cell.replace(" ", "")) for cell in separator):
        raise MalformedTable("second line is not a header separator")
    if len(separator) != len(header):
        raise MalformedTable("separator width does not match header")
    rows = []
    for lineno, line in enumerate(lines[2:], start=3):
        cells = _split_row(line)
        if len(cells) != len(header):
            raise MalformedTable(f"line {lineno}: {len(cells)} cells, expected {len(header)}")
        rows.append(tuple(cells))
    return Table(tuple(header), tuple(rows))


def to_markdown(table: Table) -> str:
    def esc(cell):
        return cell.replace("|", "\\|")

    lines = ["| " + " | ".join(esc(c) for c in table.columns) + " |"]
    lines.append("|" + "|".join("---" for _ in table.columns) + "|")
    for row in table.rows:
        lines.append("| " + " | ".join(esc(c) for c in row) + " |")
    return "\n".join(lines)


# --- regions ----------------------------------------------------------------

def canonicalize_region(region: RawRegion | TableRegion, table: Table) -> TableRegion:
    """Resolve names to indices, deduplicate, sort and range-check against ``table``."""
    cols = []
    for c in region.columns:
        if isinstance(c, bool):
            raise UnknownColumn(c)
        if isinstance(c, int):
            if not 0 <= c < table.n_cols:
                raise UnknownColumn(c)
            cols.append(c)
        else:
            cols.append(table.column_index(str(c)))
    rows = []
    for r in region.rows:
        if isinstance(r, bool) or not isinstance(r, int):
            raise RowIndexOutOfRange(r, table.n_rows)
        if not 0 <= r < table.n_rows:
            raise RowIndexOutOfRange(r, table.n_rows)
        rows.append(r)
    return TableRegion(tuple(cols), tuple(rows))


def full_region(table: Table) -> TableRegion:
    return TableRegion(tuple(range(table.n_cols)), tuple(range(table.n_rows)))


def extract_subtable(table: Table, region: TableRegion) -> Table:
    region = canonicalize_region(region, table)
    columns = tuple(table.columns[c] for c in region.columns)
    rows = tuple(tuple(table.rows[r][c] for c in region.columns) for r in region.rows)
    return Table(columns, rows)


def serialize_region(region: TableRegion, table: Table) -> str:
    """Canonical text form, e.g. ``T_reg = {["Single"], [1, 3]}``."""
    region = canonicalize_region(region, table)
    cols = ", ".join(json.dumps(table.columns[c], ensure_ascii=False) for c in region.columns)
    rows = ", ".join(str(r) for r in region.rows)
    return f"T_reg = {{[{cols}], [{rows}]}}"


def serialize_raw_region(raw: RawRegion) -> str:
    """Serialize a region that is not bound to a table.

    Column names are deduplicated and sorted lexicographically (integer indices
    first), rows deduplicated and sorted numerically.
    """
    ints = sorted({c for c in raw.columns if isinstance(c, int)})
    names = sorted({str(c) for c in raw.columns if not isinstance(c, int)})
    parts = [str(i) for i in ints] + [json.dumps(n, ensure_ascii=False) for n in names]
    rows = ", ".join(str(r) for r in sorted(set(raw.rows)))
    return f"T_reg = {{[{', '.join(parts)}], [{rows}]}}"


_REG_MARKER = re.compile(r"T_\{?reg\}?\s*=\s*")
_OBJ_MARKER = re.compile(r'\{\s*"columns"\s*:')
_DECODER = json.JSONDecoder()


def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos].isspace():
        pos += 1
    return pos


def _coerce_columns(values) -> tuple:
    if not isinstance(values, list):
        raise RegionSyntaxError("column list expected")
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (str, int)):
            raise RegionSyntaxError(f"bad column identifier {v!r}")
        out.append(v)
    return tuple(out)


def _coerce_rows(values) -> tuple:
    if not isinstance(values, list):
        raise RegionSyntaxError("row list expected")
    out = []
    for v in values:
        if isinstance(v, str) and v.strip().isdigit():
            v = int(v)
        if isinstance(v, bool) or not isinstance(v, int):
            raise RegionSyntaxError(f"bad row identifier {v!r}")
        out.append(v)
    return tuple(out)


def _parse_object_form(text: str, start: int) -> tuple[RawRegion, int]:
    try:
        obj, end = _DECODER.raw_decode(text, start)
    except json.JSONDecodeError as exc:
        raise RegionSyntaxError(f"unparseable region object at {start}: {exc.msg}") from None
    if not isinstance(obj, dict) or "columns" not in obj or "rows" not in obj:
        raise RegionSyntaxError("region object needs 'columns' and 'rows'")
    return RawRegion(_coerce_columns(obj["columns"]), _coerce_rows(obj["rows"])), end


def _parse_marker_form(text: str, pos: int) -> tuple[RawRegion, int]:
    pos = _skip_ws(text, pos)
    if pos >= len(text) or text[pos] != "{":
        raise RegionSyntaxError("expected '{' after T_reg")
    inner = _skip_ws(text, pos + 1)
    if inner < len(text) and text[inner] == '"':
        return _parse_object_form(text, pos)
    lists = []
    cur = inner
    for i in range(2):
        try:
            value, cur = _DECODER.raw_decode(text, cur)
        except json.JSONDecodeError:
            raise RegionSyntaxError(f"unparseable region body at {cur}") from None
        lists.append(value)
        cur = _skip_ws(text, cur)
        expected = "," if i == 0 else "}"
        if cur >= len(text) or text[cur] != expected:
            raise RegionSyntaxError(f"expected {expected!r} at {cur}")
        cur = _skip_ws(text, cur + 1) if i == 0 else cur + 1
    return RawRegion(_coerce_columns(lists[0]), _coerce_rows(lists[1])), cur


def _next_marker(text: str, pos: int):
    a = _REG_MARKER.search(text, pos)
    b = _OBJ_MARKER.search(text, pos)
    if a is None and b is None:
        return None
    if b is None or (a is not None and a.start() <= b.start()):
        return "reg", a
    return "obj", b


def iter_region_declarations(text: str) -> Iterator[tuple[RawRegion | RegionSyntaxError, tuple[int, int]]]:
    """Yield every declaration in order; malformed ones are yielded as the error."""
    pos = 0
    while True:
        found = _next_marker(text, pos)
        if found is None:
            return
        kind, m = found
        try:
            if kind == "reg":
                raw, end = _parse_marker_form(text, m.end())
            else:
                raw, end = _parse_object_form(text, m.start())
        except RegionSyntaxError as exc:
            yield exc, (m.start(), m.end())
            pos = m.end()
            continue
        yield raw, (m.start(), end)
        pos = end


def parse_region_from_text(raw_text: str) -> tuple[RawRegion, tuple[int, int]] | None:
    """Return the first region declaration in ``raw_text`` with its span, or None.

    Raises RegionSyntaxError when the first declaration marker has a broken body.
    """
    for item, span in iter_region_declarations(raw_text):
        if isinstance(item, RegionSyntaxError):
            raise item
        return item, span
    return None


_ANSWER_MARKER = re.compile(r"final answer\s*:", re.IGNORECASE)


def find_answer(raw_text: str) -> tuple[str, int] | None:
    """Text after the last ``Final Answer:`` marker (to end of line) and the marker offset."""
    matches = list(_ANSWER_MARKER.finditer(raw_text))
    if not matches:
        return None
    m = matches[-1]
    rest = raw_text[m.end():]
    return rest.split("\n", 1)[0].strip(), m.start()


def parse_response(raw_text: str, table: Table | None = None, reasoning_kind: str = "TCoT") -> RegionAnnotatedResponse:
    """Split a response into its region declaration and final answer.

    A region that does not bind to ``table`` (unknown column, row out of range)
    or has a broken body is reported through ``region_error`` with ``region`` None.
    """
    if reasoning_kind not in REASONING_KINDS:
        raise ValueError(f"unknown reasoning kind {reasoning_kind!r}")
    answer = find_answer(raw_text)
    answer_text = answer[0] if answer else None
    try:
        found = parse_region_from_text(raw_text)
    except RegionSyntaxError as exc:
        return RegionAnnotatedResponse(raw_text, None, answer_text, reasoning_kind, region_error=str(exc))
    if found is None:
        return RegionAnnotatedResponse(raw_text, None, answer_text, reasoning_kind)
    raw, span = found
    region = None
    error = None
    if table is not None:
        try:
            region = canonicalize_region(raw, table)
        except (UnknownColumn, RowIndexOutOfRange) as exc:
            error = str(exc)
    return RegionAnnotatedResponse(raw_text, region, answer_text, reasoning_kind, raw, span, error)

