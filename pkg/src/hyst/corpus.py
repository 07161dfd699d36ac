"""Schema and record model for semi-structured tabular corpora.

A corpus mixes typed attribute columns (brand, category, price) with free
text fields (title, description, reviews). Structured columns become the
metadata that filters run against; the text fields are concatenated into a
single string that dense retrieval embeds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

AttrValue = str | int | float | list[str]

COLUMN_KINDS = ("single", "multiple", "numeric")

# Separator between concatenated text fields; keeps field boundaries
# visible to embedders.
TEXT_JOIN_SEP = " \n "


class SchemaError(ValueError):
    """Raised when a schema file or schema definition is invalid."""


class IngestError(ValueError):
    """Raised for corpus-level ingest failures (not per-row skips)."""


@dataclass(frozen=True)
class ColumnSpec:
    """One declared structured column.

    kind is "single" (one scalar per record), "multiple" (a list of string
    values per record) or "numeric". allowable_values, when present, is the
    closed vocabulary for a categorical column.
    """

    name: str
    kind: str
    allowable_values: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in COLUMN_KINDS:
            raise SchemaError(
                f"column {self.name!r}: unknown kind {self.kind!r} "
                f"(expected one of {', '.join(COLUMN_KINDS)})"
            )
        if self.allowable_values is not None:
            if self.kind == "numeric":
                raise SchemaError(
                    f"column {self.name!r}: numeric columns cannot declare allowable_values"
                )
            if len(self.allowable_values) == 0:
                raise SchemaError(
                    f"column {self.name!r}: allowable_values must be non-empty when present"
                )


@dataclass(frozen=True)
class Schema:
    """Ordered collection of column specs with case-insensitively unique names."""

    columns: tuple[ColumnSpec, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for col in self.columns:
            key = col.name.casefold()
            if key in seen:
                raise SchemaError(f"duplicate column name {col.name!r}")
            seen.add(key)

    def find(self, name: str) -> ColumnSpec | None:
        """Look up a column case-insensitively; returns None when absent."""
        key = name.casefold()
        for col in self.columns:
            if col.name.casefold() == key:
                return col
        return None

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(col.name for col in self.columns)


@dataclass
class Record:
    """One corpus row: identifier, structured attrs, and unstructured text."""

    id: str
    attrs: dict[str, AttrValue] = field(default_factory=dict)
    text: str = ""
    embedding: list[float] | None = None


@dataclass(frozen=True)
class SkippedRow:
    """Diagnostic for a row dropped during ingest."""

    line_number: int
    reason: str


@dataclass
class IngestResult:
    records: list[Record]
    skipped: list[SkippedRow]


def load_schema(path: str | Path) -> Schema:
    """Load and validate a schema JSON file.

    Expected shape::

        {"columns": [{"name": "BRAND", "kind": "single",
                      "allowable_values": ["..."]}, ...]}
    """
    raw = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("columns"), list):
        raise SchemaError(f"{path}: expected an object with a 'columns' list")
    return schema_from_dict(data)


def schema_from_dict(data: dict) -> Schema:
    columns = []
    for i, entry in enumerate(data.get("columns", [])):
        if not isinstance(entry, dict):
            raise SchemaError(f"column #{i}: expected an object, got {type(entry).__name__}")
        name = entry.get("name")
        if not isinstance(name, str) or not name:
            raise SchemaError(f"column #{i}: missing or invalid 'name'")
        kind = entry.get("kind")
        if isinstance(kind, (list, tuple)):
            raise SchemaError(f"column {name!r}: declares multiple kinds {kind!r}")
        if not isinstance(kind, str):
            raise SchemaError(f"column {name!r}: missing or invalid 'kind'")
        allowable = entry.get("allowable_values")
        if allowable is not None:
            if not isinstance(allowable, list) or not all(isinstance(v, str) for v in allowable):
                raise SchemaError(f"column {name!r}: allowable_values must be a list of strings")
            allowable = tuple(dict.fromkeys(allowable))
        columns.append(ColumnSpec(name=name, kind=kind, allowable_values=allowable))
    return Schema(columns=tuple(columns))


def schema_to_dict(schema: Schema) -> dict:
    return {
        "columns": [
            {
                "name": col.name,
                "kind": col.kind,
                **(
                    {"allowable_values": list(col.allowable_values)}
                    if col.allowable_values is not None
                    else {}
                ),
            }
            for col in schema.columns
        ]
    }


def _dedupe(values: list[str]) -> list[str]:
    return list(dict.fromkeys(values))


def _coerce_attr(col: ColumnSpec, value: object) -> AttrValue:
    """Normalize one raw JSON value to the column's kind; raises ValueError."""
    if col.kind == "numeric":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"column {col.name!r}: expected a number, got {value!r}")
        return value
    if col.kind == "multiple":
        if isinstance(value, str):
            return [value]
        if isinstance(value, list) and all(isinstance(v, str) for v in value):
            return _dedupe(value)
        raise ValueError(f"column {col.name!r}: expected a string or list of strings, got {value!r}")
    # single
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        raise ValueError(f"column {col.name!r}: expected a scalar, got {value!r}")
    return value


def ingest_with_report(
    path: str | Path,
    schema: Schema,
    text_fields: list[str] | tuple[str, ...],
) -> IngestResult:
    """Parse a corpus JSONL file into Records, collecting per-row skip diagnostics.

    Each line is one JSON object. The reserved key "id" identifies the
    record; keys matching schema columns become structured attrs; the values
    of ``text_fields`` (in the given order) are joined with TEXT_JOIN_SEP
    into the record's text. Rows that fail to parse or violate a column
    kind are skipped and reported with their line number. Duplicate ids are
    a hard error: silently overwriting records would corrupt downstream
    relevance judgments.
    """
    records: list[Record] = []
    skipped: list[SkippedRow] = []
    seen_ids: dict[str, int] = {}

    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                skipped.append(SkippedRow(line_number, f"invalid JSON: {exc.msg}"))
                continue
            if not isinstance(row, dict):
                skipped.append(SkippedRow(line_number, "row is not a JSON object"))
                continue
            raw_id = row.get("id")
            if raw_id is None or isinstance(raw_id, (dict, list, bool)):
                skipped.append(SkippedRow(line_number, "missing or invalid 'id'"))
                continue
            doc_id = str(raw_id)
            if doc_id in seen_ids:
                raise IngestError(
                    f"line {line_number}: duplicate id {doc_id!r} "
                    f"(first seen on line {seen_ids[doc_id]})"
                )

            attrs: dict[str, AttrValue] = {}
            bad_attr: str | None = None
            for col in schema.columns:
                if col.name not in row or row[col.name] is None:
                    continue
                try:
                    attrs[col.name] = _coerce_attr(col, row[col.name])
                except ValueError as exc:
                    bad_attr = str(exc)
                    break
            if bad_attr is not None:
                skipped.append(SkippedRow(line_number, bad_attr))
                continue

            parts = [str(row[f]) for f in text_fields if row.get(f) is not None]
            seen_ids[doc_id] = line_number
            records.append(Record(id=doc_id, attrs=attrs, text=TEXT_JOIN_SEP.join(parts)))

    return IngestResult(records=records, skipped=skipped)


def ingest(
    path: str | Path,
    schema: Schema,
    text_fields: list[str] | tuple[str, ...],
) -> list[Record]:
    """Like :func:`ingest_with_report` but returns only the records."""
    return ingest_with_report(path, schema, text_fields).records


def _format_attr(value: AttrValue) -> str:
    if isinstance(value, list):
        return "; ".join(value)
    return str(value)


def linearize(record: Record, schema: Schema) -> str:
    """Flatten a record into one string for whole-record embedding.

    Schema columns appear in declaration order as "NAME: value" (multiple
    values joined by "; "), absent columns are omitted, and the record text
    always closes the string as "text: ...". This is the embedding input
    for the purely semantic baseline.
    """
    parts = [
        f"{col.name}: {_format_attr(record.attrs[col.name])}"
        for col in schema.columns
        if col.name in record.attrs
    ]
    parts.append(f"text: {record.text}")
    return ", ".join(parts)
