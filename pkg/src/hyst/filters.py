"""Metadata filter expression language.

A filter is a flat conjunction: one predicate per column, every clause must
hold. The wire format is the JSON dialect vector databases accept, e.g.::

    {"CATEGORY": {"$in": ["Italian", "French"]},
     "LOCATION": {"$eq": "New York"},
     "PRICE": {"$lt": 100}}

Parsing is strict (unknown operators, bad arity and double operators are
errors); validation against a schema never throws, it drops or rewrites bad
clauses and reports what happened. That split keeps recall when an upstream
LLM partially errs: one hallucinated column costs one clause, not the query.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .corpus import AttrValue, Record, Schema

Scalar = str | int | float


class FilterParseError(ValueError):
    """Raised when a wire-format filter cannot be parsed."""


def _is_number(v: object) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_scalar(v: object) -> bool:
    return isinstance(v, str) or _is_number(v)


@dataclass(frozen=True)
class Eq:
    value: Scalar


@dataclass(frozen=True)
class In:
    values: tuple[Scalar, ...]

    def __post_init__(self) -> None:
        if len(self.values) == 0:
            raise FilterParseError("$in requires a non-empty list")
        object.__setattr__(self, "values", tuple(dict.fromkeys(self.values)))


@dataclass(frozen=True)
class Lt:
    value: float


@dataclass(frozen=True)
class Gt:
    value: float


@dataclass(frozen=True)
class Between:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise FilterParseError(f"$between bounds out of order: [{self.lo}, {self.hi}]")


Predicate = Eq | In | Lt | Gt | Between

_NUMERIC_OPS = (Lt, Gt, Between)


@dataclass(frozen=True)
class FilterExpr:
    """Conjunction of per-column predicates; empty means match-everything."""

    clauses: dict[str, Predicate] = field(default_factory=dict)

    def is_universal(self) -> bool:
        return not self.clauses

    def to_wire(self) -> dict:
        """Serialize back to the JSON wire dialect."""
        out: dict[str, dict] = {}
        for col, pred in self.clauses.items():
            if isinstance(pred, Eq):
                out[col] = {"$eq": pred.value}
            elif isinstance(pred, In):
                out[col] = {"$in": list(pred.values)}
            elif isinstance(pred, Lt):
                out[col] = {"$lt": pred.value}
            elif isinstance(pred, Gt):
                out[col] = {"$gt": pred.value}
            else:
                out[col] = {"$between": [pred.lo, pred.hi]}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_wire(), ensure_ascii=False)


UNIVERSAL = FilterExpr()


@dataclass
class ValidationReport:
    """Outcome of checking a parsed filter against a schema.

    accepted holds the surviving (possibly rewritten) clauses; dropped_clauses
    records (column, reason) for everything removed; value_corrections records
    case-folded rewrites of categorical operands onto canonical allowable
    values; warnings carries planner-level notes (e.g. degraded-mode fallbacks).
    """

    accepted: FilterExpr
    dropped_clauses: list[tuple[str, str]] = field(default_factory=list)
    value_corrections: list[tuple[str, str, str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted.to_wire(),
            "dropped_clauses": [list(t) for t in self.dropped_clauses],
            "value_corrections": [list(t) for t in self.value_corrections],
            "warnings": list(self.warnings),
        }


def _parse_predicate(col: str, body: object) -> Predicate:
    if not isinstance(body, dict):
        raise FilterParseError(f"{col}: clause must be a single-operator object, got {body!r}")
    if len(body) != 1:
        raise FilterParseError(f"{col}: expected exactly one operator, got {len(body)}")
    (op, operand), = body.items()
    if op == "$eq":
        if not _is_scalar(operand):
            raise FilterParseError(f"{col}: $eq operand must be a scalar, got {operand!r}")
        return Eq(operand)
    if op == "$in":
        if not isinstance(operand, list) or not operand or not all(_is_scalar(v) for v in operand):
            raise FilterParseError(f"{col}: $in operand must be a non-empty list of scalars")
        return In(tuple(operand))
    if op == "$lt":
        if not _is_number(operand):
            raise FilterParseError(f"{col}: $lt operand must be a number, got {operand!r}")
        return Lt(operand)
    if op == "$gt":
        if not _is_number(operand):
            raise FilterParseError(f"{col}: $gt operand must be a number, got {operand!r}")
        return Gt(operand)
    if op == "$between":
        if (
            not isinstance(operand, list)
            or len(operand) != 2
            or not all(_is_number(v) for v in operand)
        ):
            raise FilterParseError(f"{col}: $between operand must be a 2-element numeric array")
        return Between(operand[0], operand[1])
    raise FilterParseError(f"{col}: unknown operator {op!r}")


def parse_filter(raw: str) -> FilterExpr:
    """Parse the JSON wire format into a FilterExpr.

    Raises FilterParseError on JSON syntax errors, unknown operators, wrong
    operand arity or type, and repeated columns.
    """
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise FilterParseError(f"not valid JSON: {exc.msg}") from exc
    return filter_from_wire(data)


def filter_from_wire(data: object) -> FilterExpr:
    if not isinstance(data, dict):
        raise FilterParseError(f"filter must be a JSON object, got {type(data).__name__}")
    clauses: dict[str, Predicate] = {}
    for col, body in data.items():
        if col in clauses:
            raise FilterParseError(f"column {col!r} appears twice")
        clauses[col] = _parse_predicate(col, body)
    return FilterExpr(clauses=clauses)


def _match_allowable(raw: str, allowable: tuple[str, ...]) -> str | None:
    """Case-insensitive lookup of raw against the canonical vocabulary."""
    key = raw.casefold()
    for canonical in allowable:
        if canonical.casefold() == key:
            return canonical
    return None


def validate(expr: FilterExpr, schema: Schema) -> ValidationReport:
    """Check a filter against a schema; never raises.

    Clauses on unknown columns are dropped (the hallucination defense).
    String operands on closed-vocabulary columns are case-insensitively
    rewritten onto the canonical allowable value; a clause whose operands
    all miss the vocabulary is dropped as "unknown value" (an In keeps its
    matching subset). Numeric comparisons on non-numeric columns are dropped
    as "type mismatch". Eq on a multiple-valued column is rewritten to a
    one-element In.
    """
    accepted: dict[str, Predicate] = {}
    dropped: list[tuple[str, str]] = []
    corrections: list[tuple[str, str, str]] = []

    for col_name, pred in expr.clauses.items():
        col = schema.find(col_name)
        if col is None:
            dropped.append((col_name, "unknown column"))
            continue

        if isinstance(pred, _NUMERIC_OPS):
            if col.kind != "numeric":
                dropped.append((col.name, "type mismatch"))
                continue
            accepted[col.name] = pred
            continue

        # Eq / In on a numeric column only makes sense with numeric operands.
        operands = [pred.value] if isinstance(pred, Eq) else list(pred.values)
        if col.kind == "numeric":
            if all(_is_number(v) for v in operands):
                accepted[col.name] = pred
            else:
                dropped.append((col.name, "type mismatch"))
            continue

        if col.allowable_values is not None:
            matched: list[Scalar] = []
            for v in operands:
                if not isinstance(v, str):
                    continue
                canonical = _match_allowable(v, col.allowable_values)
                if canonical is None:
                    continue
                if canonical != v:
                    corrections.append((col.name, v, canonical))
                matched.append(canonical)
            if not matched:
                dropped.append((col.name, "unknown value"))
                continue
            operands = matched

        if col.kind == "multiple":
            accepted[col.name] = In(tuple(operands))
        elif len(operands) == 1 and isinstance(pred, Eq):
            accepted[col.name] = Eq(operands[0])
        else:
            accepted[col.name] = In(tuple(operands))

    return ValidationReport(
        accepted=FilterExpr(clauses=accepted),
        dropped_clauses=dropped,
        value_corrections=corrections,
    )


def _match_predicate(pred: Predicate, value: AttrValue) -> bool:
    if isinstance(pred, Eq):
        if isinstance(value, list):
            return pred.value in value
        return value == pred.value
    if isinstance(pred, In):
        if isinstance(value, list):
            return any(v in pred.values for v in value)
        return value in pred.values
    # Numeric comparisons require a numeric stored value; a type mismatch
    # means the constraint cannot be positively satisfied.
    if not _is_number(value):
        return False
    if isinstance(pred, Lt):
        return value < pred.value
    if isinstance(pred, Gt):
        return value > pred.value
    return pred.lo <= value <= pred.hi


def matches_attrs(expr: FilterExpr, attrs: dict[str, AttrValue]) -> bool:
    """True iff every clause holds against the attribute map.

    A clause on an attribute the record does not carry is false: hard
    constraints must be positively satisfied, never vacuously.
    """
    for col, pred in expr.clauses.items():
        if col not in attrs:
            return False
        if not _match_predicate(pred, attrs[col]):
            return False
    return True


def matches(expr: FilterExpr, record: Record) -> bool:
    """True iff the record's attrs satisfy every clause of the filter."""
    return matches_attrs(expr, record.attrs)
