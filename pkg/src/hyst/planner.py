"""Query decomposition: a natural-language question becomes a QueryPlan.

A plan pairs a validated metadata filter with a refined semantic query. Two
planners produce plans: an LLM-backed one (prompted to emit the JSON filter
dialect, with a second optional prompt that strips filtered constraints from
the query) and a deterministic rule-based one that scans the question for
exact allowable-value mentions and numeric phrases. The rule planner is the
offline test double: no network, reproducible bit for bit.

Refinement is a toggle, default off: isolating the subjective residue can
discard useful cues when the text fields already echo structured values, so
both arms of that trade-off stay reproducible.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

from .corpus import Schema
from .filters import (
    Between,
    Eq,
    FilterExpr,
    FilterParseError,
    Gt,
    In,
    Lt,
    Predicate,
    ValidationReport,
    parse_filter,
    validate,
)

LLM_TEMPERATURE = 0.3
LLM_TOP_P = 0.8
DEFAULT_VALUE_CAP = 500
TRUNCATION_MARKER = "..."


class LLMError(RuntimeError):
    """Transport-level LLM failure (plans abort; content never raises)."""


@dataclass
class QueryPlan:
    """raw query + validated filter + refined semantic query."""

    raw_query: str
    filter: FilterExpr
    refined_query: str
    validation: ValidationReport
    planner_id: str

    def to_dict(self) -> dict:
        return {
            "raw_query": self.raw_query,
            "filter": self.filter.to_wire(),
            "refined_query": self.refined_query,
            "validation": self.validation.to_dict(),
            "planner_id": self.planner_id,
        }


class LLMClient(Protocol):
    def complete(self, prompt: str, temperature: float, top_p: float) -> str: ...


def load_template(name: str) -> str:
    return (resources.files("hyst") / "templates" / name).read_text(encoding="utf-8")


def _pluralize(name: str) -> str:
    lower = name.lower()
    if lower.endswith("y") and len(lower) > 1:
        return lower[:-1] + "ies"
    return lower + "s"


def _format_values(values: Sequence[str] | None, cap: int) -> str:
    if not values:
        return ""
    shown = list(values[:cap])
    joined = ", ".join(shown)
    if len(values) > cap:
        joined += f", {TRUNCATION_MARKER}"
    return joined


_PLACEHOLDER_RE = re.compile(r"\{(allowable_[a-z0-9_]+|question)\}")


def render_prompt(
    schema: Schema,
    question: str,
    template: str | None = None,
    value_cap: int = DEFAULT_VALUE_CAP,
) -> str:
    """Fill the filter-generation template.

    {question} receives the user question; each {allowable_<column>}
    placeholder receives that column's allowable values, comma-joined and
    truncated to value_cap entries with a trailing marker. Placeholders
    naming no schema column render as an empty list. The template text may
    contain literal JSON braces, so only known placeholders are substituted.
    """
    if template is None:
        template = load_template("filter_prompt.txt")

    by_placeholder: dict[str, str] = {}
    for col in schema.columns:
        rendered = _format_values(col.allowable_values, value_cap)
        by_placeholder[f"allowable_{_pluralize(col.name)}"] = rendered
        by_placeholder[f"allowable_{col.name.lower()}"] = rendered

    def _sub(match: re.Match) -> str:
        key = match.group(1)
        if key == "question":
            return question
        return by_placeholder.get(key, "")

    return _PLACEHOLDER_RE.sub(_sub, template).rstrip("\n")


def render_refine_prompt(
    question: str,
    filter_expr: FilterExpr,
    template: str | None = None,
) -> str:
    if template is None:
        template = load_template("refine_prompt.txt")
    out = template.replace("{filter}", filter_expr.to_json())
    return out.replace("{question}", question).rstrip("\n")


def extract_json_object(text: str) -> str | None:
    """Return the first balanced {...} region that parses as JSON, else None.

    Models wrap their answers in code fences and prose; strict whole-string
    parsing would reject valid filters.
    """
    start = text.find("{")
    while start != -1:
        depth = 0
        in_str = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_str:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_str = False
            elif ch == '"':
                in_str = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    candidate = text[start : i + 1]
                    try:
                        json.loads(candidate)
                        return candidate
                    except json.JSONDecodeError:
                        break
        start = text.find("{", start + 1)
    return None


def _clean_text_response(text: str) -> str:
    out = text.strip()
    if out.startswith("```"):
        out = out.strip("`").strip()
        # Drop a leading language tag left by a fence.
        first, _, rest = out.partition("\n")
        if rest and " " not in first.strip():
            out = rest.strip()
    if len(out) >= 2 and out[0] == out[-1] and out[0] in "\"'":
        out = out[1:-1].strip()
    return out


def plan_llm(
    client: LLMClient,
    schema: Schema,
    query: str,
    refine: bool = False,
    *,
    filter_template: str | None = None,
    refine_template: str | None = None,
    value_cap: int = DEFAULT_VALUE_CAP,
    planner_id: str = "llm",
) -> QueryPlan:
    """Ask the LLM for a metadata filter (and optionally a refined query).

    The filter prompt is asked at temperature 0.3 / top-p 0.8; the first
    JSON object in the response is parsed and validated. Unparseable output
    gets exactly one re-ask, then the plan degrades to the universal filter
    with a warning instead of failing: a degraded plan still retrieves,
    a crash retrieves nothing. Transport errors propagate.
    """
    prompt = render_prompt(schema, query, template=filter_template, value_cap=value_cap)
    expr: FilterExpr | None = None
    warnings: list[str] = []
    for attempt in range(2):
        response = client.complete(prompt, temperature=LLM_TEMPERATURE, top_p=LLM_TOP_P)
        raw = extract_json_object(response)
        if raw is None:
            continue
        try:
            expr = parse_filter(raw)
            break
        except FilterParseError:
            continue
    if expr is None:
        expr = FilterExpr()
        warnings.append("filter generation failed after one re-ask; using universal filter")

    report = validate(expr, schema)
    report.warnings.extend(warnings)

    refined = query
    if refine:
        refine_prompt = render_refine_prompt(query, report.accepted, template=refine_template)
        raw_refined = client.complete(refine_prompt, temperature=LLM_TEMPERATURE, top_p=LLM_TOP_P)
        refined = _clean_text_response(raw_refined) or query

    return QueryPlan(
        raw_query=query,
        filter=report.accepted,
        refined_query=refined,
        validation=report,
        planner_id=planner_id,
    )


_WS_RE = re.compile(r"\s+")
_NUMBER = r"\$?(\d+(?:\.\d+)?)"
_BETWEEN_RE = re.compile(rf"\bbetween\s+{_NUMBER}\s+and\s+{_NUMBER}", re.IGNORECASE)
_LT_RE = re.compile(rf"\b(?:under|below)\s+{_NUMBER}", re.IGNORECASE)
_GT_RE = re.compile(rf"\b(?:over|above)\s+{_NUMBER}", re.IGNORECASE)


def _parse_number(token: str) -> int | float:
    return float(token) if "." in token else int(token)


def _value_spans(query: str, values: Sequence[str], claimed: list[tuple[int, int]]) -> list[tuple[int, int, str]]:
    """Boundary-checked, case-insensitive occurrences of allowable values.

    Longer values are claimed first so "table tennis" wins over "tennis".
    Returns (start, end, canonical value) spans that do not overlap spans
    already claimed.
    """
    low = query.lower()
    spans: list[tuple[int, int, str]] = []
    for value in sorted(values, key=len, reverse=True):
        needle = value.lower()
        if not needle:
            continue
        pos = low.find(needle)
        while pos != -1:
            end = pos + len(needle)
            before_ok = pos == 0 or not low[pos - 1].isalnum()
            after_ok = end == len(low) or not low[end].isalnum()
            overlaps = any(s < end and pos < e for s, e in claimed)
            if before_ok and after_ok and not overlaps:
                claimed.append((pos, end))
                spans.append((pos, end, value))
            pos = low.find(needle, pos + 1)
    return spans


def _numeric_spans(query: str) -> list[tuple[int, int, Predicate]]:
    spans: list[tuple[int, int, Predicate]] = []
    for match in _BETWEEN_RE.finditer(query):
        lo, hi = _parse_number(match.group(1)), _parse_number(match.group(2))
        spans.append((match.start(), match.end(), Between(min(lo, hi), max(lo, hi))))
    for match in _LT_RE.finditer(query):
        spans.append((match.start(), match.end(), Lt(_parse_number(match.group(1)))))
    for match in _GT_RE.finditer(query):
        spans.append((match.start(), match.end(), Gt(_parse_number(match.group(1)))))
    spans.sort(key=lambda t: t[0])
    return spans


def _numeric_target(schema: Schema, query: str) -> str | None:
    numeric_cols = [c for c in schema.columns if c.kind == "numeric"]
    if not numeric_cols:
        return None
    low = query.lower()
    for col in numeric_cols:
        if col.name.lower() in low:
            return col.name
    return numeric_cols[0].name


def _strip_spans(text: str, spans: list[tuple[int, int]]) -> str:
    if not spans:
        return text
    out = []
    last = 0
    for start, end in sorted(spans):
        out.append(text[last:start])
        last = end
    out.append(text[last:])
    return _WS_RE.sub(" ", "".join(out)).strip()


def _scan_once(schema: Schema, query: str) -> tuple[dict[str, list[str]], list[tuple[int, int, Predicate]], list[tuple[int, int]]]:
    claimed: list[tuple[int, int]] = []
    mentions: dict[str, list[str]] = {}
    for col in schema.columns:
        if not col.allowable_values:
            continue
        spans = _value_spans(query, col.allowable_values, claimed)
        if spans:
            spans.sort(key=lambda t: t[0])
            mentions[col.name] = list(dict.fromkeys(v for _, _, v in spans))
    numeric = _numeric_spans(query)
    removal = claimed + [(s, e) for s, e, _ in numeric]
    return mentions, numeric, removal


def plan_rules(schema: Schema, query: str, refine: bool = False) -> QueryPlan:
    """Deterministic rule-based planning.

    Scans the question case-insensitively for exact allowable-value mentions
    (one Eq for a lone mention on a single-valued column, In otherwise) and
    for numeric phrases: "under/below N" -> Lt, "over/above N" -> Gt,
    "between N and M" -> Between. The numeric clause lands on the numeric
    column whose name appears in the question, falling back to the first
    numeric column declared. Refinement removes the matched spans and
    collapses whitespace, iterated to a fixpoint so refining a refined
    query changes nothing.
    """
    mentions, numeric_spans, _ = _scan_once(schema, query)

    clauses: dict[str, Predicate] = {}
    for col_name, values in mentions.items():
        col = schema.find(col_name)
        if col is not None and col.kind == "single" and len(values) == 1:
            clauses[col_name] = Eq(values[0])
        else:
            clauses[col_name] = In(tuple(values))

    if numeric_spans:
        target = _numeric_target(schema, query)
        if target is not None and target not in clauses:
            # Between beats single-sided bounds when both appear.
            preds = [p for _, _, p in numeric_spans]
            between = next((p for p in preds if isinstance(p, Between)), None)
            clauses[target] = between if between is not None else preds[0]

    report = validate(FilterExpr(clauses=clauses), schema)

    refined = query
    if refine:
        current = query
        while True:
            _, _, spans = _scan_once(schema, current)
            stripped = _strip_spans(current, spans)
            if stripped == current:
                break
            current = stripped
        refined = current or query

    return QueryPlan(
        raw_query=query,
        filter=report.accepted,
        refined_query=refined,
        validation=report,
        planner_id="rules",
    )


class RulePlanner:
    """Stateless wrapper binding plan_rules to a schema."""

    planner_id = "rules"

    def __init__(self, schema: Schema):
        self.schema = schema

    def plan(self, query: str, refine: bool = False) -> QueryPlan:
        return plan_rules(self.schema, query, refine)


class LLMPlanner:
    """Wrapper binding plan_llm to a schema, client and templates."""

    def __init__(
        self,
        client: LLMClient,
        schema: Schema,
        *,
        filter_template: str | None = None,
        refine_template: str | None = None,
        value_cap: int = DEFAULT_VALUE_CAP,
        planner_id: str = "llm",
    ):
        self.client = client
        self.schema = schema
        self.filter_template = filter_template
        self.refine_template = refine_template
        self.value_cap = value_cap
        self.planner_id = planner_id

    def plan(self, query: str, refine: bool = False) -> QueryPlan:
        return plan_llm(
            self.client,
            self.schema,
            query,
            refine,
            filter_template=self.filter_template,
            refine_template=self.refine_template,
            value_cap=self.value_cap,
            planner_id=self.planner_id,
        )


class ScriptedLLMClient:
    """Replays canned responses for tests and reproducible offline runs.

    The fixture is a JSONL file (or an in-memory list) of
    {"prompt_substring": ..., "response": ...} entries. A call returns the
    first unconsumed entry whose substring occurs in the prompt; once all
    matching entries are consumed, the last one is replayed again, so a
    single entry serves any number of identical calls while sequences of
    entries model degrading or multi-turn behavior.
    """

    def __init__(self, entries: list[dict[str, str]]):
        self.entries = [
            {"prompt_substring": e["prompt_substring"], "response": e["response"]}
            for e in entries
        ]
        self._used = [False] * len(self.entries)
        self.calls: list[str] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedLLMClient":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    entries.append(json.loads(line))
        return cls(entries)

    def complete(self, prompt: str, temperature: float, top_p: float) -> str:
        self.calls.append(prompt)
        fallback = None
        for i, entry in enumerate(self.entries):
            if entry["prompt_substring"] in prompt:
                if not self._used[i]:
                    self._used[i] = True
                    return entry["response"]
                fallback = entry["response"]
        if fallback is not None:
            return fallback
        raise LLMError("no scripted response matches the prompt")


class HTTPLLMClient:
    """Chat-completions client over JSON/HTTP with capped-backoff retries."""

    def __init__(
        self,
        base_url: str,
        model: str,
        credential_env: str = "HYST_API_KEY",
        timeout: float = 60.0,
        session=None,
        max_attempts: int = 3,
        backoff: float = 0.5,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.credential_env = credential_env
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff = backoff
        if session is None:
            import requests

            session = requests.Session()
        self._session = session

    def complete(self, prompt: str, temperature: float, top_p: float) -> str:
        import os

        credential = os.environ.get(self.credential_env)
        if not credential:
            raise LLMError(f"credential environment variable {self.credential_env} is not set")
        url = f"{self.base_url}/chat/completions"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "top_p": top_p,
        }
        headers = {"Authorization": f"Bearer {credential}", "Content-Type": "application/json"}
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                resp = self._session.post(url, json=payload, headers=headers, timeout=self.timeout)
            except Exception as exc:
                last_error = exc
            else:
                if resp.status_code in (401, 403):
                    raise LLMError(f"authentication failed ({resp.status_code})")
                if resp.status_code == 200:
                    body = resp.json()
                    return body["choices"][0]["message"]["content"]
                last_error = LLMError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            if attempt + 1 < self.max_attempts:
                time.sleep(min(self.backoff * (2**attempt), 8.0))
        raise LLMError(f"completion failed after {self.max_attempts} attempts: {last_error}")
