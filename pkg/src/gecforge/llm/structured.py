"""Pull JSON out of free-form completions and validate it.

Two schemas are understood:

``explanation-v1``
    ``{"error_types": [...], "reference": str, "explanations": [{"rank": int, "text": str}]}``
``judgment-v1``
    ``[{"edit_index": int, "verdict": str, "rationale": str}, ...]`` (a
    ``{"judgments": [...]}`` wrapper is also accepted)

Unknown fields are ignored. Every failure keeps the raw completion.
"""

from __future__ import annotations

import json
from typing import Iterable

from gecforge.errors import ConfigError, OutputParseError, SchemaError
from gecforge.llm.client import LlmResponse

SCHEMAS = ("explanation-v1", "judgment-v1")

VERDICTS = ("CorrectEdit", "WrongEdit", "ReasonableEdit")
_VERDICT_ALIASES = {"CE": "CorrectEdit", "WE": "WrongEdit", "RE": "ReasonableEdit"}

_decoder = json.JSONDecoder()


def extract_json(text: str, want: tuple[type, ...] = (dict,)):
    """First JSON value of a type in ``want`` that decodes cleanly from ``text``."""
    for i, ch in enumerate(text):
        if ch not in "{[":
            continue
        try:
            value, _ = _decoder.raw_decode(text, i)
        except json.JSONDecodeError:
            continue
        if isinstance(value, want):
            return value
    raise OutputParseError("no JSON value found in completion", text)


def _validate_explanation(obj: dict, raw: str, allowed_types: Iterable[str] | None) -> dict:
    types = obj.get("error_types")
    if not isinstance(types, list) or not all(isinstance(t, str) and t.strip() for t in types):
        raise SchemaError("error_types", types, raw, "expected a list of names")
    types = [t.strip() for t in types]
    if allowed_types is not None:
        allowed = set(allowed_types)
        bad = [t for t in types if t not in allowed]
        if bad:
            raise SchemaError("error_types", bad[0], raw, "not in the error-type schema")
    if len(set(types)) != len(types):
        raise SchemaError("error_types", types, raw, "duplicate type")

    ref = obj.get("reference")
    if not isinstance(ref, str) or not ref.strip():
        raise SchemaError("reference", ref, raw, "expected a nonempty string")

    expl = obj.get("explanations")
    if not isinstance(expl, list):
        raise SchemaError("explanations", expl, raw, "expected a list")
    items = []
    for item in expl:
        if not isinstance(item, dict):
            raise SchemaError("explanations", item, raw, "expected {rank, text} objects")
        rank, text = item.get("rank"), item.get("text")
        if isinstance(rank, bool) or not isinstance(rank, int) or rank < 1:
            raise SchemaError("explanations.rank", rank, raw, "expected a positive integer")
        if not isinstance(text, str) or not text.strip():
            raise SchemaError("explanations.text", text, raw, "expected nonempty text")
        items.append({"rank": rank, "text": text.strip()})
    ranks = sorted(i["rank"] for i in items)
    if ranks != list(range(1, len(items) + 1)):
        raise SchemaError("explanations.rank", ranks, raw, "ranks must be 1..n without gaps or duplicates")
    items.sort(key=lambda i: i["rank"])
    return {"error_types": types, "reference": ref.strip(), "explanations": items}


def _validate_judgments(items: list, raw: str, n_edits: int | None) -> list[dict]:
    out = []
    for item in items:
        if not isinstance(item, dict):
            raise SchemaError("judgments", item, raw, "expected objects")
        idx = item.get("edit_index")
        if isinstance(idx, bool) or not isinstance(idx, int) or idx < 0:
            raise SchemaError("edit_index", idx, raw, "expected a non-negative integer")
        if n_edits is not None and idx >= n_edits:
            raise SchemaError("edit_index", idx, raw, f"only {n_edits} edits were shown")
        verdict = item.get("verdict")
        verdict = _VERDICT_ALIASES.get(verdict, verdict)
        if verdict not in VERDICTS:
            raise SchemaError("verdict", item.get("verdict"), raw, f"expected one of {VERDICTS}")
        rationale = item.get("rationale", "")
        if not isinstance(rationale, str):
            raise SchemaError("rationale", rationale, raw, "expected a string")
        out.append({"edit_index": idx, "verdict": verdict, "rationale": rationale})
    seen = [j["edit_index"] for j in out]
    if len(set(seen)) != len(seen):
        raise SchemaError("edit_index", seen, raw, "an edit was judged twice")
    if n_edits is not None and sorted(seen) != list(range(n_edits)):
        missing = sorted(set(range(n_edits)) - set(seen))
        raise SchemaError("edit_index", missing, raw, "edits left unjudged")
    out.sort(key=lambda j: j["edit_index"])
    return out


def parse_structured(
    response: LlmResponse | str,
    schema: str,
    *,
    allowed_types: Iterable[str] | None = None,
    n_edits: int | None = None,
):
    raw = response.text if isinstance(response, LlmResponse) else response
    if schema == "explanation-v1":
        return _validate_explanation(extract_json(raw, (dict,)), raw, allowed_types)
    if schema == "judgment-v1":
        value = extract_json(raw, (list, dict))
        if isinstance(value, dict):
            value = value.get("judgments")
            if not isinstance(value, list):
                raise SchemaError("judgments", value, raw, "expected a list of judgments")
        return _validate_judgments(value, raw, n_edits)
    raise ConfigError(f"unknown schema {schema!r}; known: {', '.join(SCHEMAS)}")
