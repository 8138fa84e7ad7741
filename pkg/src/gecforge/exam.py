"""Explanation-augmented training data.

For every ungrammatical sentence an LLM is asked for the error types
present (chosen from a fixed schema), its own corrected reference, and
explanations ranked by severity. The answers are prepended to the source so
a small seq2seq or seq2edit corrector can train or infer on::

    [TYPES] t1;t2 [REF] reference [EXPL] expl1 | expl2 [SRC] source

Inside the explanation block ``\\``, ``[``, ``;``, ``|``, tab and newline are
backslash-escaped, so `` [`` never occurs there and the first `` [SRC] ``
marks the start of the untouched source.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from gecforge.corpus import CorrectionSample, atomic_write_text, normalize_text
from gecforge.errors import (
    AnnotationFailed,
    ConfigError,
    EncodingError,
    GecForgeError,
    ParseError,
    StructuredOutputError,
)
from gecforge.llm.client import LlmClient, LlmRequest
from gecforge.llm.structured import parse_structured
from gecforge.llm.templates import TemplateStore, default_store

log = logging.getLogger(__name__)

DEFAULT_ERROR_TYPES = (
    "punctuation errors",
    "spelling errors",
    "word errors",
    "syntax errors",
)

GOLD_MODES = ("none", "train", "test", "both")
SPLITS = ("train", "test")


@dataclass(frozen=True)
class ErrorTypeSchema:
    types: tuple[str, ...] = DEFAULT_ERROR_TYPES

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        if not self.types:
            raise ConfigError("error-type schema is empty")
        if any(not isinstance(t, str) or not t.strip() for t in self.types):
            raise ConfigError("error-type names must be nonempty strings")
        if len(set(self.types)) != len(self.types):
            raise ConfigError("error-type names must be unique")

    def prompt_text(self) -> str:
        return "\n".join(f"- {t}" for t in self.types)

    @classmethod
    def load(cls, path) -> "ErrorTypeSchema":
        """Read ``schema.json``.

        Either a list of names, or ``{"types": [...], "include_defaults": bool}``
        where the defaults are prepended when requested.
        """
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read schema {path}: {exc}") from None
        if isinstance(data, dict):
            types = data.get("types")
            if not isinstance(types, list):
                raise ConfigError(f"schema {path}: 'types' must be a list")
            if data.get("include_defaults"):
                types = list(DEFAULT_ERROR_TYPES) + [t for t in types if t not in DEFAULT_ERROR_TYPES]
        elif isinstance(data, list):
            types = data
        else:
            raise ConfigError(f"schema {path}: expected a list or an object")
        return cls(tuple(types))


@dataclass(frozen=True)
class ExplanationRecord:
    sample_id: str
    error_types: tuple[str, ...]
    reference: str
    explanations: tuple[tuple[int, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "error_types", tuple(self.error_types))
        object.__setattr__(
            self, "explanations", tuple((int(r), str(t)) for r, t in self.explanations)
        )
        if not self.reference:
            raise ValueError("reference must be nonempty")
        if sorted(r for r, _ in self.explanations) != list(range(1, len(self.explanations) + 1)):
            raise ValueError("explanation ranks must be 1..n")
        if any(not t for _, t in self.explanations):
            raise ValueError("explanations must be nonempty")

    def ranked_texts(self) -> list[str]:
        return [t for _, t in sorted(self.explanations)]

    def to_json(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "error_types": list(self.error_types),
            "reference": self.reference,
            "explanations": [{"rank": r, "text": t} for r, t in sorted(self.explanations)],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExplanationRecord":
        return cls(
            obj["sample_id"],
            tuple(obj["error_types"]),
            obj["reference"],
            tuple((e["rank"], e["text"]) for e in obj["explanations"]),
        )


def load_records(path) -> dict[str, ExplanationRecord]:
    records = {}
    for no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = ExplanationRecord.from_json(json.loads(line))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad explanation record ({exc})", no, line) from None
        records[rec.sample_id] = rec
    return records


# -- augmented input layout ---------------------------------------------------

_ESC = {"\\": "\\\\", "[": "\\[", ";": "\\;", "|": "\\|", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESC = {"\\": "\\", "[": "[", ";": ";", "|": "|", "t": "\t", "n": "\n", "r": "\r"}


def _escape(text: str) -> str:
    return "".join(_ESC.get(ch, ch) for ch in text)


def _split_unescape(text: str, sep: str | None) -> list[str]:
    """Split escaped ``text`` on unescaped ``sep`` (if any) and unescape the parts."""
    parts, cur, i = [], [], 0
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            if i + 1 >= len(text) or text[i + 1] not in _UNESC:
                raise ParseError("bad escape in augmented input", None, text)
            cur.append(_UNESC[text[i + 1]])
            i += 2
        elif sep and text.startswith(sep, i):
            parts.append("".join(cur))
            cur = []
            i += len(sep)
        else:
            cur.append(ch)
            i += 1
    parts.append("".join(cur))
    return parts


@dataclass(frozen=True)
class AugmentedFields:
    source: str
    error_types: tuple[str, ...] | None = None
    reference: str | None = None
    explanations: tuple[str, ...] | None = None

    @property
    def augmented(self) -> bool:
        return self.reference is not None


def format_augmented(record: ExplanationRecord | None, source: str) -> str:
    if "\t" in source or "\n" in source or "\r" in source:
        raise EncodingError("source contains a tab or line break")
    if record is None:
        line = f"[SRC] {source}"
    else:
        types = ";".join(_escape(t) for t in record.error_types)
        expl = " | ".join(_escape(t) for t in record.ranked_texts())
        line = f"[TYPES] {types} [REF] {_escape(record.reference)} [EXPL] {expl} [SRC] {source}"
    parsed = parse_augmented(line)
    if parsed.source != source or (
        record is not None
        and (
            parsed.error_types != record.error_types
            or parsed.reference != record.reference
            or list(parsed.explanations) != record.ranked_texts()
        )
    ):
        raise EncodingError(f"augmented input does not round-trip: {line!r}")
    return line


def parse_augmented(line: str) -> AugmentedFields:
    if line.startswith("[SRC] "):
        return AugmentedFields(line[len("[SRC] "):])
    if not line.startswith("[TYPES] "):
        raise ParseError("augmented input must start with [TYPES] or [SRC]", None, line)
    rest = line[len("[TYPES]"):]
    fields = []
    for marker in (" [REF] ", " [EXPL] ", " [SRC] "):
        cut = rest.find(marker)
        if cut < 0:
            raise ParseError(f"missing {marker.strip()} marker", None, line)
        fields.append(rest[:cut])
        rest = rest[cut + len(marker):]
    types_raw, ref_raw, expl_raw = fields
    types_raw = types_raw[1:] if types_raw.startswith(" ") else types_raw
    types = tuple(_split_unescape(types_raw, ";")) if types_raw else ()
    (reference,) = _split_unescape(ref_raw, None)
    expl = tuple(_split_unescape(expl_raw, " | ")) if expl_raw else ()
    return AugmentedFields(rest, types, reference, expl)


def emit_augmented(
    samples: Sequence[CorrectionSample],
    records: Mapping[str, ExplanationRecord | None],
    path,
    split: str,
) -> list[str]:
    """Write ``augmented.tsv`` and return its lines.

    Columns: id, augmented input, target (train split only), augmented flag.
    Samples with no record are written with just the ``[SRC]`` field and
    flag ``false``. The training target is the first gold reference, or the
    source itself for a sample annotated as already correct.
    """
    if split not in SPLITS:
        raise ConfigError(f"split must be one of {SPLITS}")
    lines = []
    for s in samples:
        rec = records.get(s.id)
        cols = [s.id, format_augmented(rec, s.source)]
        if split == "train":
            target = s.references[0] if s.references else s.source
            if "\t" in target or "\n" in target:
                raise EncodingError(f"sample {s.id!r}: target contains a tab or line break")
            cols.append(target)
        cols.append("true" if rec is not None else "false")
        lines.append("\t".join(cols))
    if path is not None:
        atomic_write_text(path, "".join(line + "\n" for line in lines))
    return lines


# -- annotation ---------------------------------------------------------------


@dataclass
class ExamConfig:
    client: LlmClient
    model: str = "gpt-3.5-turbo"
    schema: ErrorTypeSchema = field(default_factory=ErrorTypeSchema)
    split: str = "train"
    gold_mode: str = "none"
    workers: int = 1
    temperature: float = 0.0
    max_tokens: int = 1024
    n_candidates: int = 1
    store: TemplateStore | None = None

    def __post_init__(self):
        if self.gold_mode not in GOLD_MODES:
            raise ConfigError(f"gold_mode must be one of {GOLD_MODES}")
        if self.split not in SPLITS:
            raise ConfigError(f"split must be one of {SPLITS}")
        if self.gold_mode in SPLITS and self.gold_mode != self.split:
            raise ConfigError(
                f"gold_mode={self.gold_mode} cannot be used on a {self.split}-split corpus"
            )
        if self.workers < 1 or self.n_candidates < 1:
            raise ConfigError("workers and n_candidates must be >= 1")

    @property
    def include_gold(self) -> bool:
        return self.gold_mode in (self.split, "both")

    @property
    def templates(self) -> TemplateStore:
        return self.store or default_store()


def explain_request(sample: CorrectionSample, config: ExamConfig, seed: int | None = None) -> LlmRequest:
    store = config.templates
    slots = {"sentence": sample.source, "error_types": config.schema.prompt_text()}
    if config.include_gold and sample.references:
        refs = "\n".join(f"- {r}" for r in sample.references)
        slots["gold_block"] = f"Gold correction(s) from the dataset annotation:\n{refs}\n"
    return LlmRequest(
        model=config.model,
        system_prompt=store.system("explain"),
        user_prompt=store.render("explain", slots),
        demonstrations=store.demonstrations("explain"),
        temperature=config.temperature,
        max_tokens=config.max_tokens,
        seed=seed,
    )


def repair_request(original: LlmRequest, previous: str, problem: str, store: TemplateStore) -> LlmRequest:
    return LlmRequest(
        model=original.model,
        system_prompt=store.system("repair"),
        user_prompt=store.render(
            "repair", {"task": original.user_prompt, "previous": previous, "problem": problem}
        ),
        temperature=original.temperature,
        max_tokens=original.max_tokens,
        seed=original.seed,
    )


def _record(sample_id: str, payload: dict) -> ExplanationRecord:
    return ExplanationRecord(
        sample_id,
        tuple(payload["error_types"]),
        normalize_text(payload["reference"]),
        tuple((e["rank"], e["text"]) for e in payload["explanations"]),
    )


def annotate_sample(sample: CorrectionSample, config: ExamConfig) -> ExplanationRecord:
    """One explanation record, with a single repair re-prompt on malformed output.

    Transport, replay and refusal errors propagate unchanged.
    """
    raws: list[str] = []
    reason = ""
    for candidate in range(config.n_candidates):
        request = explain_request(sample, config, seed=candidate if config.n_candidates > 1 else None)
        response = config.client.complete(request)
        raws.append(response.text)
        try:
            payload = parse_structured(response, "explanation-v1", allowed_types=config.schema.types)
            return _record(sample.id, payload)
        except (StructuredOutputError, ValueError) as exc:
            problem = str(exc)
        fix = repair_request(request, response.text, problem, config.templates)
        response = config.client.complete(fix)
        raws.append(response.text)
        try:
            payload = parse_structured(response, "explanation-v1", allowed_types=config.schema.types)
            return _record(sample.id, payload)
        except (StructuredOutputError, ValueError) as exc:
            reason = str(exc)
    raise AnnotationFailed(sample.id, raws, reason)


@dataclass
class ExamResult:
    records: list[ExplanationRecord]
    failures: list[dict]
    augmented: list[str]


def run_exam(corpus: Sequence[CorrectionSample], config: ExamConfig, out_dir=None) -> ExamResult:
    """Annotate ``corpus`` and emit ``records.jsonl``, ``augmented.tsv`` and ``failures.json``.

    Outputs follow corpus order whatever the completion order. Re-running
    against the same cache re-requests nothing already answered.
    """

    def work(sample: CorrectionSample):
        try:
            return annotate_sample(sample, config)
        except AnnotationFailed as exc:
            return {"sample_id": sample.id, "kind": "schema", "reason": exc.reason, "raw_responses": exc.raw_responses}
        except GecForgeError as exc:
            log.warning("sample %s: %s", sample.id, exc)
            return {"sample_id": sample.id, "kind": "backend", "reason": f"{type(exc).__name__}: {exc}", "raw_responses": []}

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        outcomes = list(pool.map(work, corpus))

    records = [o for o in outcomes if isinstance(o, ExplanationRecord)]
    failures = [o for o in outcomes if isinstance(o, dict)]
    by_id = {r.sample_id: r for r in records}
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        atomic_write_text(
            out / "records.jsonl",
            "".join(json.dumps(r.to_json(), ensure_ascii=False) + "\n" for r in records),
        )
        atomic_write_text(
            out / "failures.json",
            json.dumps({"failed": len(failures), "failures": failures}, ensure_ascii=False, indent=2) + "\n",
        )
    augmented = emit_augmented(corpus, by_id, out / "augmented.tsv" if out else None, config.split)
    return ExamResult(records, failures, augmented)
