"""LLM-judged evaluation of correction systems.

Each predicted edit is shown to a judge model together with the source, the
gold correction and the system output, and receives one verdict:

* CorrectEdit: fixes a real error,
* WrongEdit: fixes nothing,
* ReasonableEdit: absent from the gold annotation but harmless and meaning-preserving.

Corpus scores::

    P = sum(CE) / (sum(CE) + sum(WE))
    R = sum(CE) / sum(N_golden)
    F = F_beta(P, R)

Reasonable edits appear in neither ratio. ``N_golden`` is the size of the
gold edit set of the reference that shares the most exact edits with the
prediction (lowest index on ties).
"""

from __future__ import annotations

import enum
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from gecforge.align import CHAR, EditSet, Granularity, apply_edits, detokenize, tokenize
from gecforge.corpus import CorrectionSample, Prediction, atomic_write_text
from gecforge.errors import (
    ConfigError,
    CoverageError,
    GecForgeError,
    JudgmentFailed,
    StructuredOutputError,
)
from gecforge.exam import ExplanationRecord, repair_request
from gecforge.llm.client import LlmClient, LlmRequest
from gecforge.llm.structured import parse_structured
from gecforge.llm.templates import TemplateStore, default_store
from gecforge.metrics import ScoreReport, compute_f_beta, index_predictions, predicted_edits, safe_ratio

log = logging.getLogger(__name__)


class EditVerdict(str, enum.Enum):
    CorrectEdit = "CorrectEdit"
    WrongEdit = "WrongEdit"
    ReasonableEdit = "ReasonableEdit"


@dataclass(frozen=True)
class EditJudgment:
    sample_id: str
    edit_index: int
    verdict: EditVerdict
    rationale: str = ""

    def to_json(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "edit_index": self.edit_index,
            "verdict": self.verdict.value,
            "rationale": self.rationale,
        }


@dataclass(frozen=True)
class SentenceCounts:
    n_ce: int = 0
    n_we: int = 0
    n_re: int = 0
    n_golden: int = 0

    def __post_init__(self):
        if min(self.n_ce, self.n_we, self.n_re, self.n_golden) < 0:
            raise ValueError(f"negative count in {self}")

    def __add__(self, other: "SentenceCounts") -> "SentenceCounts":
        return SentenceCounts(
            self.n_ce + other.n_ce,
            self.n_we + other.n_we,
            self.n_re + other.n_re,
            self.n_golden + other.n_golden,
        )


# -- reference selection & prompt pieces --------------------------------------


def select_reference(predicted: EditSet, golds: Sequence[EditSet]) -> int:
    """Index of the gold set with the largest exact overlap; -1 when there are none."""
    if not golds:
        return -1
    keys = {e.key for e in predicted}
    overlaps = [len(keys & {e.key for e in g}) for g in golds]
    return overlaps.index(max(overlaps))


def describe_edits(source_tokens: Sequence[str], edits: EditSet) -> str:
    """One numbered line per edit, e.g. ``1: replace "的" at [19, 20) with "呢"``."""
    glue = "" if edits.granularity.kind == "char" else " "
    lines = []
    for i, e in enumerate(edits):
        old = glue.join(source_tokens[e.start:e.end])
        new = glue.join(e.replacement)
        if e.kind == "Insert":
            lines.append(f'{i}: insert "{new}" at {e.start}')
        elif e.kind == "Delete":
            lines.append(f'{i}: delete "{old}" at [{e.start}, {e.end})')
        else:
            lines.append(f'{i}: replace "{old}" at [{e.start}, {e.end}) with "{new}"')
    return "\n".join(lines)


def explanation_block(record: ExplanationRecord | None) -> str:
    if record is None:
        return ""
    lines = ["", "[Explanation of the errors in the original sentence]"]
    lines.append("Error types: " + "; ".join(record.error_types))
    lines.append("Reference correction: " + record.reference)
    for rank, text in sorted(record.explanations):
        lines.append(f"{rank}. {text}")
    return "\n".join(lines) + "\n"


@dataclass
class SeeConfig:
    client: LlmClient
    judge_model: str = "gpt-4-turbo"
    evaluated_model: str | None = None
    allow_same_model: bool = False
    granularity: Granularity = CHAR
    use_explanations: bool = False
    explanations: Mapping[str, ExplanationRecord] = field(default_factory=dict)
    workers: int = 1
    beta: float = 0.5
    temperature: float = 0.0
    max_tokens: int = 2048
    store: TemplateStore | None = None

    def __post_init__(self):
        if (
            self.evaluated_model
            and self.evaluated_model == self.judge_model
            and not self.allow_same_model
        ):
            raise ConfigError(
                f"judge model {self.judge_model!r} is also the evaluated system; "
                "pick another judge or set allow_same_model"
            )
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def templates(self) -> TemplateStore:
        return self.store or default_store()

    def fingerprint(self) -> dict:
        return {
            "judge_model": self.judge_model,
            "granularity": str(self.granularity),
            "use_explanations": self.use_explanations,
            "beta": self.beta,
            "template_sha256": self.templates.fingerprint("evaluate"),
        }


def judge_request(
    sample: CorrectionSample,
    predicted: EditSet,
    gold_reference: str,
    explanation: ExplanationRecord | None,
    config: SeeConfig,
) -> LlmRequest:
    store = config.templates
    src_tokens = tokenize(sample.source, predicted.granularity)
    hypothesis = detokenize(apply_edits(src_tokens, predicted), predicted.granularity)
    slots = {
        "source": sample.source,
        "golden": gold_reference or "(no gold correction: the sentence is annotated as correct)",
        "predicted": hypothesis,
        "edits": describe_edits(src_tokens, predicted),
        "explanation": explanation_block(explanation),
    }
    return LlmRequest(
        model=config.judge_model,
        system_prompt=store.system("evaluate"),
        user_prompt=store.render("evaluate", slots),
        demonstrations=store.demonstrations("evaluate"),
        temperature=config.temperature,
        max_tokens=config.max_tokens,
    )


def judge_edits(
    sample: CorrectionSample,
    predicted: EditSet,
    gold_reference: str,
    explanation: ExplanationRecord | None,
    config: SeeConfig,
) -> list[EditJudgment]:
    """Verdicts for every predicted edit of one sentence, in edit order."""
    if not predicted.edits:
        return []
    request = judge_request(sample, predicted, gold_reference, explanation, config)
    raws = []
    response = config.client.complete(request)
    raws.append(response.text)
    try:
        items = parse_structured(response, "judgment-v1", n_edits=len(predicted))
    except StructuredOutputError as exc:
        fix = repair_request(request, response.text, str(exc), config.templates)
        response = config.client.complete(fix)
        raws.append(response.text)
        try:
            items = parse_structured(response, "judgment-v1", n_edits=len(predicted))
        except StructuredOutputError as exc2:
            raise JudgmentFailed(sample.id, raws, str(exc2)) from None
    return [
        EditJudgment(sample.id, it["edit_index"], EditVerdict(it["verdict"]), it["rationale"])
        for it in items
    ]


def tally(
    judgments: Sequence[EditJudgment],
    predicted: EditSet,
    sample: CorrectionSample,
) -> SentenceCounts:
    indices = sorted(j.edit_index for j in judgments)
    if indices != list(range(len(predicted))):
        raise CoverageError(
            f"sample {sample.id!r}: judgments cover edits {indices}, expected 0..{len(predicted) - 1}"
        )
    golds = sample.gold_edit_sets(predicted.granularity)
    ref = select_reference(predicted, golds)
    n_golden = len(golds[ref]) if ref >= 0 else 0
    by_verdict = {v: 0 for v in EditVerdict}
    for j in judgments:
        by_verdict[EditVerdict(j.verdict)] += 1
    return SentenceCounts(
        by_verdict[EditVerdict.CorrectEdit],
        by_verdict[EditVerdict.WrongEdit],
        by_verdict[EditVerdict.ReasonableEdit],
        n_golden,
    )


def score_see(counts: Sequence[SentenceCounts], beta: float = 0.5, ids: Sequence[str] | None = None) -> ScoreReport:
    total = SentenceCounts()
    for c in counts:
        total = total + c
    p = safe_ratio(total.n_ce, total.n_ce + total.n_we)
    r = safe_ratio(total.n_ce, total.n_golden)
    per_sentence = [
        ({"id": i} if ids is not None else {}) | asdict(c)
        for i, c in zip(ids if ids is not None else [None] * len(counts), counts)
    ]
    return ScoreReport(p, r, compute_f_beta(p, r, beta), beta, total, per_sentence)


@dataclass
class SeeResult:
    judgments: list[EditJudgment]
    report: ScoreReport
    exclusions: list[dict]


def run_see(
    corpus: Sequence[CorrectionSample],
    predictions: Sequence[Prediction],
    config: SeeConfig,
    out_dir=None,
) -> SeeResult:
    """Judge every prediction, write ``judgments.jsonl`` and ``see_report.json``.

    Sentences whose judging fails are left out of the aggregates and listed
    under ``exclusions``. Samples without a prediction count as unchanged.
    """
    by_id = index_predictions(predictions, corpus)
    if config.use_explanations:
        missing = [s.id for s in corpus if s.id not in config.explanations]
        if missing:
            log.warning("%d samples have no explanation record; judging them without one", len(missing))

    def work(sample: CorrectionSample):
        pred = by_id.get(sample.id)
        hyp = pred.hypothesis if pred is not None else sample.source
        edits = predicted_edits(sample, hyp, config.granularity)
        golds = sample.gold_edit_sets(config.granularity)
        ref = select_reference(edits, golds)
        gold_text = sample.references[ref] if ref >= 0 else ""
        expl = config.explanations.get(sample.id) if config.use_explanations else None
        try:
            judgments = judge_edits(sample, edits, gold_text, expl, config)
            return judgments, tally(judgments, edits, sample)
        except JudgmentFailed as exc:
            return {"sample_id": sample.id, "kind": "schema", "reason": exc.reason, "raw_responses": exc.raw_responses}
        except GecForgeError as exc:
            log.warning("sample %s: %s", sample.id, exc)
            return {"sample_id": sample.id, "kind": "backend", "reason": f"{type(exc).__name__}: {exc}", "raw_responses": []}

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        outcomes = list(pool.map(work, corpus))

    judgments: list[EditJudgment] = []
    counts, ids, exclusions = [], [], []
    for sample, outcome in zip(corpus, outcomes):
        if isinstance(outcome, dict):
            exclusions.append(outcome)
            continue
        judgments.extend(outcome[0])
        counts.append(outcome[1])
        ids.append(sample.id)
    report = score_see(counts, config.beta, ids)
    report.extra = {
        "excluded": len(exclusions),
        "exclusions": exclusions,
        "config": config.fingerprint(),
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        atomic_write_text(
            out / "judgments.jsonl",
            "".join(json.dumps(j.to_json(), ensure_ascii=False) + "\n" for j in judgments),
        )
        atomic_write_text(out / "see_report.json", report.to_json())
    return SeeResult(judgments, report, exclusions)


def load_judgments(path) -> list[EditJudgment]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            obj = json.loads(line)
            out.append(
                EditJudgment(obj["sample_id"], obj["edit_index"], EditVerdict(obj["verdict"]), obj.get("rationale", ""))
            )
    return out

