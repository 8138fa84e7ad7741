"""Exact-match P/R/F-beta scoring against multi-reference gold edits.

An edit counts as a true positive only when its span and replacement equal a
gold edit. For each sentence the reference giving the best sentence-level
F-beta is kept (lowest index on ties) and its counts are summed over the
corpus before computing precision and recall.

Zero-denominator conventions: P = 1 when nothing was predicted, R = 1 when
there is nothing to find, and F(0, 0) = 0.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Any, Sequence

from gecforge.align import CHAR, EditSet, Granularity, extract_edits, tokenize
from gecforge.corpus import CorrectionSample, Prediction, normalize_text
from gecforge.errors import DomainError, DuplicateIdError, GranularityError, MissingSampleError


@dataclass(frozen=True)
class MatchCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    n_gold: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.n_gold) < 0 or self.tp + self.fn != self.n_gold:
            raise ValueError(f"inconsistent counts {self}")

    def __add__(self, other: "MatchCounts") -> "MatchCounts":
        return MatchCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.n_gold + other.n_gold
        )

    def precision(self) -> float:
        return safe_ratio(self.tp, self.tp + self.fp)

    def recall(self) -> float:
        return safe_ratio(self.tp, self.n_gold)


def safe_ratio(num: int, den: int) -> float:
    """``num / den`` with the empty-denominator convention (1.0)."""
    return 1.0 if den == 0 else num / den


def compute_f_beta(p: float, r: float, beta: float = 0.5) -> float:
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    if not (0.0 <= p <= 1.0 and 0.0 <= r <= 1.0):
        raise DomainError(f"precision/recall outside [0, 1]: p={p}, r={r}")
    b2 = beta * beta
    den = b2 * p + r
    if den == 0:
        return 0.0
    return (1 + b2) * p * r / den


def match_edits(predicted: EditSet, gold: EditSet) -> MatchCounts:
    if predicted.granularity != gold.granularity:
        raise GranularityError(
            f"predicted edits are {predicted.granularity}, gold edits are {gold.granularity}"
        )
    if predicted.source_len != gold.source_len:
        raise GranularityError(
            f"edit sets cover {predicted.source_len} vs {gold.source_len} source tokens"
        )
    # edits in a valid EditSet never share a key, so set intersection is a 1:1 matching
    tp = len({e.key for e in predicted} & {e.key for e in gold})
    return MatchCounts(tp, len(predicted) - tp, len(gold) - tp, len(gold))


def best_reference(
    predicted: EditSet, golds: Sequence[EditSet], beta: float = 0.5
) -> tuple[int, MatchCounts]:
    """Index and counts of the reference maximizing sentence F-beta.

    A sentence with no references is scored against an empty gold set
    (index -1), i.e. the source is taken to be correct as written.
    """
    if not golds:
        return -1, match_edits(predicted, EditSet((), predicted.source_len, predicted.granularity))
    best_i, best_counts, best_f = 0, None, -1.0
    for i, gold in enumerate(golds):
        counts = match_edits(predicted, gold)
        f = compute_f_beta(counts.precision(), counts.recall(), beta)
        if f > best_f:
            best_i, best_counts, best_f = i, counts, f
    return best_i, best_counts


@dataclass
class ScoreReport:
    precision: float
    recall: float
    f_beta: float
    beta: float = 0.5
    counts: Any = None
    per_sentence: list[dict] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        counts = self.counts
        if hasattr(counts, "__dataclass_fields__"):
            counts = asdict(counts)
        out = {
            "precision": self.precision,
            "recall": self.recall,
            "f_beta": self.f_beta,
            "beta": self.beta,
            "counts": counts,
            "per_sentence": self.per_sentence,
        }
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n"

    def table(self, label: str = "") -> str:
        return format_table([(label, self)])


def percent(x: float) -> str:
    """Two-decimal percentage, rounded half up."""
    return str((Decimal(repr(x)) * 100).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def format_table(rows: Sequence[tuple[str, ScoreReport]]) -> str:
    """Fixed-width P / R / F table, one row per ``(label, report)``."""
    width = max([len("System")] + [len(label) for label, _ in rows])
    beta = rows[0][1].beta if rows else 0.5
    f_head = f"F{beta:g}"
    lines = [f"{'System':<{width}}  {'P':>7}  {'R':>7}  {f_head:>7}"]
    lines.append("-" * len(lines[0]))
    for label, rep in rows:
        lines.append(
            f"{label:<{width}}  {percent(rep.precision):>7}  {percent(rep.recall):>7}  {percent(rep.f_beta):>7}"
        )
    return "\n".join(lines) + "\n"


def index_predictions(
    predictions: Sequence[Prediction], corpus: Sequence[CorrectionSample]
) -> dict[str, Prediction]:
    ids = {s.id for s in corpus}
    by_id: dict[str, Prediction] = {}
    for p in predictions:
        if p.sample_id in by_id:
            raise DuplicateIdError(p.sample_id)
        by_id[p.sample_id] = p
    missing = [p.sample_id for p in predictions if p.sample_id not in ids]
    if missing:
        raise MissingSampleError(missing)
    return by_id


def predicted_edits(sample: CorrectionSample, hypothesis: str, granularity: Granularity) -> EditSet:
    return extract_edits(
        tokenize(sample.source, granularity),
        tokenize(normalize_text(hypothesis), granularity),
        granularity,
    )


def score_corpus(
    predictions: Sequence[Prediction],
    corpus: Sequence[CorrectionSample],
    granularity: Granularity = CHAR,
    beta: float = 0.5,
) -> ScoreReport:
    """Corpus-level exact-match scores.

    Samples without a prediction are scored as if the system returned the
    source unchanged.
    """
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    by_id = index_predictions(predictions, corpus)
    total = MatchCounts()
    per_sentence = []
    for sample in corpus:
        pred = by_id.get(sample.id)
        hyp = pred.hypothesis if pred is not None else sample.source
        hyp_edits = predicted_edits(sample, hyp, granularity)
        ref_i, counts = best_reference(hyp_edits, sample.gold_edit_sets(granularity), beta)
        total = total + counts
        per_sentence.append({"id": sample.id, "reference": ref_i, **asdict(counts)})
    p, r = total.precision(), total.recall()
    return ScoreReport(
        p,
        r,
        compute_f_beta(p, r, beta),
        beta,
        total,
        per_sentence,
        {"granularity": str(granularity)},
    )
