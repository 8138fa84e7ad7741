"""gecforge: LLM-assisted explanation augmentation and evaluation for grammatical error correction."""

__version__ = "0.1.0"

from gecforge.align import (
    CHAR,
    Edit,
    EditSet,
    Granularity,
    align_tokens,
    apply_edits,
    detokenize,
    diff_texts,
    extract_edits,
    register_segmenter,
    tokenize,
)
from gecforge.corpus import (
    CorpusFormat,
    CorrectionSample,
    Prediction,
    load_corpus,
    load_predictions,
    normalize_text,
    write_corpus,
)
from gecforge.metrics import MatchCounts, ScoreReport, compute_f_beta, match_edits, score_corpus

__all__ = [
    "CHAR",
    "CorpusFormat",
    "CorrectionSample",
    "Edit",
    "EditSet",
    "Granularity",
    "MatchCounts",
    "Prediction",
    "ScoreReport",
    "align_tokens",
    "apply_edits",
    "compute_f_beta",
    "detokenize",
    "diff_texts",
    "extract_edits",
    "load_corpus",
    "load_predictions",
    "match_edits",
    "normalize_text",
    "register_segmenter",
    "score_corpus",
    "tokenize",
    "write_corpus",
]
