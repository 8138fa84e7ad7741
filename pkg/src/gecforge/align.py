"""Token-level edit extraction between a source sentence and a correction.

Alignment is unit-cost Levenshtein. The traceback walks back from the
bottom-right cell and prefers Match > Substitute > Delete > Insert whenever
several predecessors reach the same cost, so the edit script is unique.
Maximal runs of non-match operations are then merged into single span edits.

The DP and the merging traceback run in a numba kernel over integer token codes;
the Python layer only encodes tokens and wraps results.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numba
import numpy as np

from gecforge.errors import BoundsError, ConfigError, OverlapError

MATCH, SUBSTITUTE, DELETE, INSERT = 0, 1, 2, 3
OP_NAMES = ("M", "S", "D", "I")

# -- granularity & segmenters ------------------------------------------------

DEFAULT_SEGMENTER = "whitespace-fallback"


@dataclass(frozen=True)
class Granularity:
    kind: str = "char"
    segmenter: str | None = None

    def __post_init__(self):
        if self.kind not in ("char", "word"):
            raise ConfigError(f"unknown granularity kind {self.kind!r}")
        if self.kind == "char" and self.segmenter is not None:
            raise ConfigError("character granularity takes no segmenter")
        if self.kind == "word" and not self.segmenter:
            object.__setattr__(self, "segmenter", DEFAULT_SEGMENTER)

    @classmethod
    def char(cls) -> "Granularity":
        return cls("char")

    @classmethod
    def word(cls, segmenter: str = DEFAULT_SEGMENTER) -> "Granularity":
        return cls("word", segmenter)

    @classmethod
    def parse(cls, text: str) -> "Granularity":
        """Parse ``char``, ``word`` or ``word:<segmenter>``."""
        text = text.strip()
        if text == "char":
            return cls.char()
        if text == "word":
            return cls.word()
        if text.startswith("word:") and len(text) > 5:
            return cls.word(text[5:])
        raise ConfigError(f"cannot parse granularity {text!r}")

    def __str__(self) -> str:
        return "char" if self.kind == "char" else f"word:{self.segmenter}"


CHAR = Granularity.char()

_CJK_RANGES = (
    (0x2E80, 0x9FFF),  # radicals, CJK symbols/punct, kana, unified ideographs
    (0xAC00, 0xD7AF),
    (0xF900, 0xFAFF),
    (0xFE30, 0xFE4F),
    (0xFF00, 0xFFEF),  # fullwidth forms
    (0x20000, 0x2FA1F),
)


def is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def _whitespace_segmenter(text: str) -> list[str]:
    return [tok for tok in text.split(" ") if tok]


_CJK_CLASS = "".join(f"\\U{lo:08x}-\\U{hi:08x}" for lo, hi in _CJK_RANGES)
_CJK_OR_RUN = re.compile(f"[{_CJK_CLASS}]|[^\\s{_CJK_CLASS}]+")


def _cjk_char_segmenter(text: str) -> list[str]:
    # every CJK character is a word; non-CJK runs are split on whitespace
    return _CJK_OR_RUN.findall(text)


_SEGMENTERS: dict[str, Callable[[str], list[str]]] = {
    "whitespace-fallback": _whitespace_segmenter,
    "cjk-char": _cjk_char_segmenter,
}


def register_segmenter(name: str, fn: Callable[[str], list[str]]) -> None:
    """Register a word segmenter (e.g. a wrapper around an external CWS tool).

    A segmenter must return whitespace-free tokens such that
    :func:`detokenize` reconstructs the input.
    """
    _SEGMENTERS[name] = fn


def segmenters() -> list[str]:
    return sorted(_SEGMENTERS)


def tokenize(text: str, granularity: Granularity = CHAR) -> list[str]:
    if granularity.kind == "char":
        return list(text)
    try:
        seg = _SEGMENTERS[granularity.segmenter]
    except KeyError:
        raise ConfigError(f"unknown segmenter {granularity.segmenter!r}") from None
    return list(seg(text))


def detokenize(tokens: Sequence[str], granularity: Granularity = CHAR) -> str:
    """Inverse of :func:`tokenize`.

    Word tokens are joined with a single space when both neighbouring
    characters are non-CJK, and concatenated directly otherwise.
    """
    if granularity.kind == "char":
        return "".join(tokens)
    out: list[str] = []
    for tok in tokens:
        if not tok:
            continue
        if out and not is_cjk(out[-1][-1]) and not is_cjk(tok[0]):
            out.append(" ")
        out.append(tok)
    return "".join(out)


# -- edits ---------------------------------------------------------------------


@dataclass(frozen=True)
class Edit:
    """Replace ``source[start:end]`` with ``replacement``."""

    start: int
    end: int
    replacement: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "replacement", tuple(self.replacement))
        if self.start < 0 or self.end < self.start:
            raise BoundsError(f"invalid edit span [{self.start}, {self.end})")
        if self.start == self.end and not self.replacement:
            raise ValueError("null edit: empty span with empty replacement")

    @property
    def kind(self) -> str:
        if self.start == self.end:
            return "Insert"
        if not self.replacement:
            return "Delete"
        return "Substitute"

    @property
    def key(self) -> tuple[int, int, tuple[str, ...]]:
        return (self.start, self.end, self.replacement)

    def to_json(self) -> dict:
        return {
            "start": self.start,
            "end": self.end,
            "replacement": list(self.replacement),
            "kind": self.kind,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Edit":
        edit = cls(int(obj["start"]), int(obj["end"]), tuple(obj["replacement"]))
        if "kind" in obj and obj["kind"] != edit.kind:
            raise ValueError(f"edit kind {obj['kind']!r} disagrees with span/replacement ({edit.kind})")
        return edit


def _check_edits(edits: Sequence[Edit], source_len: int) -> None:
    prev = None
    for e in edits:
        if e.end > source_len:
            raise BoundsError(f"edit [{e.start}, {e.end}) exceeds source length {source_len}")
        if prev is not None:
            if prev.end > e.start or (prev.start == prev.end == e.start == e.end):
                raise OverlapError(f"edits [{prev.start}, {prev.end}) and [{e.start}, {e.end}) overlap")
        prev = e


@dataclass(frozen=True)
class EditSet:
    edits: tuple[Edit, ...] = ()
    source_len: int = 0
    granularity: Granularity = field(default=CHAR)

    def __post_init__(self):
        ordered = tuple(sorted(self.edits, key=lambda e: (e.start, e.end)))
        object.__setattr__(self, "edits", ordered)
        if self.source_len < 0:
            raise BoundsError("negative source length")
        _check_edits(ordered, self.source_len)

    def __len__(self) -> int:
        return len(self.edits)

    def __iter__(self):
        return iter(self.edits)

    def __getitem__(self, i: int) -> Edit:
        return self.edits[i]

    def to_json(self) -> dict:
        return {
            "granularity": str(self.granularity),
            "source_len": self.source_len,
            "edits": [e.to_json() for e in self.edits],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EditSet":
        return cls(
            tuple(Edit.from_json(e) for e in obj["edits"]),
            int(obj["source_len"]),
            Granularity.parse(obj.get("granularity", "char")),
        )


def apply_edits(source: Sequence[str], edits: EditSet | Iterable[Edit]) -> list[str]:
    """Apply ``edits`` to ``source`` right to left and return the new tokens."""
    if isinstance(edits, EditSet):
        if edits.source_len != len(source):
            raise BoundsError(
                f"edit set built for {edits.source_len} tokens, source has {len(source)}"
            )
        ordered = edits.edits
    else:
        ordered = tuple(sorted(edits, key=lambda e: (e.start, e.end)))
        _check_edits(ordered, len(source))
    out = list(source)
    for e in reversed(ordered):
        out[e.start:e.end] = e.replacement
    return out


# -- alignment kernel ----------------------------------------------------------


@numba.njit(cache=True, inline="always")
def _fill(src, tgt, dp):
    n, m = src.shape[0], tgt.shape[0]
    for j in range(m + 1):
        dp[0, j] = j
    for i in range(1, n + 1):
        a = src[i - 1]
        left = i
        dp[i, 0] = left
        for j in range(1, m + 1):
            best = dp[i - 1, j - 1] + (a != tgt[j - 1])
            up = dp[i - 1, j] + 1
            if up < best:
                best = up
            if left + 1 < best:
                best = left + 1
            dp[i, j] = best
            left = best


@numba.njit(cache=True, inline="always")
def _trace(src, tgt, dp, ops, spans):
    """Walk back from (n, m), writing ops in reverse order and merged spans.

    Rows of ``spans`` are (start, end, tgt_start, tgt_end) in source order.
    Returns ``(n_ops, n_spans)``.
    """
    i, j = src.shape[0], tgt.shape[0]
    k = 0
    n_spans = 0
    in_run = False
    run_i = 0
    run_j = 0
    while i > 0 or j > 0:
        cur = dp[i, j]
        if i > 0 and j > 0 and src[i - 1] == tgt[j - 1] and cur == dp[i - 1, j - 1]:
            if in_run:
                spans[n_spans, 0] = i
                spans[n_spans, 1] = run_i
                spans[n_spans, 2] = j
                spans[n_spans, 3] = run_j
                n_spans += 1
                in_run = False
            ops[k] = MATCH
            i -= 1
            j -= 1
        else:
            if not in_run:
                in_run = True
                run_i = i
                run_j = j
            if i > 0 and j > 0 and cur == dp[i - 1, j - 1] + 1:
                ops[k] = SUBSTITUTE
                i -= 1
                j -= 1
            elif i > 0 and cur == dp[i - 1, j] + 1:
                ops[k] = DELETE
                i -= 1
            else:
                ops[k] = INSERT
                j -= 1
        k += 1
    if in_run:
        spans[n_spans, 0] = 0
        spans[n_spans, 1] = run_i
        spans[n_spans, 2] = 0
        spans[n_spans, 3] = run_j
        n_spans += 1
    lo, hi = 0, n_spans - 1
    while lo < hi:
        for c in range(4):
            t = spans[lo, c]
            spans[lo, c] = spans[hi, c]
            spans[hi, c] = t
        lo += 1
        hi -= 1
    return k, n_spans


@numba.njit(cache=True)
def align_codes(src, tgt, dp, ops, spans):
    """Full kernel on integer codes with caller-owned buffers.

    ``dp`` must be at least (len(src)+1, len(tgt)+1); ``ops`` and ``spans``
    need len(src)+len(tgt) rows. ``ops`` receives the pre-merge script in
    reverse order. Returns ``(n_ops, n_edits)``.
    """
    _fill(src, tgt, dp)
    return _trace(src, tgt, dp, ops, spans)


def encode_pair(source: Sequence[str], target: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    codes: dict[str, int] = {}
    src = np.fromiter((codes.setdefault(t, len(codes)) for t in source), dtype=np.int64, count=len(source))
    tgt = np.fromiter((codes.setdefault(t, len(codes)) for t in target), dtype=np.int64, count=len(target))
    return src, tgt


def _run_kernel(source: Sequence[str], target: Sequence[str]):
    src, tgt = encode_pair(source, target)
    n, m = len(src), len(tgt)
    dp = np.empty((n + 1, m + 1), dtype=np.int64)
    ops = np.empty(n + m + 1, dtype=np.int8)
    spans = np.empty((n + m + 1, 4), dtype=np.int64)
    k, n_edits = align_codes(src, tgt, dp, ops, spans)
    return ops[:k][::-1], spans[:n_edits]


def align_tokens(source: Sequence[str], target: Sequence[str]) -> list[str]:
    """The canonical pre-merge script as a list of ``"M"``/``"S"``/``"D"``/``"I"``."""
    ops, _ = _run_kernel(source, target)
    return [OP_NAMES[o] for o in ops]


def extract_edits(
    source: Sequence[str], target: Sequence[str], granularity: Granularity = CHAR
) -> EditSet:
    _, spans = _run_kernel(source, target)
    edits = tuple(Edit(int(s), int(e), tuple(target[int(a):int(b)])) for s, e, a, b in spans)
    return EditSet(edits, len(source), granularity)


def diff_texts(source: str, target: str, granularity: Granularity = CHAR) -> EditSet:
    """Tokenize both sentences at ``granularity`` and extract the edit set."""
    return extract_edits(tokenize(source, granularity), tokenize(target, granularity), granularity)
