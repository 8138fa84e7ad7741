"""Parallel GEC corpora: data model, normalization and TSV / M2 / JSONL I/O.

Every reader decodes strict UTF-8, normalizes text and rejects malformed
input with a located error. Writers refuse values their format cannot
carry instead of dropping them.

M2 files look like::

    # granularity=char
    # id=s1
    S 他 今 天 去 了 学 校
    A 4 5|||delete||||||REQUIRED|||-NONE-|||0

Tokens on ``S`` lines and in replacements are space separated; a literal
space, backslash or bar inside a token is written ``\\s``, ``\\\\`` or ``\\b``.
Files without a granularity header are read as whitespace-tokenized words.
"""

from __future__ import annotations

import enum
import json
import os
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from gecforge.align import (
    Edit,
    EditSet,
    Granularity,
    apply_edits,
    detokenize,
    extract_edits,
    tokenize,
)
from gecforge.errors import (
    DecodeError,
    DuplicateIdError,
    FormatError,
    GecForgeError,
    GranularityError,
    IoError,
    ParseError,
)

_ASCII_WS_RUN = re.compile(r"[ \t\n\r\f\v]+")


def normalize_text(raw: str | bytes) -> str:
    """NFC, trimmed, with internal runs of ASCII whitespace collapsed to one space."""
    if isinstance(raw, (bytes, bytearray)):
        raw = decode_utf8(bytes(raw))
    else:
        try:
            raw.encode("utf-8")
        except UnicodeEncodeError as exc:
            offset = len(raw[: exc.start].encode("utf-8", "surrogatepass"))
            raise DecodeError("string is not valid Unicode", offset) from None
    text = unicodedata.normalize("NFC", raw)
    text = _ASCII_WS_RUN.sub(" ", text).strip()
    # stripping can expose a new NFC boundary only in degenerate inputs; re-check
    return unicodedata.normalize("NFC", text)


def decode_utf8(data: bytes) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DecodeError(f"invalid UTF-8 ({exc.reason})", exc.start) from None


# -- data model ---------------------------------------------------------------


@dataclass(frozen=True)
class CorrectionSample:
    id: str
    source: str
    references: tuple[str, ...] = ()
    gold_edits: tuple[EditSet, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "references", tuple(self.references))
        if self.gold_edits is not None:
            object.__setattr__(self, "gold_edits", tuple(self.gold_edits))
            if len(self.gold_edits) != len(self.references):
                raise ValueError(
                    f"sample {self.id!r}: {len(self.gold_edits)} gold edit sets "
                    f"for {len(self.references)} references"
                )
        if not self.id:
            raise ValueError("sample id must be nonempty")
        if not normalize_text(self.source):
            raise ValueError(f"sample {self.id!r}: empty source")

    def gold_edit_sets(self, granularity: Granularity) -> tuple[EditSet, ...]:
        """Gold edit sets at ``granularity``, derived from references when absent."""
        if self.gold_edits is not None and all(
            es.granularity == granularity for es in self.gold_edits
        ):
            return self.gold_edits
        if self.gold_edits is not None and self.gold_edits:
            found = {str(es.granularity) for es in self.gold_edits}
            raise GranularityError(
                f"sample {self.id!r} carries gold edits at {sorted(found)}, "
                f"scoring requested {granularity}"
            )
        src = tokenize(self.source, granularity)
        return tuple(
            extract_edits(src, tokenize(ref, granularity), granularity)
            for ref in self.references
        )


@dataclass(frozen=True)
class Prediction:
    sample_id: str
    hypothesis: str


class CorpusFormat(str, enum.Enum):
    ParallelTSV = "tsv"
    M2 = "m2"
    JsonLines = "jsonl"

    @classmethod
    def coerce(cls, value: "CorpusFormat | str | None", path: str | os.PathLike | None = None):
        if isinstance(value, cls):
            return value
        if value is None:
            if path is None:
                raise FormatError("corpus format not given and no path to infer it from")
            suffix = Path(path).suffix.lower().lstrip(".")
            value = {"tsv": "tsv", "txt": "tsv", "m2": "m2", "jsonl": "jsonl", "json": "jsonl"}.get(suffix)
            if value is None:
                raise FormatError(f"cannot infer corpus format from {str(path)!r}")
        try:
            return cls(str(value).lower())
        except ValueError:
            raise FormatError(f"unknown corpus format {value!r}") from None


# -- reading ------------------------------------------------------------------


def _read_text(path) -> str:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return decode_utf8(data)


def _lines(text: str) -> list[str]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _assign_id(raw_id: str | None, line_no: int, seen: set[str]) -> str:
    sample_id = raw_id if raw_id else f"s{line_no}"
    if sample_id in seen:
        raise DuplicateIdError(sample_id, line_no)
    seen.add(sample_id)
    return sample_id


def _field(raw: str, line_no: int, line: str, what: str) -> str:
    try:
        return normalize_text(raw)
    except DecodeError as exc:
        raise ParseError(f"{what}: {exc}", line_no, line) from None


def _load_tsv(text: str) -> list[CorrectionSample]:
    samples, seen = [], set()
    for no, line in enumerate(_lines(text), start=1):
        line = line.rstrip("\r")
        cols = line.split("\t")
        if len(cols) < 2:
            raise ParseError("expected id<TAB>source[<TAB>ref...]", no, line)
        source = _field(cols[1], no, line, "source")
        if not source:
            raise ParseError("empty source", no, line)
        refs = tuple(_field(c, no, line, "reference") for c in cols[2:])
        if any(not r for r in refs):
            raise ParseError("empty reference column", no, line)
        sample_id = _assign_id(cols[0].strip(), no, seen)
        samples.append(CorrectionSample(sample_id, source, refs))
    return samples


def _load_jsonl(text: str) -> list[CorrectionSample]:
    samples, seen = [], set()
    for no, line in enumerate(_lines(text), start=1):
        if not line.strip():
            raise ParseError("blank line", no, line)
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", no, line) from None
        if not isinstance(obj, dict) or not isinstance(obj.get("source"), str):
            raise ParseError("expected an object with a string 'source'", no, line)
        refs = obj.get("references", [])
        if not isinstance(refs, list) or not all(isinstance(r, str) for r in refs):
            raise ParseError("'references' must be a list of strings", no, line)
        source = _field(obj["source"], no, line, "source")
        if not source:
            raise ParseError("empty source", no, line)
        refs = tuple(_field(r, no, line, "reference") for r in refs)
        gold = None
        if obj.get("gold_edits") is not None:
            try:
                gold = tuple(EditSet.from_json(es) for es in obj["gold_edits"])
            except (GecForgeError, ValueError, KeyError, TypeError) as exc:
                raise ParseError(f"bad gold_edits ({exc})", no, line) from None
            if len(gold) != len(refs):
                raise ParseError("gold_edits length differs from references", no, line)
        raw_id = obj.get("id")
        if raw_id is not None and not isinstance(raw_id, str):
            raise ParseError("'id' must be a string", no, line)
        sample_id = _assign_id(raw_id, no, seen)
        samples.append(CorrectionSample(sample_id, source, refs, gold))
    return samples


_M2_ESCAPES = {"\\": "\\\\", " ": "\\s", "|": "\\b"}
_M2_UNESCAPE = re.compile(r"\\(.)")
_NONE = "-NONE-"


def _m2_token(tok: str) -> str:
    out = "".join(_M2_ESCAPES.get(ch, ch) for ch in tok)
    return "\\" + out if out == _NONE else out


_M2_TOKEN = re.compile(r"(?:[^\\]|\\[\\sb-])+")


def _m2_untoken(tok: str, line_no: int, line: str) -> str:
    if not _M2_TOKEN.fullmatch(tok):
        raise ParseError(f"bad escape in token {tok!r}", line_no, line)
    return _M2_UNESCAPE.sub(lambda m: {"\\": "\\", "s": " ", "b": "|", "-": "-"}[m.group(1)], tok)


def _m2_tokens(text: str, line_no: int, line: str) -> list[str]:
    if text == "":
        return []
    parts = text.split(" ")
    if any(p == "" for p in parts):
        raise ParseError("empty token (double space)", line_no, line)
    return [_m2_untoken(p, line_no, line) for p in parts]


def _parse_header(line: str, no: int) -> Granularity:
    m = re.fullmatch(r"#\s*granularity=(\S+)", line.strip())
    if not m:
        raise ParseError("bad granularity header", no, line)
    try:
        return Granularity.parse(m.group(1))
    except GecForgeError:
        raise ParseError("bad granularity header", no, line) from None


def _load_m2(text: str) -> list[CorrectionSample]:
    lines = _lines(text)
    granularity = Granularity.word()
    samples, seen = [], set()
    pos = 0
    if lines and lines[0].startswith("# granularity="):
        granularity = _parse_header(lines[0], 1)
        pos = 1

    block: list[tuple[int, str]] = []

    def flush():
        if block:
            samples.append(_m2_block(block, granularity, seen))
            block.clear()

    for no, line in enumerate(lines[pos:], start=pos + 1):
        line = line.rstrip("\r")
        if line.strip() == "":
            flush()
        else:
            block.append((no, line))
    flush()
    return samples


def _m2_block(block, granularity: Granularity, seen: set[str]) -> CorrectionSample:
    raw_id = None
    rows = list(block)
    if rows[0][1].startswith("# id="):
        raw_id = rows[0][1][len("# id="):].strip()
        if not raw_id:
            raise ParseError("empty id comment", *rows[0])
        rows = rows[1:]
    if not rows or not rows[0][1].startswith("S "):
        no, line = rows[0] if rows else block[0]
        raise ParseError("block must start with an 'S ' line", no, line)
    s_no, s_line = rows[0]
    src_tokens = _m2_tokens(s_line[2:], s_no, s_line)
    if not src_tokens:
        raise ParseError("empty source", s_no, s_line)
    source = detokenize(src_tokens, granularity)
    if normalize_text(source) != source:
        raise ParseError("source is not normalized text", s_no, s_line)

    per_annotator: dict[int, list[Edit]] = {}
    noop: set[int] = set()
    for no, line in rows[1:]:
        if not line.startswith("A "):
            raise ParseError("expected an 'A ' line", no, line)
        fields = line[2:].split("|||")
        if len(fields) != 6:
            raise ParseError("A line needs 6 '|||'-separated fields", no, line)
        span = fields[0].split(" ")
        try:
            start, end = int(span[0]), int(span[1])
            annotator = int(fields[5])
        except (ValueError, IndexError):
            raise ParseError("bad span or annotator id", no, line) from None
        if len(span) != 2 or annotator < 0:
            raise ParseError("bad span or annotator id", no, line)
        if start == -1 and end == -1:
            if annotator in per_annotator and per_annotator[annotator]:
                raise ParseError("noop mixed with edits for one annotator", no, line)
            noop.add(annotator)
            per_annotator.setdefault(annotator, [])
            continue
        if annotator in noop:
            raise ParseError("noop mixed with edits for one annotator", no, line)
        repl = [] if fields[2] == _NONE else _m2_tokens(fields[2], no, line)
        try:
            edit = Edit(start, end, tuple(repl))
        except (GecForgeError, ValueError) as exc:
            raise ParseError(f"invalid edit ({exc})", no, line) from None
        if end > len(src_tokens):
            raise ParseError(f"edit span exceeds the {len(src_tokens)} source tokens", no, line)
        per_annotator.setdefault(annotator, []).append(edit)

    refs, gold = [], []
    for annotator in sorted(per_annotator):
        try:
            es = EditSet(tuple(per_annotator[annotator]), len(src_tokens), granularity)
        except GecForgeError as exc:
            raise ParseError(f"annotator {annotator}: {exc}", s_no, s_line) from None
        ref = detokenize(apply_edits(src_tokens, es), granularity)
        if not ref or normalize_text(ref) != ref:
            raise ParseError(f"annotator {annotator} yields an empty or unnormalized reference", s_no, s_line)
        refs.append(ref)
        gold.append(es)
    sample_id = _assign_id(raw_id, s_no, seen)
    return CorrectionSample(sample_id, source, tuple(refs), tuple(gold))


_LOADERS = {
    CorpusFormat.ParallelTSV: _load_tsv,
    CorpusFormat.M2: _load_m2,
    CorpusFormat.JsonLines: _load_jsonl,
}


def load_corpus(path, format: CorpusFormat | str | None = None) -> list[CorrectionSample]:
    fmt = CorpusFormat.coerce(format, path)
    return _LOADERS[fmt](_read_text(path))


def loads_corpus(text: str, format: CorpusFormat | str) -> list[CorrectionSample]:
    return _LOADERS[CorpusFormat.coerce(format)](text)


# -- writing ------------------------------------------------------------------


def _require_normalized(text: str, what: str, sample_id: str, tsv: bool = False) -> None:
    if tsv and ("\t" in text or "\n" in text):
        raise FormatError(f"sample {sample_id!r}: {what} contains a tab or newline (TSV delimiter)")
    if normalize_text(text) != text:
        raise FormatError(f"sample {sample_id!r}: {what} is not normalized text")


def _check_unique(samples: Sequence[CorrectionSample]) -> None:
    seen: set[str] = set()
    for s in samples:
        if s.id in seen:
            raise DuplicateIdError(s.id)
        seen.add(s.id)


def _dump_tsv(samples) -> str:
    out = []
    for s in samples:
        if s.gold_edits is not None:
            raise FormatError(f"sample {s.id!r}: ParallelTSV cannot carry gold edits (use M2 or JsonLines)")
        for text, what in [(s.id, "id"), (s.source, "source"), *((r, "reference") for r in s.references)]:
            _require_normalized(text, what, s.id, tsv=True)
            if not text:
                raise FormatError(f"sample {s.id!r}: empty {what}")
        out.append("\t".join([s.id, s.source, *s.references]) + "\n")
    return "".join(out)


def _dump_jsonl(samples) -> str:
    out = []
    for s in samples:
        _require_normalized(s.source, "source", s.id)
        for r in s.references:
            _require_normalized(r, "reference", s.id)
        obj = {"id": s.id, "source": s.source, "references": list(s.references)}
        if s.gold_edits is not None:
            obj["gold_edits"] = [es.to_json() for es in s.gold_edits]
        out.append(json.dumps(obj, ensure_ascii=False) + "\n")
    return "".join(out)


def _corpus_granularity(samples, granularity: Granularity | None) -> Granularity:
    found = {
        es.granularity
        for s in samples
        for es in (s.gold_edits or ())
    }
    if granularity is not None:
        found.add(granularity)
    if len(found) > 1:
        raise FormatError(f"M2 file needs one granularity, samples use {sorted(map(str, found))}")
    return found.pop() if found else Granularity.char()


def _dump_m2(samples, granularity: Granularity | None = None) -> str:
    gran = _corpus_granularity(samples, granularity)
    out = [f"# granularity={gran}\n"]
    for s in samples:
        _require_normalized(s.source, "source", s.id)
        src_tokens = tokenize(s.source, gran)
        if detokenize(src_tokens, gran) != s.source:
            raise FormatError(f"sample {s.id!r}: source does not survive {gran} tokenization")
        gold = s.gold_edit_sets(gran)
        out.append(f"\n# id={s.id}\n")
        out.append("S " + " ".join(_m2_token(t) for t in src_tokens) + "\n")
        for annotator, (ref, es) in enumerate(zip(s.references, gold)):
            _require_normalized(ref, "reference", s.id)
            if es.source_len != len(src_tokens) or detokenize(apply_edits(src_tokens, es), gran) != ref:
                raise FormatError(f"sample {s.id!r}: gold edits for reference {annotator} do not reproduce it")
            if not es.edits:
                out.append(f"A -1 -1|||noop|||{_NONE}|||REQUIRED|||{_NONE}|||{annotator}\n")
            for e in es:
                repl = " ".join(_m2_token(t) for t in e.replacement)
                out.append(
                    f"A {e.start} {e.end}|||{e.kind.lower()}|||{repl}|||REQUIRED|||{_NONE}|||{annotator}\n"
                )
    return "".join(out)


def dumps_corpus(
    samples: Sequence[CorrectionSample],
    format: CorpusFormat | str,
    granularity: Granularity | None = None,
) -> str:
    """Serialize ``samples``; ``granularity`` only affects M2 (default: the gold edits', else char)."""
    fmt = CorpusFormat.coerce(format)
    _check_unique(samples)
    if fmt is CorpusFormat.ParallelTSV:
        return _dump_tsv(samples)
    if fmt is CorpusFormat.JsonLines:
        return _dump_jsonl(samples)
    return _dump_m2(samples, granularity)


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            tmp.unlink()
        except OSError:
            pass
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_corpus(
    samples: Sequence[CorrectionSample],
    path,
    format: CorpusFormat | str | None = None,
    granularity: Granularity | None = None,
) -> None:
    fmt = CorpusFormat.coerce(format, path)
    atomic_write_text(path, dumps_corpus(samples, fmt, granularity))


# -- predictions --------------------------------------------------------------


def load_predictions(path, corpus: Sequence[CorrectionSample] | None = None) -> list[Prediction]:
    """Read hypotheses.

    ``.jsonl`` files hold ``{"id", "hypothesis"}`` objects and ``.tsv`` files
    ``id<TAB>hypothesis`` lines. Anything else is plain text with one
    hypothesis per line, aligned with ``corpus`` order.
    """
    text = _read_text(path)
    suffix = Path(path).suffix.lower()
    lines = [ln.rstrip("\r") for ln in _lines(text)]
    preds: list[Prediction] = []
    if suffix == ".jsonl":
        for no, line in enumerate(lines, start=1):
            try:
                obj = json.loads(line)
                sample_id, hyp = obj["id"], obj["hypothesis"]
            except (json.JSONDecodeError, KeyError, TypeError):
                raise ParseError("expected {\"id\", \"hypothesis\"}", no, line) from None
            if not isinstance(sample_id, str) or not isinstance(hyp, str):
                raise ParseError("id and hypothesis must be strings", no, line)
            preds.append(Prediction(sample_id, _field(hyp, no, line, "hypothesis")))
    elif suffix == ".tsv":
        for no, line in enumerate(lines, start=1):
            cols = line.split("\t")
            if len(cols) != 2 or not cols[0]:
                raise ParseError("expected id<TAB>hypothesis", no, line)
            preds.append(Prediction(cols[0], _field(cols[1], no, line, "hypothesis")))
    else:
        if corpus is None:
            raise FormatError("plain-text predictions need the corpus to align ids")
        if len(lines) != len(corpus):
            raise ParseError(
                f"{len(lines)} hypothesis lines for {len(corpus)} corpus samples", None, str(path)
            )
        preds = [
            Prediction(s.id, _field(line, no, line, "hypothesis"))
            for no, (s, line) in enumerate(zip(corpus, lines), start=1)
        ]
    seen: set[str] = set()
    for no, p in enumerate(preds, start=1):
        if p.sample_id in seen:
            raise DuplicateIdError(p.sample_id, no)
        seen.add(p.sample_id)
    return preds


def write_predictions(predictions: Iterable[Prediction], path) -> None:
    lines = [
        json.dumps({"id": p.sample_id, "hypothesis": p.hypothesis}, ensure_ascii=False) + "\n"
        for p in predictions
    ]
    atomic_write_text(path, "".join(lines))
