"""Command-line entry point.

Subcommands: ``extract-edits``, ``score``, ``exam``, ``see`` and
``cache stats|gc``. Option values resolve as flags > ``--config`` JSON file >
environment > defaults; the resolved values are recorded in a run manifest
written next to the outputs.

Exit codes: 0 success, 2 usage or input error, 3 backend failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from gecforge import __version__
from gecforge.align import Granularity, diff_texts
from gecforge.corpus import (
    CorrectionSample,
    atomic_write_text,
    dumps_corpus,
    load_corpus,
    load_predictions,
    normalize_text,
)
from gecforge.errors import (
    GecForgeError,
    RefusalError,
    ReplayMissError,
    TransportError,
)
from gecforge.exam import ErrorTypeSchema, ExamConfig, load_records, run_exam
from gecforge.llm.cache import ResponseCache, canonical_json
from gecforge.llm.client import BACKENDS, load_mock_script, make_client
from gecforge.metrics import format_table, score_corpus
from gecforge.see import SeeConfig, run_see

log = logging.getLogger("gecforge")

EXIT_OK, EXIT_INPUT, EXIT_BACKEND = 0, 2, 3

_BACKEND_ERRORS = (TransportError, ReplayMissError, RefusalError)

# option name -> environment variable consulted when neither flag nor config sets it
_ENV = {
    "model": "GECFORGE_MODEL",
    "judge_model": "GECFORGE_MODEL",
    "api_base": "GECFORGE_API_BASE",
}

_DEFAULTS = {
    "granularity": "char",
    "beta": 0.5,
    "backend": "live-api",
    "model": "gpt-3.5-turbo",
    "gold_mode": "none",
    "split": "train",
    "workers": 1,
    "n_candidates": 1,
    "cache_dir": "cache",
    "rpm": None,
}


class _Resolver:
    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = {}
        if getattr(args, "config", None):
            try:
                self.config = json.loads(Path(args.config).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise _InputError(f"cannot read config {args.config}: {exc}") from None
            if not isinstance(self.config, dict):
                raise _InputError("config file must hold a JSON object")
        self.resolved: dict = {}

    def __call__(self, name: str, required: bool = False, default=None):
        value = getattr(self.args, name, None)
        if value is None:
            value = self.config.get(name, self.config.get(name.replace("_", "-")))
        if value is None and name in _ENV:
            value = os.environ.get(_ENV[name])
        if value is None:
            value = default if default is not None else _DEFAULTS.get(name)
        if value is None and required:
            raise _InputError(f"--{name.replace('_', '-')} is required")
        self.resolved[name] = value
        return value


class _InputError(Exception):
    pass


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, argv, resolved: dict, inputs: dict, backend: str | None) -> None:
    config_blob = canonical_json({k: resolved[k] for k in sorted(resolved)})
    manifest = {
        "command": ["gecforge", *argv],
        "config": resolved,
        "config_sha256": hashlib.sha256(config_blob.encode("utf-8")).hexdigest(),
        "inputs": {str(k): _sha256_file(v) for k, v in inputs.items() if v},
        "tool_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "backend": backend,
    }
    atomic_write_text(path, json.dumps(manifest, ensure_ascii=False, indent=2) + "\n")


def _granularity(text: str) -> Granularity:
    try:
        return Granularity.parse(text)
    except GecForgeError as exc:
        raise _InputError(str(exc)) from None


# -- subcommands --------------------------------------------------------------


def cmd_extract_edits(args, argv) -> int:
    get = _Resolver(args)
    gran = _granularity(get("granularity"))
    src_lines = Path(args.src).read_text(encoding="utf-8").splitlines()
    tgt_lines = Path(args.tgt).read_text(encoding="utf-8").splitlines()
    if len(src_lines) != len(tgt_lines):
        print(
            f"error: {args.src} has {len(src_lines)} lines but {args.tgt} has {len(tgt_lines)}",
            file=sys.stderr,
        )
        return EXIT_INPUT
    samples = []
    for no, (src, tgt) in enumerate(zip(src_lines, tgt_lines), start=1):
        src, tgt = normalize_text(src), normalize_text(tgt)
        if not src:
            raise _InputError(f"{args.src} line {no}: empty source sentence")
        refs = (tgt,) if tgt else ()
        gold = (diff_texts(src, tgt, gran),) if tgt else ()
        samples.append(CorrectionSample(f"s{no}", src, refs, gold))
    atomic_write_text(args.out, dumps_corpus(samples, "m2", gran))
    write_manifest(f"{args.out}.manifest.json", argv, get.resolved, {"src": args.src, "tgt": args.tgt}, None)
    return EXIT_OK


def _gold_granularity(corpus) -> str:
    for s in corpus:
        for es in s.gold_edits or ():
            return str(es.granularity)
    return _DEFAULTS["granularity"]


def cmd_score(args, argv) -> int:
    get = _Resolver(args)
    corpus = load_corpus(args.gold, args.gold_format)
    if args.realign:
        corpus = [dataclasses.replace(s, gold_edits=None) for s in corpus]
    # without an explicit choice, score at the granularity the gold edits were annotated in
    gran = _granularity(get("granularity", default=_gold_granularity(corpus)))
    beta = float(get("beta"))
    preds = load_predictions(args.hyp, corpus)
    report = score_corpus(preds, corpus, gran, beta)
    out = args.out or f"{args.hyp}.score.json"
    print(format_table([(args.label or Path(args.hyp).name, report)]), end="")
    atomic_write_text(out, report.to_json())
    write_manifest(f"{out}.manifest.json", argv, get.resolved, {"gold": args.gold, "hyp": args.hyp}, None)
    return EXIT_OK


def _client(get, args):
    backend = get("backend")
    if backend not in BACKENDS:
        raise _InputError(f"unknown backend {backend!r}")
    script = None
    if backend == "scripted-mock":
        script_path = get("mock_script", required=True)
        script = load_mock_script(script_path)
    rpm = get("rpm")
    return make_client(
        backend,
        cache_dir=get("cache_dir"),
        script=script,
        api_base=get("api_base"),
        rpm=float(rpm) if rpm else None,
    )


def cmd_exam(args, argv) -> int:
    get = _Resolver(args)
    schema_path = get("schema")
    schema = ErrorTypeSchema.load(schema_path) if schema_path else ErrorTypeSchema()
    corpus = load_corpus(args.corpus, get("corpus_format"))
    client = _client(get, args)
    config = ExamConfig(
        client=client,
        model=get("model"),
        schema=schema,
        split=get("split"),
        gold_mode=get("gold_mode"),
        workers=int(get("workers")),
        n_candidates=int(get("n_candidates")),
    )
    out = Path(args.out_dir)
    result = run_exam(corpus, config, out)
    inputs = {"corpus": args.corpus, "schema": schema_path, "mock_script": get.resolved.get("mock_script")}
    write_manifest(out / "manifest.json", argv, get.resolved, inputs, client.backend_name)
    print(
        f"{len(result.records)} records, {len(result.failures)} failures, "
        f"{client.hits} cache hits, {client.backend.calls} backend calls"
    )
    return EXIT_BACKEND if any(f["kind"] == "backend" for f in result.failures) else EXIT_OK


def cmd_see(args, argv) -> int:
    get = _Resolver(args)
    gran = _granularity(get("granularity"))
    corpus = load_corpus(args.corpus, get("corpus_format"))
    if args.realign:
        corpus = [dataclasses.replace(s, gold_edits=None) for s in corpus]
    preds = load_predictions(args.pred, corpus)
    expl_path = get("explanations")
    explanations = load_records(expl_path) if expl_path else {}
    judge = get("judge_model", required=True)
    config_kwargs = dict(
        judge_model=judge,
        evaluated_model=get("evaluated_model"),
        allow_same_model=bool(args.allow_same_model or get.config.get("allow_same_model")),
        granularity=gran,
        use_explanations=bool(expl_path),
        explanations=explanations,
        workers=int(get("workers")),
        beta=float(get("beta")),
    )
    # validate the judge/evaluated pairing before touching any backend
    SeeConfig(client=None, **config_kwargs)
    client = _client(get, args)
    config = SeeConfig(client=client, **config_kwargs)
    out = Path(args.out_dir)
    result = run_see(corpus, preds, config, out)
    inputs = {
        "corpus": args.corpus,
        "pred": args.pred,
        "explanations": expl_path,
        "mock_script": get.resolved.get("mock_script"),
    }
    write_manifest(out / "manifest.json", argv, get.resolved, inputs, client.backend_name)
    print(format_table([(Path(args.pred).name, result.report)]), end="")
    if result.exclusions:
        print(f"{len(result.exclusions)} sentences excluded (see see_report.json)")
    return EXIT_BACKEND if any(e["kind"] == "backend" for e in result.exclusions) else EXIT_OK


def cmd_cache(args, argv) -> int:
    cache = ResponseCache(args.cache_dir)
    if args.action == "stats":
        print(json.dumps(cache.stats(), indent=2))
    else:
        print(f"removed {cache.gc()} files")
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _llm_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=BACKENDS, help="LLM backend (default: live-api)")
    p.add_argument("--cache-dir", help="response cache directory (default: ./cache)")
    p.add_argument("--mock-script", help="JSON script for the scripted-mock backend")
    p.add_argument("--api-base", help="OpenAI-compatible base URL (env GECFORGE_API_BASE)")
    p.add_argument("--rpm", type=float, help="max requests per minute to the live backend")
    p.add_argument("--workers", type=int, help="parallel LLM requests (default: 1)")
    p.add_argument("--config", help="JSON file with option values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gecforge",
        description="Edit extraction, exact-match scoring, explanation augmentation and LLM-judged evaluation for GEC.",
    )
    parser.add_argument("--version", action="version", version=f"gecforge {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-edits", help="align parallel sentence files into an M2 edit file")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--granularity", help="char | word | word:<segmenter> (default: char)")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_extract_edits)

    p = sub.add_parser("score", help="exact-match P/R/F against gold references")
    p.add_argument("--gold", required=True, help="gold corpus (.m2, .tsv or .jsonl)")
    p.add_argument("--gold-format", choices=["tsv", "m2", "jsonl"])
    p.add_argument("--hyp", required=True, help="hypotheses: plain text lines, or .jsonl/.tsv with ids")
    p.add_argument("--granularity", help="default: the gold file's granularity, else char")
    p.add_argument("--beta", type=float)
    p.add_argument("--realign", action="store_true", help="ignore gold edits in the file and re-align the references")
    p.add_argument("--out", help="JSON report path (default: <hyp>.score.json)")
    p.add_argument("--label")
    p.add_argument("--config")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("exam", help="collect LLM explanations and write augmented training files")
    p.add_argument("--corpus", required=True)
    p.add_argument("--corpus-format", choices=["tsv", "m2", "jsonl"])
    p.add_argument("--schema", help="schema.json with error-type names")
    p.add_argument("--model", help="explainer model (env GECFORGE_MODEL)")
    p.add_argument("--gold-mode", choices=["none", "train", "test", "both"])
    p.add_argument("--split", choices=["train", "test"])
    p.add_argument("--n-candidates", type=int)
    p.add_argument("--out-dir", required=True)
    _llm_options(p)
    p.set_defaults(func=cmd_exam)

    p = sub.add_parser("see", help="judge predicted edits with an LLM and score them")
    p.add_argument("--corpus", required=True)
    p.add_argument("--corpus-format", choices=["tsv", "m2", "jsonl"])
    p.add_argument("--pred", required=True)
    p.add_argument("--judge-model", help="judge model (env GECFORGE_MODEL)")
    p.add_argument("--evaluated-model", help="name of the evaluated system when it is an LLM")
    p.add_argument("--allow-same-model", action="store_true", default=None)
    p.add_argument("--explanations", help="records.jsonl from `gecforge exam`")
    p.add_argument("--granularity", help="char | word | word:<segmenter> (default: char)")
    p.add_argument("--realign", action="store_true", help="ignore gold edits in the file and re-align the references")
    p.add_argument("--beta", type=float)
    p.add_argument("--out-dir", required=True)
    _llm_options(p)
    p.set_defaults(func=cmd_see)

    p = sub.add_parser("cache", help="inspect or clean a response cache")
    p.add_argument("action", choices=["stats", "gc"])
    p.add_argument("--cache-dir", default="cache")
    p.set_defaults(func=cmd_cache)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args, argv)
    except _BACKEND_ERRORS as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (_InputError, GecForgeError, OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except KeyboardInterrupt:
        print("interrupted; cached responses are kept, re-run to resume", file=sys.stderr)
        return 130
