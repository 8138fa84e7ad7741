"""Prompt templates with ``{{slot}}`` placeholders and JSONL demonstrations.

A template directory holds, per template name:

* ``<name>.tmpl``: the user prompt; ``{{slot}}`` is required, ``{{slot?}}``
  optional (renders empty when missing),
* ``<name>.system.tmpl``: the system prompt (optional),
* ``<name>.demos.jsonl``: ``{"input": ..., "output": ...}`` demonstrations
  (optional).

Substitution is single pass, so slot values containing braces are never
re-expanded.
"""

from __future__ import annotations

import hashlib
import json
import re
from functools import lru_cache
from pathlib import Path
from typing import Mapping

from gecforge.errors import ConfigError, TemplateError

PACKAGE_PROMPTS = Path(__file__).resolve().parent.parent / "prompts"

_SLOT = re.compile(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)(\?)?\s*\}\}")


class TemplateStore:
    def __init__(self, root=PACKAGE_PROMPTS):
        self.root = Path(root)

    def _read(self, name: str, suffix: str) -> str | None:
        path = self.root / f"{name}{suffix}"
        try:
            return path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return None

    def source(self, name: str) -> str:
        text = self._read(name, ".tmpl")
        if text is None:
            raise ConfigError(f"unknown template {name!r} in {self.root}")
        return text

    def names(self) -> list[str]:
        return sorted(
            p.name[: -len(".tmpl")]
            for p in self.root.glob("*.tmpl")
            if not p.name.endswith(".system.tmpl")
        )

    def slots(self, name: str) -> tuple[list[str], list[str]]:
        """(required, optional) slot names in order of first appearance."""
        required, optional = [], []
        for m in _SLOT.finditer(self.source(name)):
            bucket = optional if m.group(2) else required
            if m.group(1) not in bucket:
                bucket.append(m.group(1))
        return required, optional

    def render(self, name: str, slots: Mapping[str, str]) -> str:
        return _substitute(self.source(name), slots, name)

    def system(self, name: str, slots: Mapping[str, str] | None = None) -> str:
        text = self._read(name, ".system.tmpl")
        if text is None:
            raise ConfigError(f"template {name!r} has no system prompt")
        return _substitute(text, slots or {}, f"{name}.system")

    def demonstrations(self, name: str) -> tuple[tuple[str, str], ...]:
        text = self._read(name, ".demos.jsonl")
        if text is None:
            return ()
        demos = []
        for no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                demos.append((obj["input"], obj["output"]))
            except (json.JSONDecodeError, KeyError, TypeError):
                raise ConfigError(f"{name}.demos.jsonl line {no}: expected {{input, output}}") from None
        return tuple(demos)

    def fingerprint(self, name: str) -> str:
        """sha256 over the template, its system prompt and its demonstrations."""
        h = hashlib.sha256()
        for suffix in (".tmpl", ".system.tmpl", ".demos.jsonl"):
            h.update(suffix.encode())
            h.update((self._read(name, suffix) or "").encode("utf-8"))
        return h.hexdigest()


def _substitute(template: str, slots: Mapping[str, str], name: str) -> str:
    def repl(m: re.Match) -> str:
        slot, optional = m.group(1), m.group(2)
        if slot in slots and slots[slot] is not None:
            return str(slots[slot])
        if optional:
            return ""
        raise TemplateError(slot, name)

    return _SLOT.sub(repl, template)


@lru_cache(maxsize=None)
def _store(root: str) -> TemplateStore:
    return TemplateStore(root)


def default_store() -> TemplateStore:
    return _store(str(PACKAGE_PROMPTS))


def render_prompt(name: str, slots: Mapping[str, str], store: TemplateStore | None = None) -> str:
    return (store or default_store()).render(name, slots)
