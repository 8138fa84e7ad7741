"""Exception hierarchy shared by every gecforge module."""

from __future__ import annotations


class GecForgeError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(GecForgeError):
    """Unknown template/segmenter/backend, or an inconsistent configuration."""


# -- corpus -----------------------------------------------------------------


class DecodeError(GecForgeError, ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ParseError(GecForgeError, ValueError):
    """Malformed input. ``line`` is 1-based when known; ``text`` is the offending input."""

    def __init__(self, message: str, line: int | None = None, text: str = ""):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}: {text!r}" if text else f"{where}{message}")
        self.line = line
        self.text = text


class DuplicateIdError(GecForgeError, ValueError):
    def __init__(self, sample_id: str, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"duplicate sample id {sample_id!r}{where}")
        self.sample_id = sample_id
        self.line = line


class FormatError(GecForgeError, ValueError):
    """A value cannot be represented in the requested on-disk format."""


class IoError(GecForgeError, OSError):
    pass


# -- align / metrics --------------------------------------------------------


class BoundsError(GecForgeError, IndexError):
    pass


class OverlapError(GecForgeError, ValueError):
    pass


class GranularityError(GecForgeError, ValueError):
    pass


class DomainError(GecForgeError, ValueError):
    pass


class MissingSampleError(GecForgeError, KeyError):
    def __init__(self, sample_ids):
        self.sample_ids = list(sample_ids)
        super().__init__(f"predictions reference unknown sample ids: {self.sample_ids}")

    def __str__(self) -> str:
        return self.args[0]


# -- llm --------------------------------------------------------------------


class TemplateError(GecForgeError, KeyError):
    def __init__(self, slot: str, template: str = ""):
        self.slot = slot
        self.template = template
        super().__init__(slot)

    def __str__(self) -> str:
        suffix = f" in template {self.template!r}" if self.template else ""
        return f"missing required slot {self.slot!r}{suffix}"


class ReplayMissError(GecForgeError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"replay cache has no entry for {key}")


class TransportError(GecForgeError):
    pass


class RefusalError(GecForgeError):
    def __init__(self, message: str, body: str = ""):
        super().__init__(message)
        self.body = body


class StructuredOutputError(GecForgeError, ValueError):
    """Base for parse/schema failures; always keeps the raw completion text."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class OutputParseError(StructuredOutputError, ParseError):
    """No JSON value could be located in a completion."""

    def __init__(self, message: str, raw: str):
        StructuredOutputError.__init__(self, message, raw)
        self.line = None
        self.text = raw


class SchemaError(StructuredOutputError):
    def __init__(self, field: str, value, raw: str = "", reason: str = ""):
        self.field = field
        self.value = value
        why = f": {reason}" if reason else ""
        super().__init__(f"field {field!r} has invalid value {value!r}{why}", raw)


# -- pipelines --------------------------------------------------------------


class AnnotationFailed(GecForgeError):
    def __init__(self, sample_id: str, raw_responses, reason: str = ""):
        self.sample_id = sample_id
        self.raw_responses = list(raw_responses)
        self.reason = reason
        super().__init__(f"annotation failed for {sample_id!r}: {reason}")


class JudgmentFailed(GecForgeError):
    def __init__(self, sample_id: str, raw_responses, reason: str = ""):
        self.sample_id = sample_id
        self.raw_responses = list(raw_responses)
        self.reason = reason
        super().__init__(f"judgment failed for {sample_id!r}: {reason}")


class EncodingError(GecForgeError, ValueError):
    pass


class CoverageError(GecForgeError, ValueError):
    pass
