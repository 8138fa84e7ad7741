"""Provider-agnostic LLM access: prompts, cached completions, structured parsing."""

from gecforge.llm.cache import CacheKey, MemoryCache, ResponseCache
from gecforge.llm.client import (
    BACKENDS,
    LiveApiBackend,
    LlmClient,
    LlmRequest,
    LlmResponse,
    ReplayBackend,
    ScriptedMockBackend,
    cache_key,
    load_mock_script,
    make_client,
)
from gecforge.llm.structured import VERDICTS, extract_json, parse_structured
from gecforge.llm.templates import TemplateStore, default_store, render_prompt

__all__ = [
    "BACKENDS",
    "CacheKey",
    "LiveApiBackend",
    "LlmClient",
    "LlmRequest",
    "LlmResponse",
    "MemoryCache",
    "ReplayBackend",
    "ResponseCache",
    "ScriptedMockBackend",
    "TemplateStore",
    "VERDICTS",
    "cache_key",
    "default_store",
    "extract_json",
    "load_mock_script",
    "make_client",
    "parse_structured",
    "render_prompt",
]
