"""Hypothesis generation: prompts, LM access and rule extraction."""

from __future__ import annotations

import threading
from typing import Optional

from ..core import TaskKind
from .client import (
    TRANSLATION_MAX_TOKENS,
    ChatCompletionsBackend,
    CostLedger,
    LmClient,
    LmRequest,
    LmResponse,
    ProposerError,
    QueueExhaustedError,
    ResponseCache,
    ScriptedBackend,
    TransportError,
    cache_key,
    cached_complete,
    propose,
    sampling_temperature,
)
from .extract import extract_rule
from .prompts import PromptBuilder, PromptError, PromptTemplate, load_templates, render_prompt


class LmTranslator:
    """Translates natural-language rules into sandbox programs, greedily, one
    request per distinct (rule, kind, model)."""

    def __init__(self, client: LmClient, templates: Optional[dict] = None):
        self.client = client
        self.templates = templates
        self._memo: dict = {}
        self._lock = threading.Lock()

    def translate(self, rule_text: str, kind: TaskKind) -> str:
        key = (rule_text, TaskKind(kind), self.client.model)
        with self._lock:
            if key in self._memo:
                return self._memo[key]
        prompt = PromptBuilder(kind, self.templates).translation(rule_text)
        req = LmRequest(self.client.model, prompt, 0.0, TRANSLATION_MAX_TOKENS)
        text = self.client.complete(req).text
        with self._lock:
            self._memo[key] = text
        return text


__all__ = [
    "ChatCompletionsBackend",
    "CostLedger",
    "LmClient",
    "LmRequest",
    "LmResponse",
    "LmTranslator",
    "PromptBuilder",
    "PromptError",
    "PromptTemplate",
    "ProposerError",
    "QueueExhaustedError",
    "ResponseCache",
    "ScriptedBackend",
    "TransportError",
    "cache_key",
    "cached_complete",
    "extract_rule",
    "load_templates",
    "propose",
    "render_prompt",
    "sampling_temperature",
]
