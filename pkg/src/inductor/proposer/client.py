"""Chat-completion client with a file cache, bounded retries and cost ledger.

Backends only know how to answer one request. :class:`LmClient` layers the
cache in front of them (keyed on model, prompt, temperature and sample
index) and charges the ledger for cache misses only, so a warm cache
replays a run without a single backend call.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Union

log = logging.getLogger(__name__)

API_KEY_ENV = "INDUCTOR_API_KEY"
BASE_URL_ENV = "INDUCTOR_BASE_URL"
MODEL_ENV = "INDUCTOR_MODEL"
DEFAULT_BASE_URL = "https://api.openai.com/v1"

RULE_MAX_TOKENS = 1024
TRANSLATION_MAX_TOKENS = 2048

# USD per 1K tokens (prompt, completion)
DEFAULT_RATES = {
    "gpt-4": (0.03, 0.06),
    "gpt-3.5-turbo": (0.0015, 0.002),
}


class ProposerError(Exception):
    pass


class TransportError(ProposerError):
    def __init__(self, message: str, retryable: bool = True):
        super().__init__(message)
        self.retryable = retryable


class QueueExhaustedError(ProposerError):
    pass


@dataclass(frozen=True)
class LmRequest:
    model: str
    prompt: str
    temperature: float = 0.0
    max_tokens: int = RULE_MAX_TOKENS
    seed: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class LmResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")


def rate_for(model: str, rates: Optional[dict] = None) -> tuple:
    table = DEFAULT_RATES if rates is None else rates
    best = None
    for prefix, rate in table.items():
        if model.startswith(prefix) and (best is None or len(prefix) > len(best[0])):
            best = (prefix, tuple(rate))
    return best[1] if best else (0.0, 0.0)


@dataclass
class CostLedger:
    api_calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    estimated_cost: float = 0.0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def charge(self, model: str, resp: LmResponse, rates: Optional[dict] = None) -> None:
        p_rate, c_rate = rate_for(model, rates)
        with self._lock:
            self.api_calls += 1
            self.prompt_tokens += resp.prompt_tokens
            self.completion_tokens += resp.completion_tokens
            self.estimated_cost += (resp.prompt_tokens * p_rate + resp.completion_tokens * c_rate) / 1000.0

    def as_dict(self) -> dict:
        return {
            "api_calls": self.api_calls,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "estimated_cost": round(self.estimated_cost, 10),
        }


def count_tokens(text: str) -> int:
    """Whitespace token estimate used when a backend reports no usage."""
    return len(text.split())


# --- backends --------------------------------------------------------------


class ScriptedBackend:
    """Deterministic stand-in for an LM.

    Either replays a queue of canned strings in order or calls ``responder``
    with each request.  ``calls`` counts every request that reached it.
    """

    def __init__(
        self,
        responses: Optional[Iterable[str]] = None,
        responder: Optional[Callable[[LmRequest], str]] = None,
    ):
        if (responses is None) == (responder is None):
            raise ValueError("give exactly one of responses or responder")
        self.queue = deque(responses) if responses is not None else None
        self.responder = responder
        self.calls = 0
        self.requests: list = []
        self._lock = threading.Lock()

    def complete(self, req: LmRequest) -> LmResponse:
        with self._lock:
            self.calls += 1
            self.requests.append(req)
            if self.queue is not None:
                if not self.queue:
                    raise QueueExhaustedError("scripted backend has no responses left")
                text = self.queue.popleft()
            else:
                text = self.responder(req)
        return LmResponse(text, count_tokens(req.prompt), count_tokens(text))


class ChatCompletionsBackend:
    """OpenAI-compatible ``/chat/completions`` endpoint, one user message."""

    def __init__(
        self,
        base_url: Optional[str] = None,
        api_key: Optional[str] = None,
        timeout: float = 120.0,
        transport=None,
    ):
        import httpx

        self.base_url = (base_url or os.environ.get(BASE_URL_ENV) or DEFAULT_BASE_URL).rstrip("/")
        self.api_key = api_key or os.environ.get(API_KEY_ENV) or os.environ.get("OPENAI_API_KEY")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        self._http = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def payload(self, req: LmRequest) -> dict:
        body = {
            "model": req.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        if req.seed is not None:
            body["seed"] = req.seed
        return body

    def complete(self, req: LmRequest) -> LmResponse:
        import httpx

        try:
            r = self._http.post(f"{self.base_url}/chat/completions", json=self.payload(req))
        except httpx.HTTPError as e:
            raise TransportError(f"request failed: {e}") from e
        if r.status_code == 429 or r.status_code >= 500:
            raise TransportError(f"HTTP {r.status_code}: {r.text[:200]}")
        if r.status_code >= 400:
            raise TransportError(f"HTTP {r.status_code}: {r.text[:200]}", retryable=False)
        try:
            data = r.json()
            text = data["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise TransportError(f"malformed completion response: {e}") from e
        usage = data.get("usage") or {}
        return LmResponse(
            text,
            int(usage.get("prompt_tokens", count_tokens(req.prompt))),
            int(usage.get("completion_tokens", count_tokens(text))),
        )


# --- cache -----------------------------------------------------------------


def cache_key(req: LmRequest, sample_index: int) -> str:
    blob = json.dumps([req.model, req.prompt, req.temperature, sample_index], ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ResponseCache:
    """One JSON file per key holding the request and response."""

    def __init__(self, directory: Union[str, Path]):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)

    def path(self, key: str) -> Path:
        return self.dir / f"{key}.json"

    def get(self, key: str) -> Optional[LmResponse]:
        p = self.path(key)
        if not p.exists():
            return None
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
            return LmResponse(**data["response"])
        except (ValueError, KeyError, TypeError) as e:
            log.warning("ignoring corrupted cache entry %s: %s", p.name, e)
            return None

    def put(self, key: str, req: LmRequest, sample_index: int, resp: LmResponse) -> None:
        record = {"request": asdict(req), "sample_index": sample_index, "response": asdict(resp)}
        fd, tmp = tempfile.mkstemp(dir=self.dir, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                json.dump(record, f, ensure_ascii=False, indent=1)
            os.replace(tmp, self.path(key))
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


# --- client ----------------------------------------------------------------


class LmClient:
    def __init__(
        self,
        backend,
        model: str = "scripted",
        cache: Optional[ResponseCache] = None,
        ledger: Optional[CostLedger] = None,
        rates: Optional[dict] = None,
        max_attempts: int = 5,
        base_delay: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
        max_in_flight: int = 8,
    ):
        self.backend = backend
        self.model = model
        self.cache = cache
        self.ledger = ledger if ledger is not None else CostLedger()
        self.rates = rates
        self.max_attempts = max_attempts
        self.base_delay = base_delay
        self.sleep = sleep
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def with_ledger(self, ledger: CostLedger, backend=None) -> "LmClient":
        """Same cache and settings, separate accounting (one per task)."""
        other = LmClient(
            backend if backend is not None else self.backend,
            self.model,
            self.cache,
            ledger,
            self.rates,
            self.max_attempts,
            self.base_delay,
            self.sleep,
        )
        other._slots = self._slots
        return other

    def _fetch(self, req: LmRequest) -> LmResponse:
        for attempt in range(1, self.max_attempts + 1):
            try:
                with self._slots:
                    return self.backend.complete(req)
            except TransportError as e:
                if not e.retryable or attempt == self.max_attempts:
                    raise
                delay = self.base_delay * 2 ** (attempt - 1)
                log.warning("LM request failed (%s); retry %d in %.1fs", e, attempt, delay)
                self.sleep(delay)
        raise AssertionError("unreachable")  # pragma: no cover

    def complete(self, req: LmRequest, sample_index: int = 0) -> LmResponse:
        key = cache_key(req, sample_index)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return hit
        resp = self._fetch(req)
        self.ledger.charge(req.model, resp, self.rates)
        if self.cache is not None:
            self.cache.put(key, req, sample_index, resp)
        return resp


def cached_complete(client: LmClient, req: LmRequest, sample_index: int = 0) -> LmResponse:
    return client.complete(req, sample_index)


def sampling_temperature(n: int, temperature_multi: float = 0.7) -> float:
    return 0.0 if n == 1 else temperature_multi


def propose(
    client: LmClient,
    prompt: str,
    n: int,
    temperature: Optional[float] = None,
    seed: int = 0,
    max_tokens: int = RULE_MAX_TOKENS,
) -> list:
    """``n`` completions of ``prompt``. Greedy when ``n == 1``, otherwise 0.7
    unless ``temperature`` is given explicitly."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if temperature is None:
        temperature = sampling_temperature(n)
    req = LmRequest(client.model, prompt, temperature, max_tokens, seed)
    return [client.complete(req, i).text for i in range(n)]
