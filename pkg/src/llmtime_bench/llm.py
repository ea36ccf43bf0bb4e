"""Completion providers: a deterministic mock, an HTTP client and a replay cache."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import threading
import time
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .errors import InvalidArgument, ProtocolError, ProviderUnavailable, RateLimited

logger = logging.getLogger(__name__)

DEFAULT_MODEL = "gpt-3.5-turbo-instruct"
DEFAULT_BASE_URL = "https://api.openai.com/v1"
DEFAULT_API_KEY_ENV = "OPENAI_API_KEY"
MAX_SAMPLES_PER_REQUEST = 20


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    model_name: str = DEFAULT_MODEL
    max_tokens: int = 256
    temperature: float = 0.7
    num_samples: int = 1
    stop_sequences: Tuple[str, ...] = ()
    want_logprobs: bool = False

    def __post_init__(self):
        object.__setattr__(self, "stop_sequences", tuple(self.stop_sequences))
        if not self.prompt:
            raise InvalidArgument("prompt must be nonempty")
        if int(self.max_tokens) != self.max_tokens or self.max_tokens < 1:
            raise InvalidArgument("max_tokens must be a positive integer")
        if not self.temperature >= 0:
            raise InvalidArgument("temperature must be nonnegative")
        if not 1 <= self.num_samples <= MAX_SAMPLES_PER_REQUEST:
            raise InvalidArgument(
                f"num_samples must lie in [1, {MAX_SAMPLES_PER_REQUEST}], got {self.num_samples}"
            )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stop_sequences"] = list(self.stop_sequences)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CompletionRequest":
        return cls(**d)


@dataclass(frozen=True)
class CompletionBatch:
    texts: Tuple[str, ...]
    logprob_sums: Optional[Tuple[float, ...]] = None
    provider_id: str = ""
    cached: bool = False

    def __post_init__(self):
        object.__setattr__(self, "texts", tuple(self.texts))
        if self.logprob_sums is not None:
            object.__setattr__(self, "logprob_sums", tuple(float(v) for v in self.logprob_sums))
            if len(self.logprob_sums) != len(self.texts):
                raise InvalidArgument("logprob_sums must align with texts")


def cache_key(request: CompletionRequest) -> str:
    """SHA-256 over the canonical JSON form of every request field."""
    payload = json.dumps(request.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def cut_at_stop(text: str, stops: Sequence[str]) -> str:
    cut = len(text)
    for s in stops:
        if s:
            i = text.find(s)
            if i != -1:
                cut = min(cut, i)
    return text[:cut]


# --- mock ---------------------------------------------------------------------

def _value_chunks(prompt: str) -> List[str]:
    chunks = [" ".join(c.split()) for c in prompt.split(",")]
    while chunks and not chunks[-1]:
        chunks.pop()
    return chunks


def _period(chunks: Sequence[str]) -> int:
    n = len(chunks)
    for k in range(1, n // 2 + 1):
        if all(chunks[i] == chunks[i + k] for i in range(n - k)):
            return k
    for k in range(1, n // 2 + 1):
        if chunks[n - k:] == chunks[n - 2 * k:n - k]:
            return k
    return 1


def _token_count(text: str) -> int:
    return sum(1 for ch in text if not ch.isspace())


def _limit_tokens(text: str, max_tokens: int) -> str:
    seen = 0
    for i, ch in enumerate(text):
        if not ch.isspace():
            seen += 1
            if seen > max_tokens:
                return text[:i].rstrip()
    return text


def repeat_last_period(prompt: str, max_tokens: int, sample_index: int = 0) -> str:
    """Continue the prompt's comma-separated values by repeating their shortest period.

    The period is the smallest ``k`` for which the whole sequence is
    ``k``-periodic, else the smallest ``k`` whose last two blocks agree, else 1.
    Tokens are the non-space characters; output stops after ``max_tokens``.
    """
    chunks = _value_chunks(prompt)
    if not chunks:
        return ""
    k = _period(chunks)
    block = chunks[len(chunks) - k:]
    parts = []
    used = 0
    j = 0
    while used < max_tokens:
        nxt = block[j % k]
        parts.append(nxt)
        used += _token_count(nxt) + 1
        j += 1
    return _limit_tokens(" " + " , ".join(parts) + " ,", max_tokens)


def echo_tail(n_values: int):
    """Rule that answers with the prompt's last ``n_values`` values, verbatim."""
    def rule(prompt: str, max_tokens: int, sample_index: int = 0) -> str:
        chunks = _value_chunks(prompt)[-n_values:]
        return _limit_tokens(" " + " , ".join(chunks), max_tokens)
    return rule


MockRule = Callable[[str, int, int], str]


class MockProvider:
    """Offline provider driven by a rule function and/or canned answers.

    ``canned`` maps a prompt to a list of answers, cycled when more samples
    are requested than listed. Other prompts go to ``rule``. The mock also
    scores continuations with a toy likelihood: each token agreeing with what
    ``rule`` would have produced costs ``log(0.9)``, any other ``log(0.01)``.
    """

    provider_id = "mock"

    def __init__(self, rule: Optional[MockRule] = repeat_last_period,
                 canned: Optional[Dict[str, Sequence[str]]] = None):
        self.rule = rule
        self.canned = {k: list(v) for k, v in (canned or {}).items()}
        self.calls = 0

    def complete(self, request: CompletionRequest) -> CompletionBatch:
        self.calls += 1
        if request.prompt in self.canned:
            answers = self.canned[request.prompt]
            texts = [answers[i % len(answers)] for i in range(request.num_samples)]
        elif self.rule is not None:
            texts = [self.rule(request.prompt, request.max_tokens, i) for i in range(request.num_samples)]
        else:
            raise ProtocolError("mock has no answer for this prompt")
        texts = [cut_at_stop(t, request.stop_sequences) for t in texts]
        sums = None
        if request.want_logprobs:
            sums = [_token_count(t) * math.log(0.9) for t in texts]
        return CompletionBatch(texts, sums, self.provider_id, False)

    def continuation_logprob(self, prompt: str, continuation: str) -> float:
        if self.rule is None:
            raise ProtocolError("mock without a rule cannot score continuations")
        given = [ch for ch in continuation if not ch.isspace()]
        expected = [ch for ch in self.rule(prompt, len(given), 0) if not ch.isspace()]
        expected += [""] * (len(given) - len(expected))
        return sum(math.log(0.9) if g == e else math.log(0.01) for g, e in zip(given, expected))


# --- http ---------------------------------------------------------------------

Transport = Callable[[str, Dict[str, str], bytes, float], Tuple[int, Dict[str, str], bytes]]


def urllib_transport(url: str, headers: Dict[str, str], body: bytes, timeout: float):
    req = urllib.request.Request(url, data=body, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, dict(resp.headers.items()), resp.read()
    except urllib.error.HTTPError as exc:
        return exc.code, dict(exc.headers.items()) if exc.headers else {}, exc.read() or b""


def _retry_after(headers: Dict[str, str]) -> Optional[float]:
    for k, v in headers.items():
        if k.lower() == "retry-after":
            try:
                return float(v)
            except ValueError:
                return None
    return None


class HttpProvider:
    """Client for an OpenAI-style ``/completions`` endpoint.

    Transport failures and 5xx responses are retried with exponential backoff
    up to ``max_attempts`` attempts; 429 responses are retried too, waiting at
    least the server's ``Retry-After``. At most ``max_concurrency`` requests
    are in flight at once across threads sharing the instance.
    """

    def __init__(self, base_url: str = DEFAULT_BASE_URL, api_key_env: str = DEFAULT_API_KEY_ENV,
                 max_attempts: int = 3, backoff: float = 1.0, max_backoff: float = 60.0,
                 timeout: float = 60.0, max_concurrency: int = 4,
                 transport: Optional[Transport] = None, sleep=time.sleep):
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.max_backoff = max_backoff
        self.timeout = timeout
        self.transport = transport or urllib_transport
        self.sleep = sleep
        self._slots = threading.BoundedSemaphore(max_concurrency)

    @property
    def provider_id(self) -> str:
        return f"http:{self.base_url}"

    def payload(self, request: CompletionRequest) -> dict:
        return {
            "model": request.model_name,
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "n": request.num_samples,
            "stop": list(request.stop_sequences) or None,
            "logprobs": 1 if request.want_logprobs else None,
        }

    def _headers(self) -> Dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, request: CompletionRequest) -> CompletionBatch:
        body = json.dumps(self.payload(request)).encode("utf-8")
        url = f"{self.base_url}/completions"
        last_error: Exception = ProviderUnavailable("no attempt made")
        for attempt in range(1, self.max_attempts + 1):
            delay = min(self.backoff * 2 ** (attempt - 1), self.max_backoff)
            try:
                with self._slots:
                    status, headers, raw = self.transport(url, self._headers(), body, self.timeout)
            except OSError as exc:
                last_error = ProviderUnavailable(f"transport failure: {exc}")
                logger.warning("attempt %d/%d failed: %s", attempt, self.max_attempts, exc)
            else:
                if status == 200:
                    return self._parse(raw, request, attempt)
                if status in (403, 429):
                    retry_after = _retry_after(headers)
                    last_error = RateLimited(f"provider refused request (HTTP {status})", retry_after)
                    if status == 403:
                        raise last_error
                    if retry_after is not None:
                        delay = max(delay, retry_after)
                elif status >= 500:
                    last_error = ProviderUnavailable(f"server error HTTP {status}")
                else:
                    raise ProtocolError(f"HTTP {status}: {raw[:200]!r}")
                logger.warning("attempt %d/%d: %s", attempt, self.max_attempts, last_error)
            if attempt < self.max_attempts:
                self.sleep(delay)
        raise last_error

    def _parse(self, raw: bytes, request: CompletionRequest, attempts: int) -> CompletionBatch:
        try:
            doc = json.loads(raw)
            choices = sorted(doc["choices"], key=lambda c: c.get("index", 0))
            texts = [cut_at_stop(str(c["text"]), request.stop_sequences) for c in choices]
            sums = None
            if request.want_logprobs:
                sums = [
                    float(sum(v for v in c["logprobs"]["token_logprobs"] if v is not None))
                    for c in choices
                ]
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed completion response: {exc}") from exc
        if not texts:
            raise ProtocolError("completion response has no choices")
        return CompletionBatch(texts, sums, f"{self.provider_id}#attempts={attempts}", False)


# --- record / replay ----------------------------------------------------------

class CachingProvider:
    """Record/replay wrapper: one JSON file per request key under ``cache_dir``.

    With ``inner=None`` the cache is replay-only and a miss raises
    :class:`ProviderUnavailable`.
    """

    def __init__(self, inner, cache_dir, clock: Callable[[], datetime] = None):
        self.inner = inner
        self.cache_dir = Path(cache_dir)
        self.clock = clock or (lambda: datetime.now(timezone.utc))
        self._locks: Dict[str, threading.Lock] = {}
        self._guard = threading.Lock()
        self.hits = 0
        self.misses = 0

    @property
    def provider_id(self) -> str:
        inner = getattr(self.inner, "provider_id", "none")
        return f"cache({inner})"

    def path_for(self, key: str) -> Path:
        return self.cache_dir / f"{key}.json"

    def _lock(self, key: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(key, threading.Lock())

    def complete(self, request: CompletionRequest) -> CompletionBatch:
        key = cache_key(request)
        path = self.path_for(key)
        with self._lock(key):
            if path.exists():
                self.hits += 1
                return read_cache_entry(path)
            self.misses += 1
            if self.inner is None:
                raise ProviderUnavailable(f"replay cache miss for {key}")
            batch = self.inner.complete(request)
            write_cache_entry(path, key, request, batch, self.clock())
            return batch


def write_cache_entry(path: Path, key: str, request: CompletionRequest,
                      batch: CompletionBatch, created_at: datetime) -> None:
    doc = {
        "key": key,
        "request": request.to_dict(),
        "response": {
            "texts": list(batch.texts),
            "logprob_sums": list(batch.logprob_sums) if batch.logprob_sums is not None else None,
        },
        "created_at": created_at.isoformat(),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def read_cache_entry(path: Path) -> CompletionBatch:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        response = doc["response"]
        return CompletionBatch(response["texts"], response.get("logprob_sums"), "cache", True)
    except (ValueError, KeyError, TypeError) as exc:
        raise ProtocolError(f"corrupt cache entry {path}: {exc}") from exc


@dataclass
class ProviderSettings:
    """How the bench builds a provider: ``kind`` is ``"mock"`` or ``"http"``."""

    kind: str = "mock"
    mock_rule: str = "repeat_last_period"
    base_url: str = DEFAULT_BASE_URL
    api_key_env: str = DEFAULT_API_KEY_ENV
    max_attempts: int = 3
    max_concurrency: int = 4


MOCK_RULES = {"repeat_last_period": repeat_last_period}


def build_provider(settings: ProviderSettings, cache_dir=None):
    if settings.kind == "mock":
        try:
            rule = MOCK_RULES[settings.mock_rule]
        except KeyError:
            raise InvalidArgument(f"unknown mock rule {settings.mock_rule!r}") from None
        provider = MockProvider(rule)
    elif settings.kind == "http":
        provider = HttpProvider(settings.base_url, settings.api_key_env,
                                max_attempts=settings.max_attempts,
                                max_concurrency=settings.max_concurrency)
    elif settings.kind == "replay":
        provider = None
    else:
        raise InvalidArgument(f"unknown provider kind {settings.kind!r}")
    if cache_dir is not None:
        return CachingProvider(provider, cache_dir)
    if provider is None:
        raise InvalidArgument("replay provider needs a cache directory")
    return provider
