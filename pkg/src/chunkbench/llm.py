"""Chat-completion gateway for LLM-guided segmentation, plus a deterministic stub.

The HTTP gateway speaks the common chat-completion wire format
(POST {model, messages, temperature}) and layers a disk cache keyed by
hash(prompt, model) under transport retries, so reruns are free.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
from dataclasses import dataclass

from .errors import ConfigError, PreconditionError, TransportError
from .prompts import LUMBER_MARKER, PROPOSITION_MARKER

log = logging.getLogger(__name__)


@dataclass
class LlmRequest:
    prompt: str
    temperature: float = 0.0
    max_output_tokens: int = 512
    model_name: str = "stub"

    def __post_init__(self):
        if self.temperature != 0.0:
            raise PreconditionError("only temperature 0.0 is supported")


_NUMBERED_LINE = re.compile(r"^(\d+)\.\s", re.MULTILINE)


def split_top_level_and(s: str) -> list[str]:
    """Split on " and " outside any bracket nesting; drops empty pieces."""
    parts: list[str] = []
    depth = 0
    i = 0
    last = 0
    while i < len(s):
        c = s[i]
        if c in "([{":
            depth += 1
        elif c in ")]}":
            depth = max(0, depth - 1)
        elif depth == 0 and s.startswith(" and ", i):
            parts.append(s[last:i])
            last = i + 5
            i = last
            continue
        i += 1
    parts.append(s[last:])
    return [p for p in (x.strip() for x in parts) if p]


class StubLlm:
    """Deterministic stand-in for tests and desk-scale runs.

    Topic-shift prompts get the answer min(3, group size); decomposition
    prompts get the passage split at sentence boundaries and top-level
    " and " clauses, as a numbered list.
    """

    def complete(self, req: LlmRequest, fresh: bool = False) -> str:
        prompt = req.prompt
        if LUMBER_MARKER in prompt:
            numbers = [int(m.group(1)) for m in _NUMBERED_LINE.finditer(prompt)]
            group_size = max(numbers) if numbers else 1
            return str(min(3, group_size))
        if PROPOSITION_MARKER in prompt:
            _, _, passage = prompt.partition("Passage:\n")
            return self._decompose(passage.strip())
        return ""

    @staticmethod
    def _decompose(passage: str) -> str:
        from .segmentation import split_sentence_spans

        pieces: list[str] = []
        for start, end in split_sentence_spans(passage):
            pieces.extend(split_top_level_and(passage[start:end]))
        return "\n".join(f"{i}. {p}" for i, p in enumerate(pieces, start=1))


def _default_transport(url: str, payload: dict, headers: dict, timeout: float):
    import requests

    try:
        resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
    except requests.RequestException as exc:
        raise TransportError(f"LLM endpoint unreachable: {exc}") from exc
    return resp.status_code, resp.text


class HttpLlmGateway:
    """Retrying, caching client for a chat-completion endpoint."""

    def __init__(self, endpoint: str, model: str, api_key_env: str = "LLM_API_KEY",
                 cache_dir: str | None = None, max_in_flight: int = 4,
                 transport=None, backoff: float = 0.5, timeout: float = 120.0):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.cache_dir = cache_dir
        self.transport = transport or _default_transport
        self.backoff = backoff
        self.timeout = timeout
        self._gate = threading.Semaphore(max_in_flight)
        if cache_dir:
            os.makedirs(cache_dir, exist_ok=True)

    def _cache_path(self, prompt: str) -> str | None:
        if not self.cache_dir:
            return None
        key = hashlib.sha256(f"{self.model}\x00{prompt}".encode("utf-8")).hexdigest()
        return os.path.join(self.cache_dir, f"{key}.txt")

    def complete(self, req: LlmRequest, fresh: bool = False) -> str:
        path = self._cache_path(req.prompt)
        if path and not fresh and os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                return fh.read()
        text = self._request(req)
        if path:
            fd, tmp = tempfile.mkstemp(dir=self.cache_dir)
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, path)
        return text

    def _request(self, req: LlmRequest) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        last_error: Exception | None = None
        for attempt in range(3):  # initial try + 2 retries
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                with self._gate:
                    status, body = self.transport(self.endpoint, payload, headers,
                                                  self.timeout)
            except TransportError as exc:
                last_error = exc
                continue
            if 400 <= status < 500:
                raise ConfigError(f"LLM endpoint rejected request ({status}): "
                                  f"{body[:200]}")
            if status != 200:
                last_error = TransportError(f"LLM endpoint returned {status}")
                continue
            try:
                data = json.loads(body)
                return data["choices"][0]["message"]["content"]
            except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
                last_error = TransportError(f"malformed LLM response: {exc}")
                continue
        raise TransportError(f"LLM request failed after retries: {last_error}")
