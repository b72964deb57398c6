"""HTTP client for the embedding sidecar.

Endpoints consumed: GET /v1/models, POST /v1/token_embeddings,
POST /v1/embeddings. Long texts are tokenized window by window with an
adaptive byte budget, since the token endpoint is context-window bounded.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import ConfigError, PreconditionError, TransportError
from .tokenizer import Token, TokenMap

log = logging.getLogger(__name__)


class SidecarClient:
    def __init__(self, endpoint: str, timeout: float = 300.0, session=None):
        if not endpoint:
            raise ConfigError("sidecar endpoint not configured")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        if session is None:
            import requests

            session = requests.Session()
        self.session = session
        self._models: dict[str, dict] | None = None

    def _request(self, method: str, path: str, payload: dict | None = None):
        import requests

        url = f"{self.endpoint}{path}"
        try:
            resp = self.session.request(method, url, json=payload,
                                        timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"sidecar unreachable at {url}: {exc}") from exc
        if resp.status_code == 404:
            raise ConfigError(f"sidecar: unknown resource/model ({url})")
        if resp.status_code == 413:
            raise PreconditionError("sidecar: input exceeds the model context window")
        if resp.status_code != 200:
            raise TransportError(f"sidecar returned {resp.status_code}: "
                                 f"{resp.text[:200]}")
        return resp.json()

    def models(self) -> dict[str, dict]:
        if self._models is None:
            data = self._request("GET", "/v1/models")
            self._models = {m["name"]: m for m in data["models"]}
        return self._models

    def model_info(self, model: str) -> dict:
        info = self.models().get(model)
        if info is None:
            raise ConfigError(f"sidecar does not serve model {model!r}")
        return info

    def token_embeddings(self, model: str, text: str):
        """Returns (tokens, offsets, matrix) for one in-window text."""
        data = self._request("POST", "/v1/token_embeddings",
                             {"model": model, "text": text})
        offsets = [tuple(o) for o in data["offsets"]]
        matrix = np.asarray(data["vectors"], dtype=np.float64)
        if matrix.size == 0:
            matrix = matrix.reshape(0, data["dims"])
        return data["tokens"], offsets, matrix

    def embeddings(self, model: str, texts: list[str],
                   input_type: str | None = None) -> np.ndarray:
        payload: dict = {"model": model, "texts": texts}
        if input_type:
            payload["input_type"] = input_type
        data = self._request("POST", "/v1/embeddings", payload)
        errors = data.get("errors") or [None] * len(texts)
        for i, err in enumerate(errors):
            if err:
                raise ConfigError(f"sidecar rejected item {i}: "
                                  f"{err.get('status')} {err.get('message')}")
        return np.asarray(data["vectors"], dtype=np.float64)

    # --- long-text tokenization -------------------------------------------

    def windowed_token_embeddings(self, model: str, text: str):
        """Tokenize + embed arbitrarily long text as a list of near-full windows.

        Returns [(tokens, offsets, matrix)] with offsets absolute into `text`'s
        UTF-8 bytes. Window cuts retreat to whitespace where possible; the
        byte budget adapts to the observed bytes-per-token ratio.
        """
        info = self.model_info(model)
        window = int(info["context_window_tokens"])
        data = text.encode("utf-8")
        out = []
        cursor = 0
        bpt = 4.0  # bytes per token, refined as windows come back
        while cursor < len(data):
            budget = max(8, int((window - 8) * bpt))
            attempt = 0
            while True:
                end = min(len(data), cursor + budget)
                if end < len(data):
                    while end > cursor and (data[end] & 0xC0) == 0x80:
                        end -= 1  # never split a codepoint
                    cut = max(data.rfind(b" ", cursor + 1, end),
                              data.rfind(b"\n", cursor + 1, end))
                    if cut > cursor:
                        end = cut
                piece = data[cursor:end].decode("utf-8")
                try:
                    tokens, offsets, matrix = self.token_embeddings(model, piece)
                    break
                except PreconditionError:
                    attempt += 1
                    if attempt > 8:
                        raise
                    budget = max(8, budget // 2)
                    bpt = max(0.25, bpt / 2)
            if tokens:
                base = cursor
                offsets = [(base + s, base + e) for s, e in offsets]
                out.append((tokens, offsets, matrix))
                bpt = max(0.5, (end - cursor) / max(1, len(tokens)))
            cursor = end if end > cursor else cursor + 1
        return out

    def token_map(self, model: str, text: str) -> TokenMap:
        tokens: list[Token] = []
        for toks, offsets, _ in self.windowed_token_embeddings(model, text):
            tokens.extend(Token(t, s, e) for t, (s, e) in zip(toks, offsets))
        return TokenMap(tokens=tokens, source_len=len(text.encode("utf-8")))
