"""Shared generators and fakes for the test suite."""

from __future__ import annotations

import numpy as np

from chunkbench.corpus import Document
from chunkbench.errors import TransportError
from chunkbench.tokenizer import count_tokens

LETTERS = "abcdefghijklmnopqrstuvwxyz"
SPICE_WORDS = ["café", "naïve", "Zürich", "résumé", "coöp"]


def word(rng: np.random.Generator) -> str:
    return "".join(LETTERS[rng.integers(26)]
                   for _ in range(int(rng.integers(2, 9))))


def vocabulary(rng: np.random.Generator, size: int = 300) -> list[str]:
    seen: dict[str, None] = {}
    while len(seen) < size:
        seen.setdefault(word(rng), None)
    return list(seen)


def sentence(rng: np.random.Generator, vocab: list[str],
             spice: bool = False) -> str:
    k = int(rng.integers(4, 13))
    words = [vocab[rng.integers(len(vocab))] for _ in range(k)]
    if spice and rng.random() < 0.3:
        words[rng.integers(len(words))] = SPICE_WORDS[rng.integers(
            len(SPICE_WORDS))]
    words[0] = words[0].capitalize()
    roll = rng.random()
    end = "." if roll < 0.8 else "?" if roll < 0.9 else "!" if roll < 0.97 \
        else "…"
    if spice and rng.random() < 0.1:
        return '"' + " ".join(words) + end + '"'
    return " ".join(words) + end


def paragraph(rng: np.random.Generator, vocab: list[str],
              spice: bool = False) -> str:
    return " ".join(sentence(rng, vocab, spice)
                    for _ in range(int(rng.integers(1, 6))))


def document_text(rng: np.random.Generator, vocab: list[str],
                  spice: bool = False) -> str:
    paras = [paragraph(rng, vocab, spice)
             for _ in range(int(rng.integers(1, 6)))]
    if spice:
        # blank and whitespace-only lines exercise the empty-paragraph rule
        if rng.random() < 0.4:
            paras.insert(int(rng.integers(len(paras) + 1)), "")
        if rng.random() < 0.3:
            paras.insert(int(rng.integers(len(paras) + 1)), "   ")
        if rng.random() < 0.3:
            paras.append("Dr. " + word(rng) + " met Mrs. " + word(rng) +
                         " at 3.14 o'clock. E.g. twice.")
    return "\n".join(paras)


def make_documents(n: int, seed: int = 0, spice: bool = False,
                   max_tokens: int | None = None) -> list[Document]:
    rng = np.random.default_rng(seed)
    vocab = vocabulary(rng)
    docs = []
    for i in range(n):
        text = document_text(rng, vocab, spice)
        while not text.strip():
            text = document_text(rng, vocab, spice)
        if max_tokens is not None:
            assert count_tokens(text) <= max_tokens, "fixture doc too long"
        docs.append(Document(doc_id=f"d{i:03d}", title=f"Doc {i}", text=text,
                             meta={}))
    return docs


class ScriptedLlm:
    """Replays canned completions; records every prompt it sees."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.prompts: list[str] = []
        self.fresh_flags: list[bool] = []

    def complete(self, request, fresh: bool = False) -> str:
        self.prompts.append(request.prompt)
        self.fresh_flags.append(fresh)
        if not self.replies:
            raise AssertionError("ScriptedLlm ran out of replies")
        reply = self.replies.pop(0)
        if isinstance(reply, BaseException):
            raise reply
        return reply


class AlwaysLlm:
    """Answers every prompt with the same string."""

    def __init__(self, text: str):
        self.text = text
        self.calls = 0

    def complete(self, request, fresh: bool = False) -> str:
        self.calls += 1
        return self.text


class DownLlm:
    """Transport failure on every call."""

    def __init__(self):
        self.calls = 0

    def complete(self, request, fresh: bool = False) -> str:
        self.calls += 1
        raise TransportError("llm endpoint unreachable")


class FakeResponse:
    def __init__(self, status_code: int, payload=None, text: str = ""):
        self.status_code = status_code
        self._payload = payload if payload is not None else {}
        self.text = text

    def json(self):
        if isinstance(self._payload, Exception):
            raise self._payload
        return self._payload


class FakeSession:
    """Stands in for requests.Session; routes by (method, path suffix)."""

    def __init__(self, handler):
        self.handler = handler
        self.requests: list[tuple[str, str, dict | None]] = []

    def request(self, method, url, json=None, timeout=None):
        self.requests.append((method, url, json))
        result = self.handler(method, url, json)
        if isinstance(result, BaseException):
            raise result
        return result
