"""Chunk- and token-level embeddings: deterministic reference backend + remote.

The reference backend hashes each token to a unit vector and mixes context
exponentially: vector_i = normalize(sum_j lambda^{|i-j|} * h(t_j)). lambda=0
reduces to context-free token vectors, which is what makes the pre-embedding
vs contextualized orderings directly comparable in tests.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, PreconditionError
from .tokenizer import TokenMap, tokenize_builtin


@dataclass
class EmbeddingVector:
    dims: int
    values: np.ndarray
    normalized: bool = False
    zero: bool = False  # normalization hit an (exceptional) zero vector


@dataclass
class TokenEmbeddings:
    token_map: TokenMap
    vectors: np.ndarray  # shape (n_tokens, dims)
    window_id: int = 0


@dataclass
class EmbedderSpec:
    backend: str = "reference"  # reference | remote
    dims: int = 64
    context_mix_lambda: float = 0.5
    context_window_tokens: int = 8192
    model_name: str = ""
    endpoint: str = ""
    seed: int = 0

    def validate(self) -> None:
        if self.backend not in ("reference", "remote"):
            raise ConfigError(f"unknown embedding backend {self.backend!r}")
        if self.dims < 8:
            raise ConfigError("dims must be >= 8")
        if self.context_window_tokens < 16:
            raise ConfigError("context_window_tokens must be >= 16")
        if not (0.0 <= self.context_mix_lambda < 1.0):
            raise ConfigError("context_mix_lambda must lie in [0, 1)")
        if self.backend == "remote" and not self.model_name:
            raise ConfigError("remote backend needs model_name")


def normalize(values: np.ndarray) -> tuple[np.ndarray, bool]:
    n = float(np.linalg.norm(values))
    if n == 0.0:
        return values, True
    return values / n, False


class ReferenceEmbedder:
    """Pure function of (text, dims, lambda, seed); no I/O."""

    def __init__(self, spec: EmbedderSpec):
        spec.validate()
        self.spec = spec
        self._seed_key = struct.pack("<Q", spec.seed & 0xFFFFFFFFFFFFFFFF)
        self._base_cache: dict[str, np.ndarray] = {}

    def base_vector(self, token_text: str) -> np.ndarray:
        """h(t): unit vector with components hashed from (seed, t, k)."""
        v = self._base_cache.get(token_text)
        if v is not None:
            return v
        raw = np.empty(self.spec.dims, dtype=np.float64)
        tb = token_text.encode("utf-8")
        for k in range(self.spec.dims):
            digest = hashlib.blake2b(tb + b"\x00" + struct.pack("<I", k),
                                     key=self._seed_key, digest_size=8).digest()
            u = int.from_bytes(digest, "little")
            raw[k] = 2.0 * (u / 0xFFFFFFFFFFFFFFFF) - 1.0
        v, zero = normalize(raw)
        if zero:  # astronomically unlikely; keep the function total
            v = np.zeros(self.spec.dims)
            v[0] = 1.0
        self._base_cache[token_text] = v
        return v

    def embed_tokens(self, text: str) -> TokenEmbeddings:
        tm = tokenize_builtin(text)
        if len(tm.tokens) > self.spec.context_window_tokens:
            raise PreconditionError(
                f"input has {len(tm.tokens)} tokens, over the "
                f"{self.spec.context_window_tokens}-token window; partition first")
        if not tm.tokens:
            return TokenEmbeddings(token_map=tm,
                                   vectors=np.empty((0, self.spec.dims)))
        H = np.stack([self.base_vector(t.text) for t in tm.tokens])
        lam = self.spec.context_mix_lambda
        if lam == 0.0:
            # base vectors are already unit; renormalizing would only add noise
            return TokenEmbeddings(token_map=tm, vectors=H)
        F = np.empty_like(H)
        B = np.empty_like(H)
        F[0] = H[0]
        for i in range(1, len(H)):
            F[i] = H[i] + lam * F[i - 1]
        B[-1] = H[-1]
        for i in range(len(H) - 2, -1, -1):
            B[i] = H[i] + lam * B[i + 1]
        S = F + B - H
        norms = np.linalg.norm(S, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        return TokenEmbeddings(token_map=tm, vectors=S / norms)

    def embed_chunk(self, text: str) -> EmbeddingVector:
        if not text:
            raise PreconditionError("cannot embed empty text")
        tm = tokenize_builtin(text)
        if not tm.tokens:
            raise PreconditionError(f"text has no tokens: {text!r}")
        W = self.spec.context_window_tokens
        if len(tm.tokens) <= W:
            return pool_vectors(self.embed_tokens(text).vectors)
        # over-window chunk: contextualize per window, pool across all tokens
        data = text.encode("utf-8")
        pieces = []
        for lo in range(0, len(tm.tokens), W):
            hi = min(lo + W, len(tm.tokens))
            piece = data[tm.tokens[lo].start:tm.tokens[hi - 1].end]
            pieces.append(self.embed_tokens(piece.decode("utf-8")).vectors)
        return pool_vectors(np.vstack(pieces))

    def embed_query(self, text: str) -> EmbeddingVector:
        return self.embed_chunk(text)

    def embed_chunks(self, texts: list[str]) -> list[EmbeddingVector]:
        return [self.embed_chunk(t) for t in texts]


def pool_vectors(vectors: np.ndarray) -> EmbeddingVector:
    """Mean of token vectors, L2-normalized. Shared by both orderings."""
    mean = vectors.mean(axis=0)
    values, zero = normalize(mean)
    return EmbeddingVector(dims=vectors.shape[1], values=values,
                           normalized=True, zero=zero)


class RemoteEmbedder:
    """Sidecar-backed embeddings; bounded in-flight batches, order restored."""

    BATCH = 32
    MAX_IN_FLIGHT = 8

    def __init__(self, spec: EmbedderSpec, client=None):
        spec.validate()
        if client is None:
            from .sidecar_client import SidecarClient

            client = SidecarClient(spec.endpoint)
        self.spec = spec
        self.client = client
        self._dims: int | None = None

    @property
    def dims(self) -> int:
        if self._dims is None:
            self._dims = int(self.client.model_info(self.spec.model_name)["dims"])
        return self._dims

    def _embed_batching(self, texts: list[str], input_type: str) -> list[EmbeddingVector]:
        for i, t in enumerate(texts):
            if not t:
                raise PreconditionError(f"cannot embed empty text (item {i})")
        batches = [texts[i:i + self.BATCH] for i in range(0, len(texts), self.BATCH)]
        model = self.spec.model_name

        def call(batch: list[str]) -> np.ndarray:
            return self.client.embeddings(model, batch, input_type)

        if len(batches) == 1:
            results = [call(batches[0])]
        else:
            with ThreadPoolExecutor(max_workers=self.MAX_IN_FLIGHT) as pool:
                results = list(pool.map(call, batches))
        out: list[EmbeddingVector] = []
        for matrix in results:
            for row in matrix:
                out.append(EmbeddingVector(dims=len(row), values=np.asarray(row),
                                           normalized=True))
        return out

    def embed_chunk(self, text: str) -> EmbeddingVector:
        return self._embed_batching([text], "passage")[0]

    def embed_query(self, text: str) -> EmbeddingVector:
        return self._embed_batching([text], "query")[0]

    def embed_chunks(self, texts: list[str]) -> list[EmbeddingVector]:
        return self._embed_batching(texts, "passage")


def build_embedder(spec: EmbedderSpec):
    spec.validate()
    if spec.backend == "reference":
        return ReferenceEmbedder(spec)
    return RemoteEmbedder(spec)


# --- persisted artifact --------------------------------------------------------

def write_vectors(path: str, ids: list[str], matrix: np.ndarray, *, backend: str,
                  model: str, context_mix_lambda: float, ordering: str) -> None:
    """Binary little-endian float32 rows after one JSON header line."""
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise ValueError("matrix rows must align with ids")
    header = {
        "dims": int(matrix.shape[1]),
        "count": int(matrix.shape[0]),
        "backend": backend,
        "model": model,
        "lambda": context_mix_lambda,
        "ordering": ordering,
        "ids": list(ids),
    }
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(json.dumps(header, ensure_ascii=False, sort_keys=True,
                            separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())
    os.replace(tmp, path)


def read_vectors(path: str) -> tuple[list[str], np.ndarray, dict]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        raw = fh.read()
    count, dims = header["count"], header["dims"]
    expect = count * dims * 4
    if len(raw) != expect:
        raise ValueError(f"{path}: expected {expect} payload bytes, got {len(raw)}")
    matrix = np.frombuffer(raw, dtype="<f4").reshape(count, dims)
    return header["ids"], matrix, header
