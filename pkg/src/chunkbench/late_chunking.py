"""Contextualized (post-embedding) ordering: windows, token mapping, pooling.

Documents are embedded token-first in greedy context windows; each chunk's
vector is the normalized mean of the token vectors inside its span, pooled
across windows when a chunk straddles a boundary.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass

import numpy as np

from .corpus import Document
from .embedding import EmbeddingVector, ReferenceEmbedder, TokenEmbeddings, pool_vectors
from .errors import ConfigError, PreconditionError
from .segmentation import Chunk
from .textutil import ByteText
from .tokenizer import Token, TokenMap, tokenize_builtin


@dataclass
class Window:
    window_id: int
    first_token: int  # [first_token, last_token) into the document TokenMap
    last_token: int
    start: int  # byte span covered by those tokens
    end: int


@dataclass
class ChunkTokenSpan:
    chunk_id: str
    first: int
    last: int
    empty: bool = False


def partition_windows(token_map: TokenMap, context_window_tokens: int) -> list[Window]:
    """Greedy fill: every window except the last holds exactly W tokens."""
    if context_window_tokens < 1:
        raise ConfigError("context window must be >= 1 token")
    tokens = token_map.tokens
    windows: list[Window] = []
    for first in range(0, len(tokens), context_window_tokens):
        last = min(first + context_window_tokens, len(tokens))
        windows.append(Window(window_id=len(windows), first_token=first,
                              last_token=last, start=tokens[first].start,
                              end=tokens[last - 1].end))
    return windows


def map_chunk_to_tokens(chunk: Chunk, token_map: TokenMap) -> ChunkTokenSpan:
    """All tokens whose byte span intersects the chunk's span (half-open)."""
    starts = [t.start for t in token_map.tokens]
    ends = [t.end for t in token_map.tokens]
    first = bisect_right(ends, chunk.start)  # first token with end > chunk.start
    last = bisect_left(starts, chunk.end)  # first token with start >= chunk.end
    if first >= last:
        return ChunkTokenSpan(chunk_id=chunk.chunk_id, first=first, last=first,
                              empty=True)
    return ChunkTokenSpan(chunk_id=chunk.chunk_id, first=first, last=last)


def pool_span(window_embeddings: list[TokenEmbeddings], windows: list[Window],
              span: ChunkTokenSpan) -> EmbeddingVector:
    """Mean of the span's token vectors across windows, then L2-normalized."""
    if span.empty:
        raise PreconditionError(f"chunk {span.chunk_id} maps to zero tokens")
    pieces: list[np.ndarray] = []
    for w, te in zip(windows, window_embeddings):
        lo = max(span.first, w.first_token)
        hi = min(span.last, w.last_token)
        if lo < hi:
            pieces.append(te.vectors[lo - w.first_token:hi - w.first_token])
    if not pieces:
        raise PreconditionError(f"span of chunk {span.chunk_id} not covered by "
                                "the given windows")
    rows = pieces[0] if len(pieces) == 1 else np.vstack(pieces)
    return pool_vectors(rows)


def _reference_windows(doc: Document, embedder: ReferenceEmbedder):
    tm = tokenize_builtin(doc.text)
    windows = partition_windows(tm, embedder.spec.context_window_tokens)
    bt = ByteText(doc.text)
    embedded: list[TokenEmbeddings] = []
    for w in windows:
        te = embedder.embed_tokens(bt.slice(w.start, w.end))
        if len(te.token_map.tokens) != w.last_token - w.first_token:
            raise PreconditionError(
                f"window {w.window_id} of {doc.doc_id} re-tokenized to "
                f"{len(te.token_map.tokens)} tokens, expected "
                f"{w.last_token - w.first_token}")
        shifted = TokenMap(
            tokens=[Token(t.text, t.start + w.start, t.end + w.start)
                    for t in te.token_map.tokens],
            source_len=tm.source_len)
        embedded.append(TokenEmbeddings(token_map=shifted, vectors=te.vectors,
                                        window_id=w.window_id))
    return tm, windows, embedded


def _remote_windows(doc: Document, embedder):
    pieces = embedder.client.windowed_token_embeddings(embedder.spec.model_name,
                                                       doc.text)
    tokens: list[Token] = []
    windows: list[Window] = []
    embedded: list[TokenEmbeddings] = []
    source_len = len(doc.text.encode("utf-8"))
    for toks, offsets, matrix in pieces:
        first = len(tokens)
        tokens.extend(Token(t, s, e) for t, (s, e) in zip(toks, offsets))
        w = Window(window_id=len(windows), first_token=first,
                   last_token=len(tokens), start=offsets[0][0], end=offsets[-1][1])
        windows.append(w)
        embedded.append(TokenEmbeddings(
            token_map=TokenMap(tokens=tokens[first:], source_len=source_len),
            vectors=matrix, window_id=w.window_id))
    return TokenMap(tokens=tokens, source_len=source_len), windows, embedded


def contextualized_embed_document(doc: Document, chunks: list[Chunk],
                                  embedder) -> dict[str, EmbeddingVector]:
    """Window-partition the document, embed tokens, pool per chunk span.

    Output preserves chunk order. Proposition chunks pool over their source
    paragraph spans, which is what their char_span already holds.
    """
    if not chunks:
        return {}
    if isinstance(embedder, ReferenceEmbedder):
        tm, windows, embedded = _reference_windows(doc, embedder)
    else:
        tm, windows, embedded = _remote_windows(doc, embedder)
    out: dict[str, EmbeddingVector] = {}
    pooled_cache: dict[tuple[int, int], EmbeddingVector] = {}
    for chunk in chunks:
        span = map_chunk_to_tokens(chunk, tm)
        if span.empty:
            raise PreconditionError(f"chunk {chunk.chunk_id} contains no tokens")
        key = (span.first, span.last)
        vec = pooled_cache.get(key)
        if vec is None:
            vec = pool_span(embedded, windows, span)
            pooled_cache[key] = vec
        out[chunk.chunk_id] = vec
    return out
