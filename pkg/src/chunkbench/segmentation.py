"""The six segmentation methods, each mapping a Document to ordered Chunks.

Chunks carry half-open byte spans into the normalized document text. All
methods except proposition are span-preserving: chunk.text equals the byte
slice of the document at its span.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import asdict, dataclass, field

import numpy as np

from .corpus import Document
from .errors import TransportError
from .llm import LlmRequest
from .prompts import load_prompt
from .textutil import ByteText
from .tokenizer import TokenizerScheme, count_tokens, tokenize

log = logging.getLogger(__name__)

METHODS = ("paragraph", "fixed", "sentence", "semantic", "proposition", "lumber")


@dataclass
class Chunk:
    chunk_id: str
    doc_id: str
    index: int
    start: int  # byte offsets into the document text
    end: int
    text: str
    method: str
    generated_text: bool = False

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass
class ChunkerConfig:
    fixed_size_tokens: int = 256
    sentences_per_chunk: int = 5
    semantic_percentile: float = 95.0
    lumber_token_budget: int = 550
    scheme: TokenizerScheme = field(default_factory=TokenizerScheme)

    def validate(self) -> None:
        if self.fixed_size_tokens < 1 or self.sentences_per_chunk < 1 \
                or self.lumber_token_budget < 1:
            raise ValueError("chunker sizes must be positive")
        if not (0.0 < self.semantic_percentile < 100.0):
            raise ValueError("semantic_percentile must lie in (0, 100)")


@dataclass
class ChunkStats:
    proposition_fallbacks: int = 0
    lumber_fallbacks: int = 0


def _mk(doc_id: str, method: str, index: int, start: int, end: int, text: str,
        generated: bool = False) -> Chunk:
    return Chunk(chunk_id=f"{doc_id}#{method}#{index}", doc_id=doc_id, index=index,
                 start=start, end=end, text=text, method=method,
                 generated_text=generated)


# --- paragraph ---------------------------------------------------------------

def paragraph_byte_spans(text: str) -> list[tuple[int, int]]:
    """Byte spans of newline-delimited segments, dropping whitespace-only ones.

    '\\n' is one byte in UTF-8 and never part of a multibyte sequence, so the
    split can run directly on the encoded text.
    """
    data = text.encode("utf-8")
    spans: list[tuple[int, int]] = []
    start = 0
    while True:
        nl = data.find(b"\n", start)
        end = nl if nl >= 0 else len(data)
        if end > start and data[start:end].decode("utf-8").strip():
            spans.append((start, end))
        if nl < 0:
            break
        start = nl + 1
    return spans


def chunk_paragraph(doc: Document) -> list[Chunk]:
    bt = ByteText(doc.text)
    return [_mk(doc.doc_id, "paragraph", i, s, e, bt.slice(s, e))
            for i, (s, e) in enumerate(paragraph_byte_spans(doc.text))]


# --- fixed-size --------------------------------------------------------------

def chunk_fixed(doc: Document, cfg: ChunkerConfig) -> list[Chunk]:
    cfg.validate()
    tm = tokenize(doc.text, cfg.scheme)
    bt = ByteText(doc.text)
    size = cfg.fixed_size_tokens
    chunks: list[Chunk] = []
    for i in range(0, len(tm.tokens), size):
        group = tm.tokens[i:i + size]
        start, end = group[0].start, group[-1].end
        chunks.append(_mk(doc.doc_id, "fixed", len(chunks), start, end,
                          bt.slice(start, end)))
    return chunks


# --- sentence ----------------------------------------------------------------

ABBREVIATIONS = frozenset(
    {"mr.", "mrs.", "dr.", "prof.", "st.", "vs.", "e.g.", "i.e.", "etc."})

_SENTENCE_END = re.compile(r"[.!?…][\"'”’»)\]\}]*")
_OPENERS = "\"'“‘«([{"


def split_sentence_spans(text: str) -> list[tuple[int, int]]:
    """Codepoint spans of sentences, trimmed to non-whitespace extents.

    Boundary: a terminator (. ! ? …) plus optional closing quotes/brackets,
    followed by whitespace and then an uppercase letter or digit; terminators
    ending an abbreviation from the fixed exception list do not split.
    """
    boundaries: list[int] = []
    for m in _SENTENCE_END.finditer(text):
        j = m.end()
        if j >= len(text) or not text[j].isspace():
            continue
        k = j
        while k < len(text) and text[k].isspace():
            k += 1
        if k >= len(text) or not (text[k].isupper() or text[k].isdigit()):
            continue
        if text[m.start()] == ".":
            w = m.start()
            while w > 0 and not text[w - 1].isspace():
                w -= 1
            word = text[w:m.start() + 1].lower().lstrip(_OPENERS)
            if word in ABBREVIATIONS:
                continue
        boundaries.append(j)

    spans: list[tuple[int, int]] = []
    prev = 0
    for b in boundaries + [len(text)]:
        s, e = prev, b
        while s < e and text[s].isspace():
            s += 1
        while e > s and text[e - 1].isspace():
            e -= 1
        if s < e:
            spans.append((s, e))
        prev = b
    return spans


def chunk_sentence(doc: Document, cfg: ChunkerConfig) -> list[Chunk]:
    cfg.validate()
    sentences = split_sentence_spans(doc.text)
    bt = ByteText(doc.text)
    chunks: list[Chunk] = []
    for i in range(0, len(sentences), cfg.sentences_per_chunk):
        group = sentences[i:i + cfg.sentences_per_chunk]
        start, end = bt.to_byte(group[0][0]), bt.to_byte(group[-1][1])
        chunks.append(_mk(doc.doc_id, "sentence", len(chunks), start, end,
                          bt.slice(start, end)))
    return chunks


# --- semantic ----------------------------------------------------------------

def chunk_semantic(doc: Document, cfg: ChunkerConfig, embedder) -> list[Chunk]:
    """Boundary between adjacent sentences wherever their embedding distance
    strictly exceeds the configured percentile of all adjacent distances."""
    cfg.validate()
    sentences = split_sentence_spans(doc.text)
    bt = ByteText(doc.text)
    if not sentences:
        return []
    if len(sentences) == 1:
        s, e = sentences[0]
        start, end = bt.to_byte(s), bt.to_byte(e)
        return [_mk(doc.doc_id, "semantic", 0, start, end, bt.slice(start, end))]

    vectors = [np.asarray(embedder.embed_chunk(doc.text[s:e]).values, dtype=float)
               for s, e in sentences]
    dists = np.array([1.0 - float(np.dot(vectors[i], vectors[i + 1]))
                      for i in range(len(vectors) - 1)])
    threshold = float(np.percentile(dists, cfg.semantic_percentile))

    chunks: list[Chunk] = []
    group_start = 0
    for i in range(len(sentences)):
        last = i == len(sentences) - 1
        if last or dists[i] > threshold:
            s, e = sentences[group_start][0], sentences[i][1]
            start, end = bt.to_byte(s), bt.to_byte(e)
            chunks.append(_mk(doc.doc_id, "semantic", len(chunks), start, end,
                              bt.slice(start, end)))
            group_start = i + 1
    return chunks


# --- proposition -------------------------------------------------------------

_LIST_ITEM = re.compile(r"^\s*\d+[.)]\s*(.*\S)\s*$", re.MULTILINE)


def parse_numbered_list(raw: str) -> list[str]:
    return [m.group(1) for m in _LIST_ITEM.finditer(raw)]


def chunk_proposition(doc: Document, llm, stats: ChunkStats | None = None) -> list[Chunk]:
    """LLM decomposition of each paragraph into standalone propositions.

    Proposition chunks keep the source paragraph's span (generated_text=True);
    output that stays unparseable after 2 re-prompts falls back to the
    paragraph itself.
    """
    template = load_prompt("proposition")
    bt = ByteText(doc.text)
    chunks: list[Chunk] = []
    for start, end in paragraph_byte_spans(doc.text):
        para = bt.slice(start, end)
        props: list[str] | None = None
        for attempt in range(3):
            raw = llm.complete(LlmRequest(prompt=template.format(paragraph=para)),
                               fresh=attempt > 0)
            parsed = parse_numbered_list(raw)
            if parsed:
                props = parsed
                break
        if props is None:
            if stats is not None:
                stats.proposition_fallbacks += 1
            log.warning("proposition output unparseable for %s [%d,%d); "
                        "falling back to the paragraph", doc.doc_id, start, end)
            chunks.append(_mk(doc.doc_id, "proposition", len(chunks), start, end,
                              para))
            continue
        for prop in props:
            chunks.append(_mk(doc.doc_id, "proposition", len(chunks), start, end,
                              prop, generated=True))
    return chunks


# --- lumber ------------------------------------------------------------------

_FIRST_INT = re.compile(r"-?\d+")


def chunk_lumber(doc: Document, cfg: ChunkerConfig, llm,
                 stats: ChunkStats | None = None) -> list[Chunk]:
    """Iterative topic-shift segmentation over paragraph groups.

    Paragraphs accumulate until the token budget is reached; the LLM names the
    first paragraph of the group whose content shifts (1-based), which starts
    the next chunk. An answer of 1 or out of range, an unparseable answer, or
    a transport failure emits the whole group as one chunk, guaranteeing
    progress.
    """
    cfg.validate()
    template = load_prompt("lumber")
    bt = ByteText(doc.text)
    paras = paragraph_byte_spans(doc.text)
    texts = [bt.slice(s, e) for s, e in paras]
    tok_counts = [count_tokens(t, cfg.scheme) for t in texts]

    chunks: list[Chunk] = []
    cursor = 0
    while cursor < len(paras):
        i = cursor
        cum = 0
        while i < len(paras):
            cum += tok_counts[i]
            i += 1
            if cum >= cfg.lumber_token_budget:
                break
        group = list(range(cursor, i))
        numbered = "\n\n".join(f"{k + 1}. {texts[g]}" for k, g in enumerate(group))
        answer: int | None = None
        try:
            raw = llm.complete(LlmRequest(prompt=template.format(paragraphs=numbered),
                                          max_output_tokens=8))
            m = _FIRST_INT.search(raw)
            if m:
                answer = int(m.group(0))
        except TransportError:
            log.warning("lumber LLM call failed for %s at paragraph %d; "
                        "emitting whole group", doc.doc_id, cursor)
        if answer is None and stats is not None:
            stats.lumber_fallbacks += 1
        take = answer - 1 if answer is not None and 2 <= answer <= len(group) \
            else len(group)
        start = paras[group[0]][0]
        end = paras[group[take - 1]][1]
        chunks.append(_mk(doc.doc_id, "lumber", len(chunks), start, end,
                          bt.slice(start, end)))
        cursor += take
    return chunks


# --- dispatch + interchange ---------------------------------------------------

def chunk_document(doc: Document, method: str, cfg: ChunkerConfig,
                   embedder=None, llm=None,
                   stats: ChunkStats | None = None) -> list[Chunk]:
    if method == "paragraph":
        return chunk_paragraph(doc)
    if method == "fixed":
        return chunk_fixed(doc, cfg)
    if method == "sentence":
        return chunk_sentence(doc, cfg)
    if method == "semantic":
        if embedder is None:
            raise ValueError("semantic chunking needs an embedder")
        return chunk_semantic(doc, cfg, embedder)
    if method == "proposition":
        if llm is None:
            raise ValueError("proposition chunking needs an LLM gateway")
        return chunk_proposition(doc, llm, stats)
    if method == "lumber":
        if llm is None:
            raise ValueError("lumber chunking needs an LLM gateway")
        return chunk_lumber(doc, cfg, llm, stats)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def write_chunks(chunks: list[Chunk], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in chunks:
            fh.write(json.dumps(asdict(c), ensure_ascii=False, sort_keys=True,
                                separators=(",", ":")) + "\n")


def read_chunks(path: str) -> list[Chunk]:
    out: list[Chunk] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(Chunk(**json.loads(line)))
    return out
