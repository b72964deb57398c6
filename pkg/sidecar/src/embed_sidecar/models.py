"""Checkpoint loading and the two inference paths (token-level, pooled).

Pooling convention: the pooled vector is the mean of exactly the rows the
token endpoint returns (final layer, specials excluded, whitespace-only
spans dropped), L2-normalized. Keeping both endpoints on one code path makes
client-side pooling reproduce the server's pooled output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# model-card prefix conventions, keyed by checkpoint-name fragment
AUTO_PREFIXES = (
    ("e5", {"query": "query: ", "passage": "passage: "}),
    ("nomic", {"query": "search_query: ", "passage": "search_document: "}),
)


def default_prefixes(path: str) -> dict[str, str]:
    lowered = path.lower()
    for fragment, table in AUTO_PREFIXES:
        if fragment in lowered:
            return dict(table)
    return {}


class OverWindowError(Exception):
    pass


@dataclass
class ModelSpec:
    name: str
    path: str
    device: str = "cpu"
    # input_type or task name -> literal prefix prepended before encoding
    prefixes: dict[str, str] = field(default_factory=dict)
    trust_remote_code: bool = False


class LoadedModel:
    def __init__(self, spec: ModelSpec, tokenizer, model):
        self.spec = spec
        self.tokenizer = tokenizer
        self.model = model
        self.dims = int(model.config.hidden_size)
        cap = getattr(tokenizer, "model_max_length", None)
        if cap is None or cap > 1_000_000:  # HF uses a huge sentinel
            cap = int(model.config.max_position_embeddings)
        self.window = int(cap) - tokenizer.num_special_tokens_to_add()

    def _encode(self, text: str) -> dict:
        enc = self.tokenizer(text, return_offsets_mapping=True,
                             return_special_tokens_mask=True,
                             add_special_tokens=True, truncation=False)
        content = sum(1 for m in enc["special_tokens_mask"] if m == 0)
        if content > self.window:
            raise OverWindowError(
                f"{content} tokens exceed the {self.window}-token window "
                f"of model {self.spec.name!r}")
        return enc

    def token_states(self, text: str):
        """(surface_tokens, byte_offsets, matrix) for non-special tokens."""
        import torch

        enc = self._encode(text)
        ids = torch.tensor([enc["input_ids"]], device=self.spec.device)
        attn = torch.tensor([enc["attention_mask"]], device=self.spec.device)
        with torch.no_grad():
            hidden = self.model(input_ids=ids,
                                attention_mask=attn).last_hidden_state[0]
        hidden = hidden.cpu().numpy().astype(np.float64)

        byte_of = [0]
        for ch in text:
            byte_of.append(byte_of[-1] + len(ch.encode("utf-8")))
        tokens: list[str] = []
        offsets: list[tuple[int, int]] = []
        rows: list[np.ndarray] = []
        for i, (span, special) in enumerate(zip(enc["offset_mapping"],
                                                enc["special_tokens_mask"])):
            if special:
                continue
            s, e = span
            # char offsets from the tokenizer; trim whitespace markers so the
            # slice is the token's surface form, then convert to bytes
            while s < e and text[s].isspace():
                s += 1
            while e > s and text[e - 1].isspace():
                e -= 1
            if s == e:
                continue
            tokens.append(text[s:e])
            offsets.append((byte_of[s], byte_of[e]))
            rows.append(hidden[i])
        matrix = np.stack(rows) if rows else np.empty((0, self.dims))
        return tokens, offsets, matrix

    def pooled(self, text: str, input_type: str | None = None,
               task: str | None = None) -> np.ndarray:
        if not text:
            raise ValueError("empty text")
        key = task or input_type
        prefix = self.spec.prefixes.get(key, "") if key else ""
        _, _, matrix = self.token_states(prefix + text)
        if matrix.shape[0] == 0:
            raise ValueError("text has no content tokens")
        v = matrix.mean(axis=0)
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            raise ValueError("degenerate zero embedding")
        return v / norm


def load_model(spec: ModelSpec) -> LoadedModel:
    from transformers import AutoModel, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(
        spec.path, trust_remote_code=spec.trust_remote_code)
    if not tokenizer.is_fast:
        raise ValueError(f"{spec.path}: token offsets need a fast tokenizer")
    model = AutoModel.from_pretrained(
        spec.path, trust_remote_code=spec.trust_remote_code)
    model.to(spec.device)
    model.eval()
    if not spec.prefixes:
        spec.prefixes = default_prefixes(spec.path)
    return LoadedModel(spec, tokenizer, model)
