"""Token counting and token<->byte offset maps.

Two schemes behind one interface: a fully-specified built-in scheme (maximal
runs of Unicode letters/digits; every other non-whitespace codepoint is its
own token; whitespace is never a token), and a remote scheme that fetches the
serving model's own tokenization from the embedding sidecar.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError


@dataclass(frozen=True)
class Token:
    text: str
    start: int  # byte offsets into the source text
    end: int


@dataclass
class TokenMap:
    tokens: list[Token]
    source_len: int  # bytes

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class TokenizerScheme:
    kind: str = "builtin"  # builtin | remote
    endpoint: str | None = None
    model: str | None = None

    def __post_init__(self):
        if self.kind not in ("builtin", "remote"):
            raise ConfigError(f"unknown tokenizer scheme {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ConfigError("remote tokenizer scheme needs an endpoint")


BUILTIN = TokenizerScheme()


def _utf8_len(o: int) -> int:
    if o < 0x80:
        return 1
    if o < 0x800:
        return 2
    if o < 0x10000:
        return 3
    return 4


def tokenize_builtin(text: str) -> TokenMap:
    tokens: list[Token] = []
    run_start = -1  # byte offset of the open letter/digit run
    run_chars: list[str] = []
    pos = 0
    for ch in text:
        blen = _utf8_len(ord(ch))
        if ch.isalnum():
            if run_start < 0:
                run_start = pos
            run_chars.append(ch)
        else:
            if run_start >= 0:
                tokens.append(Token("".join(run_chars), run_start, pos))
                run_start, run_chars = -1, []
            if not ch.isspace():
                tokens.append(Token(ch, pos, pos + blen))
        pos += blen
    if run_start >= 0:
        tokens.append(Token("".join(run_chars), run_start, pos))
    return TokenMap(tokens=tokens, source_len=pos)


def tokenize(text: str, scheme: TokenizerScheme = BUILTIN) -> TokenMap:
    if scheme.kind == "builtin":
        return tokenize_builtin(text)
    # Imported here so the builtin path never touches HTTP machinery.
    from .sidecar_client import SidecarClient

    client = SidecarClient(scheme.endpoint)
    return client.token_map(scheme.model, text)


def count_tokens(text: str, scheme: TokenizerScheme = BUILTIN) -> int:
    return len(tokenize(text, scheme).tokens)
