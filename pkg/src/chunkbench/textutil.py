"""Text normalization and byte-offset bookkeeping.

Every span in this package is a half-open [start, end) pair of BYTE offsets
into the UTF-8 encoding of normalized text. Normalization happens exactly
once, at ingest; everything downstream assumes it.
"""

from __future__ import annotations

import unicodedata
from bisect import bisect_right

from .errors import IngestError


def normalize_text(raw: str) -> str:
    """Canonicalize line endings (CRLF/CR -> LF) and apply Unicode NFC."""
    return unicodedata.normalize("NFC", raw.replace("\r\n", "\n").replace("\r", "\n"))


def decode_utf8(data: bytes, source: str = "<bytes>") -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise IngestError(f"{source}: invalid UTF-8 at byte offset {exc.start}") from exc


def _utf8_len(ch: str) -> int:
    o = ord(ch)
    if o < 0x80:
        return 1
    if o < 0x800:
        return 2
    if o < 0x10000:
        return 3
    return 4


class ByteText:
    """A text plus cached codepoint<->byte offset maps.

    ASCII texts take a fast path where both indexings coincide.
    """

    def __init__(self, text: str):
        self.text = text
        self.data = text.encode("utf-8")
        self.ascii = len(self.data) == len(text)
        self._cp2b: list[int] | None = None

    def __len__(self) -> int:
        return len(self.data)

    @property
    def cp2b(self) -> list[int]:
        if self._cp2b is None:
            offs = [0] * (len(self.text) + 1)
            pos = 0
            for i, ch in enumerate(self.text):
                offs[i] = pos
                pos += _utf8_len(ch)
            offs[len(self.text)] = pos
            self._cp2b = offs
        return self._cp2b

    def to_byte(self, cp: int) -> int:
        if self.ascii:
            return cp
        return self.cp2b[cp]

    def to_cp(self, byte: int) -> int:
        if self.ascii:
            return byte
        # cp2b is strictly increasing, so this inverts exact boundaries.
        return bisect_right(self.cp2b, byte) - 1

    def slice(self, start: int, end: int) -> str:
        """Slice by byte offsets; offsets must fall on codepoint boundaries."""
        return self.data[start:end].decode("utf-8")


def byte_slice(text: str, start: int, end: int) -> str:
    return text.encode("utf-8")[start:end].decode("utf-8")


def collapse_whitespace(text: str) -> tuple[str, list[int]]:
    """Collapse whitespace runs to single spaces, trimming the ends.

    Returns the collapsed string and, per collapsed codepoint, the codepoint
    index in the original text (a space maps to the first codepoint of the
    run it replaced).
    """
    out: list[str] = []
    idx: list[int] = []
    pending_space_at = -1
    for i, ch in enumerate(text):
        if ch.isspace():
            if out and pending_space_at < 0:
                pending_space_at = i
            continue
        if pending_space_at >= 0:
            out.append(" ")
            idx.append(pending_space_at)
            pending_space_at = -1
        out.append(ch)
        idx.append(i)
    return "".join(out), idx
