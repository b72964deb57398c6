import unicodedata

import pytest
from hypothesis import given, strategies as st

from chunkbench.errors import IngestError
from chunkbench.textutil import (ByteText, byte_slice, collapse_whitespace,
                                 decode_utf8, normalize_text)

text_st = st.text(max_size=200)


def test_normalize_line_endings():
    assert normalize_text("a\r\nb\rc\nd") == "a\nb\nc\nd"


def test_normalize_nfc():
    decomposed = "étude"  # e + combining acute
    assert normalize_text(decomposed) == "étude"


@given(text_st)
def test_normalize_idempotent(s):
    once = normalize_text(s)
    assert normalize_text(once) == once


@given(text_st)
def test_normalize_is_nfc_without_bare_cr(s):
    out = normalize_text(s)
    assert "\r" not in out
    assert unicodedata.is_normalized("NFC", out)


def test_decode_utf8_reports_offset():
    with pytest.raises(IngestError) as err:
        decode_utf8(b"ok\xff", source="f.jsonl")
    assert "f.jsonl" in str(err.value)
    assert "2" in str(err.value)


def test_byte_text_ascii():
    bt = ByteText("hello")
    assert bt.to_byte(3) == 3
    assert bt.to_cp(3) == 3
    assert bt.slice(1, 4) == "ell"


def test_byte_text_multibyte():
    bt = ByteText("aéb")  # 'é' is 2 bytes
    assert bt.to_byte(0) == 0
    assert bt.to_byte(1) == 1
    assert bt.to_byte(2) == 3
    assert bt.to_cp(3) == 2
    assert bt.slice(1, 3) == "é"
    assert byte_slice("aéb", 3, 4) == "b"


@given(text_st.map(normalize_text))
def test_byte_text_round_trip(s):
    bt = ByteText(s)
    data = s.encode("utf-8")
    for cp in range(len(s) + 1):
        b = bt.to_byte(cp)
        assert data[:b].decode("utf-8") == s[:cp]
        assert bt.to_cp(b) == cp


def test_collapse_whitespace_runs():
    collapsed, index = collapse_whitespace("a  b\t\nc")
    assert collapsed == "a b c"
    # each collapsed cp maps back to a position in the original
    original = "a  b\t\nc"
    for i, ch in enumerate(collapsed):
        if not ch.isspace():
            assert original[index[i]] == ch


def test_collapse_whitespace_trims_ends():
    collapsed, index = collapse_whitespace("  x  ")
    assert collapsed == "x"
    assert index == [2]


@given(text_st)
def test_collapse_whitespace_no_doubles(s):
    collapsed, index = collapse_whitespace(s)
    assert "  " not in collapsed
    assert not collapsed.startswith(" ") and not collapsed.endswith(" ")
    assert len(index) == len(collapsed)
    for i, ch in enumerate(collapsed):
        if ch != " ":
            assert s[index[i]] == ch
