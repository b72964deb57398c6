"""Fixtures: a tiny randomly initialized BERT checkpoint, built offline."""

import string

import pytest
import torch
from fastapi.testclient import TestClient
from tokenizers import Tokenizer
from tokenizers.models import WordPiece
from tokenizers.normalizers import NFD, Lowercase, Sequence, StripAccents
from tokenizers.pre_tokenizers import Whitespace
from tokenizers.processors import TemplateProcessing
from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

from embed_sidecar.models import ModelSpec, load_model
from embed_sidecar.server import create_app

WINDOW_CAP = 32  # content window = 30 after [CLS]/[SEP]


def build_checkpoint(dest: str) -> None:
    specials = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    chars = list(string.ascii_lowercase + string.digits)
    entries = specials + chars + ["##" + c for c in chars] + \
        [".", ",", "!", "?", ":", ";"]
    vocab = {t: i for i, t in enumerate(entries)}
    core = Tokenizer(WordPiece(vocab, unk_token="[UNK]",
                               max_input_chars_per_word=100))
    core.normalizer = Sequence([NFD(), Lowercase(), StripAccents()])
    core.pre_tokenizer = Whitespace()
    core.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]),
                        ("[SEP]", vocab["[SEP]"])])
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=core, unk_token="[UNK]", pad_token="[PAD]",
        cls_token="[CLS]", sep_token="[SEP]", mask_token="[MASK]",
        model_max_length=WINDOW_CAP)
    tokenizer.save_pretrained(dest)

    torch.manual_seed(0)
    config = BertConfig(vocab_size=len(vocab), hidden_size=32,
                        num_hidden_layers=2, num_attention_heads=4,
                        intermediate_size=37, max_position_embeddings=64)
    BertModel(config).save_pretrained(dest)


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory):
    dest = str(tmp_path_factory.mktemp("tiny_bert"))
    build_checkpoint(dest)
    return dest


@pytest.fixture(scope="session")
def registry(checkpoint):
    return {
        "tiny": load_model(ModelSpec(name="tiny", path=checkpoint)),
        "tiny-prefixed": load_model(ModelSpec(
            name="tiny-prefixed", path=checkpoint,
            prefixes={"query": "query: ", "passage": "passage: ",
                      "retrieval.query": "q: "})),
    }


@pytest.fixture(scope="session")
def app(registry):
    return create_app(registry)


@pytest.fixture(scope="session")
def client(app):
    return TestClient(app)
