import numpy as np
import pytest

from helpers import make_documents


@pytest.fixture(scope="session")
def fixture_docs():
    # 50 documents, each well under 512 built-in tokens
    return make_documents(50, seed=42, max_tokens=512)


@pytest.fixture(scope="session")
def spiced_docs():
    return make_documents(200, seed=7, spice=True)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
