import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from keyreader import synthetic  # noqa: E402
from keyreader.config import RunConfig  # noqa: E402
from keyreader.pipeline import build_system  # noqa: E402

# small enough that a full forward/backward takes milliseconds
TINY = RunConfig(word_dim=6, char_dim=3, char_filters=4, filter_width=3, hidden=4, tag_dim=3, dropout=0.0,
                 beam_k=4, candidates=3, max_len=8, tag_epochs=1, min_tag_sentence=1)


@pytest.fixture(scope="session")
def tiny_examples():
    return synthetic.purchase_corpus(4, seed=3)


@pytest.fixture(scope="session")
def tiny_system(tiny_examples):
    return build_system(TINY, tiny_examples)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
