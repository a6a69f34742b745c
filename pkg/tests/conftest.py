import numpy as np
import pytest

from rsmlp import tensor as T
from rsmlp.text import DialogueExample, tokenize


@pytest.fixture(autouse=True)
def restore_dtype():
    yield
    T.set_default_dtype(np.float32)


@pytest.fixture
def table1() -> DialogueExample:
    return DialogueExample(
        context_utterances=(
            tuple(tokenize("深圳的气候怎么样")),
            tuple(tokenize("十分潮湿")),
        ),
        incomplete=tuple(tokenize("为什么会这样")),
        rewrite=tuple(tokenize("深圳的气候为什么会十分潮湿")),
    )
