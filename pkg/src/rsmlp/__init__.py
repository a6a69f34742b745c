"""Incomplete-utterance rewriting via token-level edit matrices and a
down-sampled MLP mixer."""

from .edits import (
    EditLabel,
    EditMatrix,
    EditProgram,
    apply_edits,
    derive_edit_matrix,
    diff_spans,
    extract_program,
    lcs,
)
from .model import ModelConfig, RsmlpModel, parameter_count
from .text import DialogueExample, JointSequence, Vocabulary, build_joint, build_vocab, load_corpus, tokenize
from .training import TrainConfig, bench, evaluate, rewrite_example, train

__version__ = "0.1.0"
