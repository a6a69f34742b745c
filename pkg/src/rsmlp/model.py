"""The rewriting network: encoder -> local mix -> global mix -> similarity
features -> per-cell 3-way classifier.

The joint token sequence is embedded, cut into non-overlapping length-B
blocks that a shared token-mixing MLP processes independently (with a
channel bottleneck D -> S), then a global token-mixing MLP over the padded
full length exchanges information across positions and expands channels
back to D.  Each (context-token, incomplete-token) cell is described by
dot, cosine, and bilinear similarity of the two output rows and classified
as None / Substitute / Insert.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import IncompatibleCheckpoint, SequenceTooLong
from .io import load_checkpoint, read_rsme, save_checkpoint
from .text import JointSequence, Vocabulary

COSINE_NORM_FLOOR = 1e-12
ENCODER_KINDS = ("lookup", "precomputed")
N_CLASSES = 3


@dataclass(frozen=True)
class ModelConfig:
    l_max: int = 64
    block: int = 8
    embed_dim: int = 64
    bottleneck: int = 32
    hidden_local: int = 64
    hidden_global: int = 128
    vocab_size: int = 0
    encoder: str = "lookup"
    residual: bool = False
    token_mode: str = "char"

    def __post_init__(self):
        if self.l_max % self.block != 0:
            raise ValueError("l_max must be divisible by the block length")
        if self.bottleneck >= self.embed_dim:
            raise ValueError("bottleneck width must be smaller than embed_dim")
        for name in ("l_max", "block", "embed_dim", "bottleneck", "hidden_local", "hidden_global"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.encoder not in ENCODER_KINDS:
            raise ValueError(f"encoder must be one of {ENCODER_KINDS}")
        # vocab_size 0 is allowed here: training fills it in from the corpus


def parameter_count(config: ModelConfig) -> int:
    """Closed-form trainable parameter count for a config."""
    total = 0
    if config.encoder == "lookup":
        total += config.vocab_size * config.embed_dim
    b, d, s = config.block, config.embed_dim, config.bottleneck
    hl, hg, lm = config.hidden_local, config.hidden_global, config.l_max
    total += hl * b + hl + b * hl + b          # local token mix
    total += d * s + s                          # local channel bottleneck
    total += hg * lm + hg + lm * hg + lm        # global token mix
    total += s * d + d                          # global channel expansion
    total += d * d                              # bilinear similarity weight
    total += N_CLASSES * N_CLASSES + N_CLASSES  # classifier
    total += 2 * N_CLASSES                      # BatchNorm scale/shift
    return total


def init_params(config: ModelConfig, seed: int = 0) -> T.ParamStore:
    rng = np.random.default_rng(seed)
    store = T.ParamStore()
    b, d, s = config.block, config.embed_dim, config.bottleneck
    hl, hg, lm = config.hidden_local, config.hidden_global, config.l_max
    if config.encoder == "lookup":
        if config.vocab_size < 3:
            raise ValueError("lookup encoder needs a vocabulary")
        store.add("embed", T.glorot_init(rng, (config.vocab_size, d)))
    store.add("local.tok_w1", T.glorot_init(rng, (hl, b)))
    store.add("local.tok_b1", np.zeros((hl, 1)))
    store.add("local.tok_w2", T.glorot_init(rng, (b, hl)))
    store.add("local.tok_b2", np.zeros((b, 1)))
    store.add("local.chan_w", T.glorot_init(rng, (d, s)))
    store.add("local.chan_b", np.zeros(s))
    store.add("global.tok_w1", T.glorot_init(rng, (hg, lm)))
    store.add("global.tok_b1", np.zeros((hg, 1)))
    store.add("global.tok_w2", T.glorot_init(rng, (lm, hg)))
    store.add("global.tok_b2", np.zeros((lm, 1)))
    store.add("global.chan_w", T.glorot_init(rng, (s, d)))
    store.add("global.chan_b", np.zeros(d))
    store.add("sim.bilinear", T.glorot_init(rng, (d, d)))
    store.add("head.bn_gamma", np.ones(N_CLASSES))
    store.add("head.bn_beta", np.zeros(N_CLASSES))
    store.add("head.w", T.glorot_init(rng, (N_CLASSES, N_CLASSES)))
    store.add("head.b", np.zeros(N_CLASSES))
    store.state["head.bn_mean"] = np.zeros(N_CLASSES)
    store.state["head.bn_var"] = np.ones(N_CLASSES)
    return store


class RsmlpModel:
    """Config + parameters + vocabulary, with the forward pipeline."""

    def __init__(
        self,
        config: ModelConfig,
        vocab: Vocabulary,
        params: T.ParamStore | None = None,
        seed: int = 0,
        embeddings: dict[int, np.ndarray] | None = None,
    ):
        self.config = config
        self.vocab = vocab
        self.params = params if params is not None else init_params(config, seed)
        self.embeddings = embeddings or {}

    def load_embeddings(self, path) -> None:
        self.embeddings = {ordinal: array for ordinal, array in read_rsme(path)}

    # -- pipeline stages ----------------------------------------------------
    def encode(self, joint: JointSequence, ordinal: int | None = None):
        """Token embeddings padded by replicating the last real row up to the
        next multiple of the block length.  Returns (A, L, L_pad)."""
        length = len(joint)
        config = self.config
        if length > config.l_max:
            raise SequenceTooLong(f"joint length {length} exceeds l_max {config.l_max}")
        if length == 0:
            raise ValueError("empty joint sequence")
        l_pad = -(-length // config.block) * config.block
        pad_index = list(range(length)) + [length - 1] * (l_pad - length)
        if config.encoder == "lookup":
            ids = self.vocab.encode(joint.tokens)
            rows = T.take(self.params["embed"], np.asarray(ids + ids[-1:] * (l_pad - length)))
        else:
            if ordinal is None or ordinal not in self.embeddings:
                raise IncompatibleCheckpoint(
                    f"no precomputed embedding record for example {ordinal}"
                )
            record = self.embeddings[ordinal]
            if record.shape != (length, config.embed_dim):
                raise IncompatibleCheckpoint(
                    f"embedding record {ordinal} has shape {record.shape}, "
                    f"expected ({length}, {config.embed_dim})"
                )
            rows = T.Tensor(record[np.asarray(pad_index)])
        return rows, length, l_pad

    def local_unit(self, a: T.Tensor, l_pad: int) -> T.Tensor:
        """Per-block token mixing then channel projection D -> S; cross-block
        information flow is zero by construction."""
        config = self.config
        p = self.params
        n_blocks = l_pad // config.block
        blocks = T.reshape(a, (n_blocks, config.block, config.embed_dim))
        hidden = T.gelu(T.matmul(p["local.tok_w1"], blocks) + p["local.tok_b1"])
        mixed = T.matmul(p["local.tok_w2"], hidden) + p["local.tok_b2"]
        z = T.matmul(mixed, p["local.chan_w"]) + p["local.chan_b"]
        return T.reshape(z, (l_pad, config.bottleneck))

    def global_unit(self, z: T.Tensor, a: T.Tensor, l_pad: int) -> T.Tensor:
        """Token mixing over the full padded length, then channel expansion
        S -> D; rows beyond l_pad replicate the last row before mixing."""
        config = self.config
        p = self.params
        pad_index = np.asarray(list(range(l_pad)) + [l_pad - 1] * (config.l_max - l_pad))
        padded = T.take(z, pad_index)
        hidden = T.gelu(T.matmul(p["global.tok_w1"], padded) + p["global.tok_b1"])
        mixed = T.matmul(p["global.tok_w2"], hidden) + p["global.tok_b2"]
        expanded = T.matmul(mixed, p["global.chan_w"]) + p["global.chan_b"]
        z_star = expanded[:l_pad]
        if config.residual:
            z_star = z_star + a
        return z_star

    def similarity_features(self, z_star: T.Tensor, boundary: int, n: int) -> T.Tensor:
        """Dot, cosine, and bilinear similarity for every (context row,
        incomplete column) cell, flattened to [M*(N+1), 3].  The sentinel
        column reuses the last incomplete token as its query."""
        e_c = z_star[:boundary]
        q_index = np.asarray(list(range(boundary, boundary + n)) + [boundary + n - 1])
        q = T.take(z_star, q_index)
        q_t = T.transpose(q)

        dot = T.matmul(e_c, q_t)
        norm_c = T.sqrt(T.tsum(T.mul(e_c, e_c), axis=1, keepdims=True))
        norm_q = T.sqrt(T.tsum(T.mul(q, q), axis=1, keepdims=True))
        inv_c = T.reciprocal(T.clamp_min(norm_c, COSINE_NORM_FLOOR))
        inv_q = T.reciprocal(T.clamp_min(norm_q, COSINE_NORM_FLOOR))
        defined = (norm_c.data >= COSINE_NORM_FLOOR) & (norm_q.data.T >= COSINE_NORM_FLOOR)
        cosine = T.mul(T.mul(T.mul(dot, inv_c), T.transpose(inv_q)), defined.astype(dot.data.dtype))
        bilinear = T.matmul(T.matmul(e_c, self.params["sim.bilinear"]), q_t)

        cells = boundary * (n + 1)
        return T.concat(
            [
                T.reshape(dot, (cells, 1)),
                T.reshape(cosine, (cells, 1)),
                T.reshape(bilinear, (cells, 1)),
            ],
            axis=1,
        )

    def classify_cells(self, features: T.Tensor, mode: str, update_stats: bool = True) -> T.Tensor:
        p = self.params
        normalized = T.batchnorm(
            features,
            p["head.bn_gamma"],
            p["head.bn_beta"],
            p.state["head.bn_mean"],
            p.state["head.bn_var"],
            mode=mode,
            update_stats=update_stats,
        )
        return T.linear(normalized, T.transpose(p["head.w"]), p["head.b"])

    def cell_features(self, joint: JointSequence, ordinal: int | None = None) -> T.Tensor:
        """Everything up to (but excluding) the classifier, for one example."""
        a, length, l_pad = self.encode(joint, ordinal)
        z = self.local_unit(a, l_pad)
        z_star = self.global_unit(z, a, l_pad)
        n = length - joint.boundary
        return self.similarity_features(z_star, joint.boundary, n)

    def forward(self, joint: JointSequence, mode: str = "eval", ordinal: int | None = None):
        """Full pipeline to a per-cell argmax label grid [M, N+1] plus logits.
        Ties break toward None, then Substitute."""
        n = len(joint) - joint.boundary
        with T.no_grad():
            features = self.cell_features(joint, ordinal)
            logits = self.classify_cells(features, mode=mode, update_stats=False)
        grid = np.argmax(logits.data, axis=1).astype(np.int8).reshape(joint.boundary, n + 1)
        return grid, logits

    # -- persistence --------------------------------------------------------
    def config_vector(self) -> np.ndarray:
        c = self.config
        return np.asarray(
            [
                1.0,
                c.l_max,
                c.block,
                c.embed_dim,
                c.bottleneck,
                c.hidden_local,
                c.hidden_global,
                c.vocab_size,
                ENCODER_KINDS.index(c.encoder),
                1.0 if c.residual else 0.0,
                0.0 if c.token_mode == "char" else 1.0,
            ],
            dtype=np.float32,
        )

    def save(self, path, include_optimizer: bool = True) -> None:
        tensors: dict[str, np.ndarray] = {"meta.config": self.config_vector()}
        for name, param in self.params.items():
            tensors[name] = param.data
        for name, array in self.params.state.items():
            tensors[f"state.{name}"] = array
        if include_optimizer:
            for name in self.params.names():
                tensors[f"opt.m.{name}"] = self.params._m[name]
                tensors[f"opt.v.{name}"] = self.params._v[name]
            tensors["opt.step"] = np.asarray([self.params.step_count], dtype=np.float32)
        save_checkpoint(path, tensors)
        self.vocab.save(f"{path}.vocab")

    @classmethod
    def load(cls, path, expected_config: ModelConfig | None = None) -> "RsmlpModel":
        tensors = load_checkpoint(path)
        if "meta.config" not in tensors:
            raise IncompatibleCheckpoint(f"{path} carries no model config")
        vec = tensors["meta.config"]
        if int(vec[0]) != 1:
            raise IncompatibleCheckpoint(f"unknown config version in {path}")
        config = ModelConfig(
            l_max=int(vec[1]),
            block=int(vec[2]),
            embed_dim=int(vec[3]),
            bottleneck=int(vec[4]),
            hidden_local=int(vec[5]),
            hidden_global=int(vec[6]),
            vocab_size=int(vec[7]),
            encoder=ENCODER_KINDS[int(vec[8])],
            residual=bool(vec[9]),
            token_mode="char" if vec[10] == 0 else "word",
        )
        if expected_config is not None and config != expected_config:
            raise IncompatibleCheckpoint(
                f"checkpoint config {config} does not match expected {expected_config}"
            )
        vocab = Vocabulary.load(f"{path}.vocab")
        if config.encoder == "lookup" and len(vocab) != config.vocab_size:
            raise IncompatibleCheckpoint("vocabulary size does not match checkpoint config")
        store = T.ParamStore()
        for name, array in tensors.items():
            if name.startswith(("meta.", "state.", "opt.")):
                continue
            store.add(name, array)
        for name, array in tensors.items():
            if name.startswith("state."):
                store.state[name[len("state.") :]] = array.astype(T.get_default_dtype())
        for name in store.names():
            if f"opt.m.{name}" in tensors:
                store._m[name] = tensors[f"opt.m.{name}"].astype(store._m[name].dtype)
                store._v[name] = tensors[f"opt.v.{name}"].astype(store._v[name].dtype)
        if "opt.step" in tensors:
            store.step_count = int(tensors["opt.step"][0])
        return cls(config=config, vocab=vocab, params=store)
