"""Training loop, corpus evaluation, rewriting, and latency benchmarking."""

from __future__ import annotations

import os
import platform
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import tensor as T
from .edits import EditMatrix, apply_edits, derive_edit_matrix, extract_program
from .errors import CorpusError
from .metrics import EvalReport, score_corpus
from .model import ModelConfig, RsmlpModel, parameter_count
from .text import SEP, DialogueExample, JointSequence, build_vocab

DOCUMENTED_CONFIG_KEYS = {
    "epochs",
    "batch_size",
    "learning_rate",
    "seed",
    "class_weights",
    "l_max",
    "block",
    "embed_dim",
    "bottleneck",
    "hidden_local",
    "hidden_global",
    "residual",
    "token_mode",
    "encoder",
}


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 8
    learning_rate: float = 1e-5  # Adam default; override for small-corpus runs
    seed: int = 0
    class_weights: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("train config values must be positive")


@dataclass
class PreparedExample:
    example: DialogueExample
    joint: JointSequence
    ordinal: int
    truncated: bool
    gold: EditMatrix | None  # None when the example has no rewrite
    labels: np.ndarray | None  # flat int [M*(N+1)]
    mask: np.ndarray | None  # flat bool, False on [SEP] rows


def _truncate_joint(joint: JointSequence, l_max: int) -> tuple[JointSequence, bool]:
    """Drop context tokens from the left (oldest turns) until the joint fits;
    the incomplete utterance is never cut."""
    if len(joint) <= l_max:
        return joint, False
    n = len(joint) - joint.boundary
    keep = l_max - n
    if keep < 1:
        raise CorpusError(f"incomplete utterance of length {n} cannot fit l_max={l_max}")
    context = joint.context[-keep:]
    return JointSequence(tokens=tuple(context) + joint.incomplete, boundary=keep), True


def prepare_corpus(
    corpus: list[DialogueExample], model_config: ModelConfig, require_gold: bool = True
) -> list[PreparedExample]:
    from .text import build_joint

    prepared = []
    for ordinal, example in enumerate(corpus):
        joint, truncated = _truncate_joint(build_joint(example), model_config.l_max)
        gold = labels = mask = None
        if example.rewrite is not None:
            gold = derive_edit_matrix(example, joint)
            labels = gold.labels.reshape(-1).astype(np.int64)
            row_valid = np.asarray([t != SEP for t in joint.context], dtype=bool)
            n = len(joint) - joint.boundary
            mask = np.repeat(row_valid, n + 1)
        elif require_gold:
            raise CorpusError(f"example {ordinal} has no gold rewrite")
        prepared.append(
            PreparedExample(
                example=example,
                joint=joint,
                ordinal=ordinal,
                truncated=truncated,
                gold=gold,
                labels=labels,
                mask=mask,
            )
        )
    return prepared


def class_weights_from(prepared: list[PreparedExample]) -> np.ndarray:
    """Inverse class frequency over valid cells, renormalized to mean 1."""
    counts = np.zeros(3, dtype=np.float64)
    for item in prepared:
        if item.labels is None:
            continue
        valid = item.labels[item.mask]
        counts += np.bincount(valid, minlength=3)
    counts = np.maximum(counts, 1.0)
    weights = 1.0 / counts
    return (weights * 3.0 / weights.sum()).astype(np.float64)


def _batch_loss(model: RsmlpModel, batch: list[PreparedExample], weights: np.ndarray) -> T.Tensor:
    """Pooled forward over a batch: per-example cell features concatenated
    into one BatchNorm batch."""
    features = T.concat([model.cell_features(p.joint, p.ordinal) for p in batch], axis=0)
    logits = model.classify_cells(features, mode="train")
    labels = np.concatenate([p.labels for p in batch])
    mask = np.concatenate([p.mask for p in batch])
    return T.weighted_cross_entropy(logits, labels, weights, mask)


def train(
    corpus: list[DialogueExample],
    model_config: ModelConfig,
    train_config: TrainConfig,
    dev: list[DialogueExample] | None = None,
    log=None,
) -> tuple[RsmlpModel, dict]:
    """Fit a model on the corpus; when a dev split is given the best-EM
    parameters are retained.  Deterministic for a fixed seed."""
    if not corpus:
        raise CorpusError("training corpus is empty")
    vocab = build_vocab(corpus, model_config.token_mode)
    config = replace(model_config, vocab_size=len(vocab))
    model = RsmlpModel(config, vocab, seed=train_config.seed)
    prepared = prepare_corpus(corpus, config)
    weights = (
        np.asarray(train_config.class_weights, dtype=np.float64)
        if train_config.class_weights is not None
        else class_weights_from(prepared)
    )
    rng = np.random.default_rng(train_config.seed)
    history = {"epoch_loss": [], "dev_em": [], "truncated": sum(p.truncated for p in prepared)}
    best_em = -1.0
    best_snapshot = None

    for epoch in range(train_config.epochs):
        order = rng.permutation(len(prepared))
        losses = []
        for start in range(0, len(order), train_config.batch_size):
            batch = [prepared[i] for i in order[start : start + train_config.batch_size]]
            model.params.zero_grad()
            loss = _batch_loss(model, batch, weights)
            loss.backward()
            T.adam_step(model.params, lr=train_config.learning_rate)
            losses.append(loss.item())
        history["epoch_loss"].append(float(np.median(losses)))
        if dev is not None:
            report = evaluate(model, dev)
            history["dev_em"].append(report.exact_match)
            if report.exact_match > best_em:
                best_em = report.exact_match
                best_snapshot = _snapshot(model.params)
        if log is not None:
            log(epoch, history)
    if best_snapshot is not None:
        _restore(model.params, best_snapshot)
    return model, history


def _snapshot(store: T.ParamStore):
    return (
        {name: tensor.data.copy() for name, tensor in store.items()},
        {name: array.copy() for name, array in store.state.items()},
    )


def _restore(store: T.ParamStore, snapshot) -> None:
    params, state = snapshot
    for name, data in params.items():
        store[name].data = data.copy()
    for name, data in state.items():
        store.state[name][...] = data


def sanitize_grid(grid: np.ndarray, joint: JointSequence) -> np.ndarray:
    """Enforce the edit-matrix invariant on a predicted grid: [SEP] rows are
    structurally None (they are masked out of supervision, so the model is
    unconstrained there)."""
    sep_rows = np.asarray([t == SEP for t in joint.context], dtype=bool)
    grid = grid.copy()
    grid[sep_rows] = 0
    return grid


def predict_grid(model: RsmlpModel, joint: JointSequence, ordinal: int | None = None) -> np.ndarray:
    grid, _logits = model.forward(joint, mode="eval", ordinal=ordinal)
    return sanitize_grid(grid, joint)


def rewrite_example(model: RsmlpModel, example: DialogueExample, ordinal: int | None = None):
    """Predict a label grid and execute it: forward -> argmax grid ->
    program extraction -> edit application."""
    from .text import build_joint

    joint, _ = _truncate_joint(build_joint(example), model.config.l_max)
    grid = predict_grid(model, joint, ordinal)
    return apply_edits(joint.incomplete, extract_program(grid), joint.context)


def _eval_threads() -> int:
    value = os.environ.get("RSMLP_THREADS", "")
    try:
        return max(1, int(value))
    except ValueError:
        return os.cpu_count() or 1


def evaluate(model: RsmlpModel, corpus: list[DialogueExample]) -> EvalReport:
    """Rewrite every example and score against the gold rewrites, plus
    cell-label accuracy against derived supervision."""
    prepared = prepare_corpus(corpus, model.config)

    def run(item: PreparedExample):
        grid = predict_grid(model, item.joint, item.ordinal)
        pred = apply_edits(item.joint.incomplete, extract_program(grid), item.joint.context)
        return grid, pred

    threads = _eval_threads()
    if threads > 1 and len(prepared) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, prepared))
    else:
        results = [run(item) for item in prepared]

    preds, golds, xs = [], [], []
    correct_cells = 0
    total_cells = 0
    lossy = 0
    for item, (grid, pred) in zip(prepared, results):
        preds.append(tuple(pred))
        golds.append(tuple(item.example.rewrite))
        xs.append(tuple(item.example.incomplete))
        flat = grid.reshape(-1)
        correct_cells += int((flat[item.mask] == item.labels[item.mask]).sum())
        total_cells += int(item.mask.sum())
        lossy += item.gold.lossy
    report = score_corpus(preds, golds, xs)
    report.cell_accuracy = 100.0 * correct_cells / total_cells if total_cells else 0.0
    report.lossy_fraction = lossy / len(prepared) if prepared else 0.0
    return report


def bench(model: RsmlpModel, length: int, iterations: int = 200, warmup: int = 10) -> dict:
    """Wall-clock latency of single-sentence forward + decode.  Absolute
    numbers are hardware-specific and never compared to published figures."""
    if iterations < 100:
        raise ValueError("need at least 100 iterations for stable percentiles")
    surfaces = [model.vocab.surface_of(i % len(model.vocab)) for i in range(length)]
    boundary = max(1, length // 2)
    joint = JointSequence(tokens=tuple(surfaces), boundary=boundary)

    def once():
        grid, _ = model.forward(joint, mode="eval")
        apply_edits(joint.incomplete, extract_program(grid), joint.context)

    for _ in range(warmup):
        once()
    samples = np.empty(iterations)
    for i in range(iterations):
        start = time.perf_counter()
        once()
        samples[i] = (time.perf_counter() - start) * 1000.0

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "bench.ckpt")
        model.save(path, include_optimizer=False)
        checkpoint_bytes = os.path.getsize(path)

    return {
        "length": length,
        "iterations": iterations,
        "p50_ms": float(np.percentile(samples, 50)),
        "p95_ms": float(np.percentile(samples, 95)),
        "parameter_count": parameter_count(model.config),
        "checkpoint_bytes": checkpoint_bytes,
        "hardware": f"{platform.platform()} / {platform.processor() or 'unknown cpu'}",
    }


def parse_config_file(path) -> dict[str, str]:
    """Flat `key = value` config text; only documented keys are accepted."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CorpusError(f"{path}:{line_no}: expected key = value")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in DOCUMENTED_CONFIG_KEYS:
                raise CorpusError(f"{path}:{line_no}: unknown config key {key!r}")
            values[key] = value.strip()
    return values


def configs_from_mapping(values: dict[str, str]) -> tuple[ModelConfig, TrainConfig]:
    model_kwargs = {}
    train_kwargs = {}
    for key, raw in values.items():
        if key in ("epochs", "batch_size", "seed"):
            train_kwargs[key] = int(raw)
        elif key == "learning_rate":
            train_kwargs[key] = float(raw)
        elif key == "class_weights":
            train_kwargs[key] = tuple(float(v) for v in raw.split(","))
        elif key == "residual":
            model_kwargs[key] = raw.lower() in ("1", "true", "yes")
        elif key in ("token_mode", "encoder"):
            model_kwargs[key] = raw
        else:
            model_kwargs[key] = int(raw)
    return ModelConfig(**model_kwargs), TrainConfig(**train_kwargs)
