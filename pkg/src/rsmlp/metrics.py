"""Rewrite-quality metrics: exact match, BLEU, ROUGE, restoration score.

All scores are on a 0..100 scale.  BLEU is corpus-level modified n-gram
precision with a brevity penalty and add-one smoothing on orders above 1;
ROUGE-n is n-gram recall and ROUGE-L an LCS-based F measure (beta = 1.2).
The restoration score restricts n-gram precision/recall to n-grams touching
at least one restored token (a gold token absent from the incomplete
utterance, by multiset difference); it reconstructs a metric the IUR
literature reports without defining, and is documented as such.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .edits import lcs

ROUGE_L_BETA = 1.2
BLEU_ORDERS = (1, 2, 4)
RESTORATION_ORDERS = (1, 2, 3)


def _as_corpus(pred, gold):
    """Accept either one (pred, gold) sequence pair or parallel lists."""
    if pred and isinstance(pred[0], (list, tuple)):
        if len(pred) != len(gold):
            raise ValueError("pred and gold corpora must be the same length")
        return [tuple(p) for p in pred], [tuple(g) for g in gold]
    return [tuple(pred)], [tuple(gold)]


def ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def exact_match(pred, gold) -> float:
    preds, golds = _as_corpus(pred, gold)
    hits = sum(1 for p, g in zip(preds, golds) if p == g)
    return 100.0 * hits / len(preds)


def bleu_n(pred, gold, n: int) -> float:
    if n not in BLEU_ORDERS:
        raise ValueError(f"BLEU order must be one of {BLEU_ORDERS}")
    preds, golds = _as_corpus(pred, gold)
    log_precisions = []
    for order in range(1, n + 1):
        matches = 0
        total = 0
        for p, g in zip(preds, golds):
            pc = ngrams(p, order)
            gc = ngrams(g, order)
            matches += sum(min(count, gc[gram]) for gram, count in pc.items())
            total += sum(pc.values())
        if order > 1:  # add-one smoothing
            matches += 1
            total += 1
        if matches == 0 or total == 0:
            return 0.0
        log_precisions.append(math.log(matches / total))
    pred_len = sum(len(p) for p in preds)
    gold_len = sum(len(g) for g in golds)
    if pred_len == 0:
        return 0.0
    brevity = 1.0 if pred_len > gold_len else math.exp(1.0 - gold_len / pred_len)
    return 100.0 * brevity * math.exp(sum(log_precisions) / n)


def rouge(pred, gold, variant) -> float:
    preds, golds = _as_corpus(pred, gold)
    if variant in (1, 2):
        matches = 0
        total = 0
        for p, g in zip(preds, golds):
            pc = ngrams(p, variant)
            gc = ngrams(g, variant)
            matches += sum(min(count, pc[gram]) for gram, count in gc.items())
            total += sum(gc.values())
        return 100.0 * matches / total if total else 0.0
    if variant == "L":
        scores = []
        for p, g in zip(preds, golds):
            if not p or not g:
                scores.append(0.0)
                continue
            common = len(lcs(p, g))
            precision = common / len(p)
            recall = common / len(g)
            if precision + recall == 0:
                scores.append(0.0)
                continue
            beta_sq = ROUGE_L_BETA**2
            scores.append(100.0 * (1 + beta_sq) * precision * recall / (recall + beta_sq * precision))
        return sum(scores) / len(scores)
    raise ValueError(f"unknown ROUGE variant: {variant!r}")


def _counting_ngrams(tokens, restored: set, n: int) -> Counter:
    return Counter(
        gram
        for gram in (tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))
        if any(t in restored for t in gram)
    )


def restoration_score(pred, gold, x, n: int) -> tuple[float, float, float]:
    """Precision/recall/F over n-grams containing at least one restored token.
    Accepts single sequences or parallel corpora (x as list of sequences)."""
    if n not in RESTORATION_ORDERS:
        raise ValueError(f"restoration order must be one of {RESTORATION_ORDERS}")
    preds, golds = _as_corpus(pred, gold)
    xs = [tuple(s) for s in x] if x and isinstance(x[0], (list, tuple)) else [tuple(x)]
    matches = 0
    pred_total = 0
    gold_total = 0
    for p, g, xi in zip(preds, golds, xs):
        restored_counts = Counter(g) - Counter(xi)
        restored = set(restored_counts)
        pc = _counting_ngrams(p, restored, n)
        gc = _counting_ngrams(g, restored, n)
        matches += sum(min(count, gc[gram]) for gram, count in pc.items())
        pred_total += sum(pc.values())
        gold_total += sum(gc.values())
    precision = 100.0 * matches / pred_total if pred_total else 0.0
    recall = 100.0 * matches / gold_total if gold_total else 0.0
    f_score = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f_score


@dataclass
class EvalReport:
    exact_match: float = 0.0
    bleu: dict = field(default_factory=dict)  # {1: .., 2: .., 4: ..}
    rouge: dict = field(default_factory=dict)  # {"1": .., "2": .., "L": ..}
    restoration: dict = field(default_factory=dict)  # {n: {"p","r","f"}}
    cell_accuracy: float = 0.0
    lossy_fraction: float = 0.0
    n_examples: int = 0

    def to_dict(self) -> dict:
        def r(v):
            return round(v, 4)

        return {
            "constants": {"bleu_smoothing": "add-one on orders > 1", "rouge_l_beta": ROUGE_L_BETA},
            "n_examples": self.n_examples,
            "exact_match": r(self.exact_match),
            "bleu": {str(k): r(v) for k, v in sorted(self.bleu.items())},
            "rouge": {str(k): r(v) for k, v in self.rouge.items()},
            "restoration": {
                str(k): {m: r(v) for m, v in sorted(scores.items())}
                for k, scores in sorted(self.restoration.items())
            },
            "cell_accuracy": r(self.cell_accuracy),
            "lossy_fraction": r(self.lossy_fraction),
        }


def score_corpus(preds, golds, xs) -> EvalReport:
    """All rewrite metrics over parallel corpora (no cell accuracy)."""
    report = EvalReport(n_examples=len(preds))
    report.exact_match = exact_match(preds, golds)
    report.bleu = {n: bleu_n(preds, golds, n) for n in BLEU_ORDERS}
    report.rouge = {"1": rouge(preds, golds, 1), "2": rouge(preds, golds, 2), "L": rouge(preds, golds, "L")}
    report.restoration = {}
    for n in RESTORATION_ORDERS:
        p, r_, f = restoration_score(preds, golds, xs, n)
        report.restoration[n] = {"p": p, "r": r_, "f": f}
    return report
