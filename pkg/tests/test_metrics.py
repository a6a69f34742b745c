import math

import pytest

from rsmlp.metrics import (
    BLEU_ORDERS,
    ROUGE_L_BETA,
    bleu_n,
    exact_match,
    ngrams,
    restoration_score,
    rouge,
    score_corpus,
)

PRED_SHORT = tuple("为什么会")
GOLD = tuple("为什么会这样")
TABLE_X = tuple("为什么会这样")
TABLE_GOLD = tuple("深圳的气候为什么会十分潮湿")
TABLE_PRED = tuple("为什么会十分潮湿")  # rewrite missing 深圳的气候


class TestExactMatch:
    def test_identical(self):
        assert exact_match(GOLD, GOLD) == 100.0

    def test_one_char_difference(self):
        assert exact_match(tuple("为什么会这天"), GOLD) == 0.0

    def test_corpus_mean(self):
        preds = [list(GOLD), list(PRED_SHORT)]
        golds = [list(GOLD), list(GOLD)]
        assert exact_match(preds, golds) == 50.0


class TestBleu:
    def test_identical_is_100(self):
        for n in BLEU_ORDERS:
            assert bleu_n(GOLD, GOLD, n) == pytest.approx(100.0)

    def test_disjoint_is_zero(self):
        assert bleu_n(tuple("abcd"), tuple("wxyz"), 1) == 0.0

    def test_brevity_penalty_case(self):
        # unigram precision 1, brevity penalty e^(1 - 6/4)
        assert bleu_n(PRED_SHORT, GOLD, 1) == pytest.approx(60.65, abs=0.05)

    def test_brevity_penalty_formula(self):
        assert bleu_n(PRED_SHORT, GOLD, 1) == pytest.approx(100.0 * math.exp(1.0 - 6.0 / 4.0))

    def test_no_penalty_when_longer(self):
        assert bleu_n(GOLD, PRED_SHORT, 1) == pytest.approx(100.0 * 4.0 / 6.0)

    def test_smoothing_keeps_bleu2_positive(self):
        # one shared unigram, no shared bigram; add-one keeps the score finite
        score = bleu_n(tuple("ab"), tuple("ax"), 2)
        assert 0.0 < score < 100.0

    def test_bad_order(self):
        with pytest.raises(ValueError):
            bleu_n(GOLD, GOLD, 3)

    def test_corpus_pools_counts(self):
        preds = [list(PRED_SHORT), list(GOLD)]
        golds = [list(GOLD), list(GOLD)]
        # pooled: matches 4+6=10 of 10, lengths 10 vs 12
        assert bleu_n(preds, golds, 1) == pytest.approx(100.0 * math.exp(1.0 - 12.0 / 10.0))


class TestRouge:
    def test_identical_all_variants(self):
        for variant in (1, 2, "L"):
            assert rouge(GOLD, GOLD, variant) == pytest.approx(100.0)

    def test_unigram_recall_case(self):
        assert rouge(PRED_SHORT, GOLD, 1) == pytest.approx(66.7, abs=0.05)

    def test_bigram_recall(self):
        # shared bigrams 为什/什么/么会 out of 5 gold bigrams
        assert rouge(PRED_SHORT, GOLD, 2) == pytest.approx(100.0 * 3.0 / 5.0)

    def test_l_is_weighted_f(self):
        precision, recall = 4.0 / 4.0, 4.0 / 6.0
        beta_sq = ROUGE_L_BETA**2
        expected = 100.0 * (1 + beta_sq) * precision * recall / (recall + beta_sq * precision)
        assert rouge(PRED_SHORT, GOLD, "L") == pytest.approx(expected)

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            rouge(GOLD, GOLD, "W")

    def test_empty_pred_is_zero(self):
        assert rouge((), GOLD, "L") == 0.0


class TestRestoration:
    def test_nothing_restored_is_zero(self):
        p, r, f = restoration_score(GOLD, GOLD, GOLD, 1)
        assert (p, r, f) == (0.0, 0.0, 0.0)

    def test_perfect_restoration(self):
        p, r, f = restoration_score(TABLE_GOLD, TABLE_GOLD, TABLE_X, 1)
        assert (p, r, f) == (100.0, 100.0, 100.0)

    def test_table_recall_case(self):
        # restored unigrams 深圳的气候十分潮湿; pred recovers 十分潮湿 only
        _, r, _ = restoration_score(TABLE_PRED, TABLE_GOLD, TABLE_X, 1)
        assert r == pytest.approx(44.4, abs=0.05)

    def test_table_precision_case(self):
        p, _, _ = restoration_score(TABLE_PRED, TABLE_GOLD, TABLE_X, 1)
        assert p == pytest.approx(100.0)

    def test_f_is_harmonic_mean(self):
        p, r, f = restoration_score(TABLE_PRED, TABLE_GOLD, TABLE_X, 1)
        assert f == pytest.approx(2 * p * r / (p + r))

    def test_bigrams_need_one_restored_token(self):
        # bigram 会十 straddles kept and restored text, so it counts
        _, r, _ = restoration_score(TABLE_PRED, TABLE_GOLD, TABLE_X, 2)
        assert 0.0 < r < 100.0

    def test_bad_order(self):
        with pytest.raises(ValueError):
            restoration_score(GOLD, GOLD, GOLD, 4)


class TestNgrams:
    def test_counts_with_repeats(self):
        counts = ngrams(("a", "b", "a", "b"), 2)
        assert counts[("a", "b")] == 2
        assert counts[("b", "a")] == 1

    def test_too_short_is_empty(self):
        assert not ngrams(("a",), 2)


class TestScoreCorpus:
    def test_em_100_implies_overlap_metrics_100(self):
        preds = [list(TABLE_GOLD), list(GOLD)]
        report = score_corpus(preds, preds, [list(TABLE_X), list(GOLD)])
        assert report.exact_match == 100.0
        for n in BLEU_ORDERS:
            assert report.bleu[n] == pytest.approx(100.0)
        for variant in ("1", "2", "L"):
            assert report.rouge[variant] == pytest.approx(100.0)

    def test_report_shape(self):
        report = score_corpus([list(TABLE_PRED)], [list(TABLE_GOLD)], [list(TABLE_X)])
        record = report.to_dict()
        assert record["constants"]["rouge_l_beta"] == ROUGE_L_BETA
        assert set(record["bleu"]) == {"1", "2", "4"}
        assert set(record["rouge"]) == {"1", "2", "L"}
        assert set(record["restoration"]) == {"1", "2", "3"}
        for scores in record["restoration"].values():
            assert set(scores) == {"p", "r", "f"}

    def test_scores_bounded(self):
        report = score_corpus([list(TABLE_PRED)], [list(TABLE_GOLD)], [list(TABLE_X)])
        values = [report.exact_match, *report.bleu.values(), *report.rouge.values()]
        for group in report.restoration.values():
            values.extend(group.values())
        assert all(0.0 <= v <= 100.0 for v in values)
