import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsmlp.edits import (
    EditLabel,
    EditProgram,
    apply_edits,
    cells_json,
    derive_edit_matrix,
    diff_spans,
    encode_program,
    extract_program,
    lcs,
)
from rsmlp.errors import MalformedProgram, MissingGold
from rsmlp.text import SEP, DialogueExample, build_joint
from synth import make_corpus

tokens = st.lists(st.sampled_from("abcd"), max_size=8)


class TestLcs:
    def test_table1_pair(self):
        pairs = lcs(list("为什么会这样"), list("深圳的气候为什么会十分潮湿"))
        assert len(pairs) == 4
        assert [a for a, _ in pairs] == [0, 1, 2, 3]
        assert [b for _, b in pairs] == [5, 6, 7, 8]

    def test_identity(self):
        assert lcs("abc", "abc") == [(0, 0), (1, 1), (2, 2)]

    def test_disjoint(self):
        assert lcs("abc", "xyz") == []

    @given(tokens, tokens)
    def test_length_symmetric(self, a, b):
        assert len(lcs(a, b)) == len(lcs(b, a))

    @given(tokens, tokens)
    def test_strictly_increasing(self, a, b):
        pairs = lcs(a, b)
        for (i1, j1), (i2, j2) in zip(pairs, pairs[1:]):
            assert i1 < i2 and j1 < j2
        for i, j in pairs:
            assert a[i] == b[j]


class TestDiffSpans:
    def test_table1(self):
        spans = diff_spans(list("为什么会这样"), list("深圳的气候为什么会十分潮湿"))
        by_key = {(s.tag, s.slot): s for s in spans}
        add0 = by_key[("[ADD]", 0)]
        assert (add0.start, add0.end, add0.side) == (0, 5, "rewrite")
        del4 = by_key[("[DEL]", 4)]
        assert (del4.start, del4.end, del4.side) == (4, 6, "incomplete")
        add4 = by_key[("[ADD]", 4)]
        assert (add4.start, add4.end) == (9, 13)

    def test_equal_sequences(self):
        assert diff_spans("abc", "abc") == []

    def test_leading_deletion(self):
        spans = diff_spans("ab", "b")
        assert len(spans) == 1
        assert (spans[0].tag, spans[0].start, spans[0].end, spans[0].slot) == ("[DEL]", 0, 1, 0)

    @given(tokens, tokens)
    def test_spans_cover_non_lcs_tokens(self, x, y):
        pairs = lcs(x, y)
        x_anchor = {i for i, _ in pairs}
        y_anchor = {j for _, j in pairs}
        spans = diff_spans(x, y)
        covered_x = {i for s in spans if s.tag == "[DEL]" for i in range(s.start, s.end)}
        covered_y = {j for s in spans if s.tag == "[ADD]" for j in range(s.start, s.end)}
        assert covered_x == set(range(len(x))) - x_anchor
        assert covered_y == set(range(len(y))) - y_anchor


class TestDeriveEditMatrix:
    def test_table1_cells(self, table1):
        joint = build_joint(table1)
        matrix = derive_edit_matrix(table1, joint)
        assert matrix.shape == (13, 7)
        assert not matrix.lossy
        assert matrix.dropped_tokens == 0
        expected = np.zeros((13, 7), dtype=np.int8)
        expected[0:5, 0] = EditLabel.INSERT
        expected[9:13, 4:6] = EditLabel.SUBSTITUTE
        assert (matrix.labels == expected).all()

    def test_identity_rewrite(self):
        example = DialogueExample((("a", "b"),), ("c", "d"), ("c", "d"))
        matrix = derive_edit_matrix(example, build_joint(example))
        assert not matrix.labels.any()
        assert not matrix.lossy

    def test_unsourceable_token_lossy(self):
        example = DialogueExample((("a", "b"),), ("c",), ("z", "c"))
        matrix = derive_edit_matrix(example, build_joint(example))
        assert matrix.lossy
        assert matrix.dropped_tokens == 1

    def test_pure_deletion_lossy(self):
        example = DialogueExample((("a", "b"),), ("c", "d"), ("c",))
        matrix = derive_edit_matrix(example, build_joint(example))
        assert matrix.lossy

    def test_missing_gold(self):
        example = DialogueExample((("a",),), ("b",))
        with pytest.raises(MissingGold):
            derive_edit_matrix(example, build_joint(example))

    def test_most_recent_occurrence_preferred(self):
        # "b" occurs twice in context; the later position is the source
        example = DialogueExample((("b", "a", "b"),), ("c",), ("b", "c"))
        matrix = derive_edit_matrix(example, build_joint(example))
        assert matrix.labels[2, 0] == EditLabel.INSERT
        assert matrix.labels[0, 0] == EditLabel.NONE

    def test_sep_rows_never_labeled(self):
        for example in make_corpus(3, 100):
            joint = build_joint(example)
            matrix = derive_edit_matrix(example, joint)
            for row, token in enumerate(joint.context):
                if token == SEP:
                    assert not matrix.labels[row].any()


class TestExtractProgram:
    def test_table1_program(self, table1):
        joint = build_joint(table1)
        program = extract_program(derive_edit_matrix(table1, joint).labels)
        assert program.columns[0].inserts == [(0, 5)]
        assert program.columns[4].substitutes == [(9, 13)]
        assert program.columns[5].substitutes == [(9, 13)]

    def test_all_none_empty(self):
        assert extract_program(np.zeros((3, 4), dtype=np.int8)).is_empty()

    def test_two_insert_runs_context_order(self):
        grid = np.zeros((6, 2), dtype=np.int8)
        grid[0, 0] = grid[1, 0] = EditLabel.INSERT
        grid[4, 0] = EditLabel.INSERT
        program = extract_program(grid)
        assert program.columns[0].inserts == [(0, 2), (4, 5)]

    def test_sentinel_substitute_dropped(self):
        grid = np.zeros((2, 3), dtype=np.int8)
        grid[0, 2] = EditLabel.SUBSTITUTE
        assert extract_program(grid).is_empty()

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_extract_encode_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        m, n = int(rng.integers(1, 8)), int(rng.integers(1, 6))
        grid = rng.integers(0, 3, size=(m, n + 1)).astype(np.int8)
        grid[:, n][grid[:, n] == EditLabel.SUBSTITUTE] = EditLabel.NONE
        assert (encode_program(extract_program(grid), m, n) == grid).all()


class TestApplyEdits:
    def test_table1_apply(self, table1):
        joint = build_joint(table1)
        program = extract_program(derive_edit_matrix(table1, joint).labels)
        out = apply_edits(joint.incomplete, program, joint.context)
        assert "".join(out) == "深圳的气候为什么会十分潮湿"

    def test_empty_program_identity(self):
        assert apply_edits(("a", "b"), EditProgram(), ("x",)) == ["a", "b"]

    def test_sentinel_insert_appends(self):
        program = EditProgram()
        program.column(2).inserts.append((0, 1))
        assert apply_edits(("a", "b"), program, ("x", "y")) == ["a", "b", "x"]

    def test_out_of_range_span(self):
        program = EditProgram()
        program.column(0).inserts.append((0, 5))
        with pytest.raises(MalformedProgram):
            apply_edits(("a",), program, ("x",))

    def test_out_of_range_column(self):
        program = EditProgram()
        program.column(9).inserts.append((0, 1))
        with pytest.raises(MalformedProgram):
            apply_edits(("a",), program, ("x",))

    def test_sep_never_emitted(self):
        program = EditProgram()
        program.column(0).inserts.append((0, 3))
        out = apply_edits(("z",), program, ("x", SEP, "y"))
        assert out == ["x", "y", "z"]

    def test_multi_column_substitute_emitted_once(self):
        program = EditProgram()
        program.column(0).substitutes.append((0, 2))
        program.column(1).substitutes.append((0, 2))
        assert apply_edits(("a", "b", "c"), program, ("x", "y")) == ["x", "y", "c"]


class TestRoundTrip:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_synthetic_round_trip(self, seed):
        for example in make_corpus(seed, 200):
            joint = build_joint(example)
            matrix = derive_edit_matrix(example, joint)
            assert not matrix.lossy
            out = apply_edits(joint.incomplete, extract_program(matrix.labels), joint.context)
            assert tuple(out) == example.rewrite

    def test_cells_json_shape(self, table1):
        joint = build_joint(table1)
        record = cells_json(derive_edit_matrix(table1, joint))
        assert record["lossy"] is False
        assert record["dropped"] == 0
        assert [0, 0, "I"] in record["cells"]
        assert [9, 4, "S"] in record["cells"]
