import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyst.fusion import RankedList, interpolate, rrf


def rl(items, source="x"):
    return RankedList(items=items, source=source)


SPARSE = rl([("a", 12.0), ("b", 6.0), ("c", 3.0)], "sparse")
DENSE = rl([("b", 0.9), ("d", 0.5), ("a", 0.1)], "dense")


class TestRankedList:
    def test_rejects_duplicate_ids(self):
        with pytest.raises(ValueError, match="repeats"):
            rl([("a", 1.0), ("a", 0.5)])

    def test_rejects_increasing_scores(self):
        with pytest.raises(ValueError, match="non-increasing"):
            rl([("a", 1.0), ("b", 2.0)])

    def test_doc_ids(self):
        assert SPARSE.doc_ids == ["a", "b", "c"]


class TestInterpolate:
    def test_lambda_one_reduces_to_sparse_ordering(self):
        fused = interpolate(SPARSE, DENSE, 1.0, 10)
        union_sorted_by_sparse = ["a", "b", "c", "d"]  # d absent from sparse: score 0
        assert fused.doc_ids == union_sorted_by_sparse
        assert dict(fused.items)["d"] == 0.0

    def test_lambda_zero_reduces_to_dense_ordering(self):
        fused = interpolate(SPARSE, DENSE, 0.0, 10)
        assert fused.doc_ids == ["b", "d", "a", "c"]

    def test_three_item_fixture_matches_hand_computation(self):
        # sparse normalized: a=1, b=(6-3)/9=1/3, c=0
        # dense normalized: b=1, d=0.5, a=0
        # combined at 0.5: a=0.5, b=2/3, c=0, d=0.25
        fused = interpolate(SPARSE, DENSE, 0.5, 10)
        expected = {"a": 0.5, "b": (0.5 * (1 / 3) + 0.5 * 1.0), "c": 0.0, "d": 0.25}
        assert fused.doc_ids == ["b", "a", "d", "c"]
        for doc_id, score in fused.items:
            assert score == pytest.approx(expected[doc_id], abs=1e-12)

    def test_constant_list_maps_to_all_ones(self):
        flat = rl([("a", 2.0), ("b", 2.0)], "flat")
        fused = interpolate(flat, rl([], "empty"), 1.0, 10)
        assert dict(fused.items) == {"a": 1.0, "b": 1.0}

    def test_lambda_out_of_range(self):
        for lam in (-0.1, 1.1):
            with pytest.raises(ValueError, match="lambda"):
                interpolate(SPARSE, DENSE, lam, 5)

    def test_top_k_truncation_and_tie_break(self):
        fused = interpolate(SPARSE, DENSE, 0.5, 2)
        assert len(fused.items) == 2
        tie = interpolate(rl([("b", 1.0), ("a", 1.0)]), rl([], "e"), 1.0, 2)
        assert tie.doc_ids == ["a", "b"]

    def test_output_only_contains_input_docs(self):
        fused = interpolate(SPARSE, DENSE, 0.3, 100)
        assert set(fused.doc_ids) <= {"a", "b", "c", "d"}


class TestRRF:
    def test_single_list_preserves_order(self):
        fused = rrf([SPARSE], c=60, k=10)
        assert fused.doc_ids == SPARSE.doc_ids

    def test_rank_one_in_two_lists_scores_two_over_sixty_one(self):
        first = rl([("a", 5.0), ("b", 1.0)], "l1")
        second = rl([("a", 0.9), ("c", 0.2)], "l2")
        fused = rrf([first, second], c=60, k=10)
        assert dict(fused.items)["a"] == pytest.approx(2 / 61, abs=1e-15)

    def test_matches_direct_summation_oracle(self):
        import random

        rng = random.Random(11)
        docs = [f"d{i}" for i in range(20)]
        lists = []
        for i in range(3):
            chosen = rng.sample(docs, rng.randint(5, 15))
            scores = sorted((rng.uniform(0, 10) for _ in chosen), reverse=True)
            lists.append(rl(list(zip(chosen, scores)), f"l{i}"))
        fused = rrf(lists, c=60, k=50)
        expected = {}
        for ranked in lists:
            for position, (doc, _) in enumerate(ranked.items):
                expected[doc] = expected.get(doc, 0.0) + 1.0 / (60 + position + 1)
        assert dict(fused.items) == pytest.approx(expected)
        assert fused.doc_ids == sorted(expected, key=lambda d: (-expected[d], d))[:50]

    def test_requires_a_list(self):
        with pytest.raises(ValueError):
            rrf([], c=60, k=5)

    def test_c_must_be_positive(self):
        with pytest.raises(ValueError):
            rrf([SPARSE], c=0, k=5)

    def test_scores_strictly_positive(self):
        fused = rrf([SPARSE, DENSE], c=60, k=10)
        assert all(score > 0 for _, score in fused.items)


score_lists = st.lists(
    st.tuples(st.sampled_from("abcdefgh"), st.floats(0, 100, allow_nan=False)),
    max_size=8,
    unique_by=lambda t: t[0],
).map(lambda items: sorted(items, key=lambda t: -t[1]))


@settings(max_examples=100, deadline=None)
@given(a=score_lists, b=score_lists, lam=st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]))
def test_interpolate_symmetry_exact_for_dyadic_lambda(a, b, lam):
    # 1 - lam is exact for dyadic lam, so the identity holds item for item.
    left = interpolate(rl(a, "a"), rl(b, "b"), lam, 20)
    right = interpolate(rl(b, "b"), rl(a, "a"), 1.0 - lam, 20)
    assert left.items == right.items


@settings(max_examples=100, deadline=None)
@given(a=score_lists, b=score_lists, lam=st.floats(0.01, 0.99))
def test_interpolate_symmetry_scores_for_general_lambda(a, b, lam):
    # For general lam the combined scores agree only up to rounding, which
    # can swap exact-tie ordering; compare the score maps.
    left = dict(interpolate(rl(a, "a"), rl(b, "b"), lam, 20).items)
    right = dict(interpolate(rl(b, "b"), rl(a, "a"), 1.0 - lam, 20).items)
    assert left.keys() == right.keys()
    for doc_id, score in left.items():
        assert score == pytest.approx(right[doc_id], abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(a=score_lists, b=score_lists)
def test_fusions_ignore_docs_outside_inputs(a, b):
    union = {d for d, _ in a} | {d for d, _ in b}
    fused = interpolate(rl(a, "a"), rl(b, "b"), 0.5, 50)
    assert set(fused.doc_ids) <= union
    if a or b:
        fused_rrf = rrf([rl(a, "a"), rl(b, "b")], c=60, k=50)
        assert set(fused_rrf.doc_ids) <= union
