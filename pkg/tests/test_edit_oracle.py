import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levtdiag.corpus import PLD
from levtdiag.edit_oracle import (EditLabels, ScriptOverflowError, apply_edit,
                                  levenshtein_distance, optimal_edit_labels, rollin_drop,
                                  rollin_mask, rollin_model_sample, sample_categorical)
from oracles import brute_edit_cost

short = st.lists(st.sampled_from("abcde"), max_size=8)


class FixedRng:
    """Stands in for a Generator when a test needs to force the drop ratio."""

    def __init__(self, r):
        self.r = r

    def random(self, size=None):
        return self.r if size is None else np.full(size, 0.5)


def test_distance_examples():
    assert levenshtein_distance("abc", "abc") == 0
    assert levenshtein_distance("ad", "abcd") == 2
    assert levenshtein_distance("x", "a") == 2


@settings(max_examples=300)
@given(short, short)
def test_distance_matches_brute_force(a, b):
    assert levenshtein_distance(a, b) == brute_edit_cost(a, b)


def test_labels_identity():
    lab = optimal_edit_labels("abc", "abc")
    assert lab.del_labels == (0, 0, 0)
    assert lab.ins_counts == (0, 0, 0, 0)
    assert lab.fills == ()


def test_labels_two_insertions():
    lab = optimal_edit_labels("ad", "abcd")
    assert lab.del_labels == (0, 0)
    assert lab.ins_counts == (0, 2, 0)
    assert lab.fills == ("b", "c")
    assert lab.gap_fills() == [(), ("b", "c"), ()]
    assert apply_edit("ad", lab) == tuple("abcd")


def test_labels_substitution_is_delete_plus_insert():
    lab = optimal_edit_labels("x", "a")
    assert lab.del_labels == (1,)
    assert sum(lab.ins_counts) == 1 and lab.fills == ("a",)
    assert lab.cost == 2


def test_empty_rollin_has_one_gap():
    lab = optimal_edit_labels((), "abc")
    assert lab.ins_counts == (3,)


def test_apply_identity_and_delete_all():
    assert apply_edit("abc", EditLabels((0, 0, 0), (0, 0, 0, 0), ())) == tuple("abc")
    assert apply_edit("abc", EditLabels((1, 1, 1), (0, 0, 0, 0), ())) == ()


def test_apply_rejects_bad_shape():
    with pytest.raises(ValueError):
        apply_edit("abc", EditLabels((0, 0), (0, 0, 0), ()))


def test_overflow():
    with pytest.raises(ScriptOverflowError) as err:
        optimal_edit_labels((), ["a"] * 300)
    assert err.value.count == 300
    assert optimal_edit_labels((), ["a"] * 255).ins_counts == (255,)


def test_to_json_fields():
    lab = optimal_edit_labels("ad", "abcd")
    assert '"ins_counts": [0, 2, 0]' in lab.to_json("ad")


@settings(max_examples=500)
@given(short, short)
def test_round_trip_and_cost(a, b):
    lab = optimal_edit_labels(a, b)
    assert apply_edit(a, lab) == tuple(b)
    assert lab.cost == levenshtein_distance(a, b)
    assert len(lab.del_labels) == len(a) and len(lab.ins_counts) == len(a) + 1


@given(short, short)
def test_labels_deterministic(a, b):
    assert optimal_edit_labels(a, b) == optimal_edit_labels(a, b)


@settings(max_examples=300)
@given(st.lists(st.sampled_from("abc"), min_size=1, max_size=8), st.data())
def test_placeholder_is_free_wildcard(ref, data):
    mask = data.draw(st.lists(st.booleans(), min_size=len(ref), max_size=len(ref)))
    masked = rollin_mask(ref, mask, pld=PLD)
    lab = optimal_edit_labels(masked, ref, pld=PLD)
    assert lab.cost == 0
    assert lab.slot_fills == tuple(t for t, m in zip(ref, mask) if m)
    assert apply_edit(masked, lab, pld=PLD) == tuple(ref)


def test_rollin_drop_forced_ratios():
    ref = tuple("abcd")
    assert rollin_drop(ref, FixedRng(0.0)) == (ref, (False,) * 4)
    assert rollin_drop(ref, FixedRng(1.0)) == ((), (True,) * 4)


def test_rollin_drop_reproducible_and_mask_consistent():
    ref = tuple("abcdefghij")
    one = rollin_drop(ref, np.random.default_rng(7))
    two = rollin_drop(ref, np.random.default_rng(7))
    assert one == two
    kept, mask = one
    assert kept == tuple(t for t, m in zip(ref, mask) if not m)
    masked = rollin_mask(ref, mask, pld="<pld>")
    assert [i for i, t in enumerate(masked) if t == "<pld>"] == [i for i, m in enumerate(mask) if m]


def test_rollin_mask_examples():
    assert rollin_mask("abc", [False] * 3) == tuple("abc")
    assert rollin_mask("abc", [False, True, False], pld="<pld>") == ("a", "<pld>", "c")
    with pytest.raises(ValueError):
        rollin_mask("abc", [True])


def test_model_sample_deterministic_cases():
    rng = np.random.default_rng(0)
    assert rollin_model_sample([[0.3], [1.0], [-2.0]], rng) == (0, 0, 0)
    assert all(rollin_model_sample([[1e9, -1e9]], rng) == (0,) for _ in range(100))


def test_model_sample_uniform_counts():
    rng = np.random.default_rng(123)
    draws = rollin_model_sample([[0.0, 0.0]] * 10000, rng)
    n0 = draws.count(0)
    assert abs(n0 - 5000) <= 300
    assert abs((10000 - n0) - 5000) <= 300


def test_sample_rejects_bad_scores():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        sample_categorical([], rng)
    with pytest.raises(ValueError):
        sample_categorical([0.0, np.nan], rng)
