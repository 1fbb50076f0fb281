"""Stack comparison math, pinned to exactly computable cases."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from palpsim.changedetect import (DEFAULT_C, DEFAULT_THRESHOLD, auc_score,
                                  change_score, classify_change,
                                  confidence_map, confusion_counts, score_map,
                                  size_change_score, stack_stats)
from palpsim.raster import LUMP


def test_stack_stats_identical_images():
    img = np.arange(6, dtype=np.float64).reshape(2, 3)
    mean, std = stack_stats(np.stack([img, img, img]))
    np.testing.assert_array_equal(mean, img)
    np.testing.assert_array_equal(std, 0.0)


def test_stack_stats_binary_flicker():
    stack = np.stack([np.zeros((2, 2)), np.ones((2, 2))])
    mean, std = stack_stats(stack)
    np.testing.assert_array_equal(mean, 0.5)
    np.testing.assert_array_equal(std, 0.5)  # population std, not sample


def test_stack_stats_permutation_invariant():
    gen = np.random.default_rng(8)
    stack = gen.uniform(size=(5, 4, 4))
    m1, s1 = stack_stats(stack)
    m2, s2 = stack_stats(stack[[3, 0, 4, 1, 2]])
    np.testing.assert_allclose(m1, m2, atol=1e-15)
    np.testing.assert_allclose(s1, s2, atol=1e-15)


def test_stack_stats_rejects_thin_or_misshaped_stacks():
    with pytest.raises(ValueError):
        stack_stats(np.zeros((1, 4, 4)))
    with pytest.raises(ValueError):
        stack_stats(np.zeros((4, 4)))


def test_confidence_exact_values():
    zero = np.zeros((2, 2))
    # both stds equal to C -> C / (C + C) = 0.5 exactly
    c = confidence_map(np.full((2, 2), DEFAULT_C), np.full((2, 2), DEFAULT_C))
    np.testing.assert_array_equal(c, 0.5)
    # perfectly stable stacks -> full confidence
    np.testing.assert_array_equal(confidence_map(zero, zero), 1.0)
    # C=0.1 against mean std 0.9 -> 0.1 / (0.1 + 0.9) = 0.1 exactly
    c = confidence_map(np.full((2, 2), 0.9), np.full((2, 2), 0.9), c_const=0.1)
    np.testing.assert_array_equal(c, 0.1)


def test_confidence_rejects_nonpositive_constant():
    with pytest.raises(ValueError):
        confidence_map(np.zeros((2, 2)), np.zeros((2, 2)), c_const=0.0)
    with pytest.raises(ValueError):
        confidence_map(np.zeros((2, 2)), np.zeros((2, 2)), c_const=-1.0)


def test_score_map_weights_the_gap():
    a = np.array([[1.0, 0.0]])
    b = np.array([[0.0, 0.0]])
    conf = np.array([[0.5, 1.0]])
    np.testing.assert_array_equal(score_map(a, b, conf), [[0.5, 0.0]])
    # order of the stacks cannot matter
    np.testing.assert_array_equal(score_map(b, a, conf), [[0.5, 0.0]])


def test_classify_change_is_strict():
    assert not classify_change(DEFAULT_THRESHOLD)
    assert classify_change(DEFAULT_THRESHOLD + 1e-12)
    assert not classify_change(0.05, threshold=0.05)
    assert classify_change(0.06, threshold=0.05)


def test_change_score_self_comparison_is_zero():
    gen = np.random.default_rng(11)
    stack = (gen.uniform(size=(4, 8, 8)) < 0.3).astype(np.float64) * LUMP
    res = change_score(stack, stack.copy())
    assert res.score == 0.0
    np.testing.assert_array_equal(res.score_map, 0.0)
    assert not res.is_change()


def test_change_score_hand_case():
    # 2x2 images, stacks of two. per pixel:
    #   pixel (0,0): a={0,0} b={2,2} -> means 0,2; stds 0 -> conf 1, gap 2
    #   pixel (0,1): a={2,0} b={2,0} -> equal means -> 0
    #   pixel (1,0): a={1,1} b={1,1} -> 0
    #   pixel (1,1): a={0,0} b={0,0} -> 0
    # score = (2 + 0 + 0 + 0) / 4 = 0.5 exactly
    a = np.array([[[0.0, 2.0], [1.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]])
    b = np.array([[[2.0, 2.0], [1.0, 0.0]], [[2.0, 0.0], [1.0, 0.0]]])
    res = change_score(a, b)
    assert res.score == pytest.approx(0.5, abs=1e-12)
    assert res.score_map[0, 0] == pytest.approx(2.0, abs=1e-12)
    assert res.confidence_map[0, 0] == 1.0
    # pixel (0,1) flickers in both stacks: std 1 each, conf C/(C+1)
    assert res.confidence_map[0, 1] == pytest.approx(
        DEFAULT_C / (DEFAULT_C + 1.0), abs=1e-15)
    assert res.is_change()


def test_change_score_single_pixel_blip():
    # one stable pixel differing by 1 with full confidence in a 128x128
    # frame contributes exactly 1/16384 to the mean
    a = np.zeros((2, 128, 128))
    b = np.zeros((2, 128, 128))
    b[:, 64, 64] = 1.0
    res = change_score(a, b)
    assert res.score == pytest.approx(1.0 / 16384.0, abs=1e-18)
    assert res.confidence_map[64, 64] == 1.0


def test_change_score_is_symmetric():
    gen = np.random.default_rng(12)
    a = (gen.uniform(size=(3, 6, 6)) < 0.4) * 2.0
    b = (gen.uniform(size=(3, 6, 6)) < 0.4) * 2.0
    ra = change_score(a, b)
    rb = change_score(b, a)
    assert ra.score == rb.score
    np.testing.assert_array_equal(ra.score_map, rb.score_map)


def test_change_score_monotone_in_mean_gap():
    base = np.zeros((2, 4, 4))
    scores = []
    for gap in (0.0, 0.5, 1.0, 2.0):
        other = np.full((2, 4, 4), gap)
        scores.append(change_score(base, other).score)
    assert scores == sorted(scores)
    assert scores[0] == 0.0 and scores[-1] > scores[1]


def test_change_score_rejects_mismatched_shapes():
    with pytest.raises(ValueError):
        change_score(np.zeros((2, 4, 4)), np.zeros((2, 5, 5)))


@given(st.integers(min_value=0, max_value=10**6))
@settings(max_examples=30)
def test_change_score_nonnegative_and_bounded(seed):
    gen = np.random.default_rng(seed)
    a = (gen.uniform(size=(3, 5, 5)) < 0.5) * 2.0
    b = (gen.uniform(size=(3, 5, 5)) < 0.5) * 2.0
    res = change_score(a, b)
    assert 0.0 <= res.score <= 2.0
    assert np.all(res.confidence_map > 0)
    assert np.all(res.confidence_map <= 1.0)


def test_size_change_score():
    small = np.zeros((2, 8, 8), dtype=np.uint8)
    small[:, :2, :2] = LUMP  # 4 lump pixels per image
    big = np.zeros((2, 8, 8), dtype=np.uint8)
    big[:, :4, :2] = LUMP  # 8 lump pixels
    got = size_change_score(small, big, extent=(0.0, 1.0, 0.0, 1.0))
    # pitch 1/8 -> pixel area 1/64; gap of 4 pixels
    assert got == pytest.approx(4 / 64, rel=1e-12)
    assert size_change_score(small, small) == 0.0


def test_auc_hand_cases():
    assert auc_score([0, 1], [0.1, 0.9]) == 1.0
    assert auc_score([1, 0], [0.1, 0.9]) == 0.0
    assert auc_score([0, 1, 0, 1], [0.1, 0.9, 0.2, 0.8]) == 1.0
    # ties split the credit
    assert auc_score([0, 1], [0.5, 0.5]) == 0.5
    assert auc_score([0, 1, 1], [0.5, 0.5, 0.9]) == pytest.approx(0.75)


def test_auc_validates_inputs():
    with pytest.raises(ValueError):
        auc_score([0, 0], [0.1, 0.2])
    with pytest.raises(ValueError):
        auc_score([1, 1], [0.1, 0.2])
    with pytest.raises(ValueError):
        auc_score([0, 1, 1], [0.1, 0.2])


def test_confusion_counts():
    labels = [True, True, False, False, True]
    preds = [True, False, True, False, True]
    got = confusion_counts(labels, preds)
    assert got == {"tp": 2, "fp": 1, "fn": 1, "tn": 1}
    with pytest.raises(ValueError):
        confusion_counts([True], [True, False])
