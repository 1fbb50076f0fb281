"""Change detection between two stacks of predicted class images.

Both trials of a body yield a stack of predictions (one per augmentation
permutation). Per pixel, the two stacks are compared by the absolute
difference of their means, downweighted where either stack is unstable: the
confidence factor is C / (C + mean of the two per-pixel standard
deviations), so pixels that flicker across permutations contribute little.
The scalar score is the mean of the weighted difference map; a body is
called changed when the score strictly exceeds the decision threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import LUMP, lump_size

DEFAULT_C = 0.25
DEFAULT_THRESHOLD = 0.1


def stack_stats(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel mean and population standard deviation of an image stack."""
    arr = np.asarray(stack, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"stack must be (P, H, W), got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise ValueError("stack needs at least two images")
    return arr.mean(axis=0), arr.std(axis=0)


def confidence_map(std_a: np.ndarray, std_b: np.ndarray,
                   c_const: float = DEFAULT_C) -> np.ndarray:
    """Per-pixel stability weight in (0, 1]: C / (C + mean of the stds)."""
    if c_const <= 0:
        raise ValueError(f"c_const must be positive, got {c_const}")
    return c_const / (c_const + 0.5 * (np.asarray(std_a, dtype=np.float64)
                                       + np.asarray(std_b, dtype=np.float64)))


def score_map(mean_a: np.ndarray, mean_b: np.ndarray,
              confidence: np.ndarray) -> np.ndarray:
    """Absolute mean difference, downweighted by the confidence map."""
    return np.abs(np.asarray(mean_a, dtype=np.float64)
                  - np.asarray(mean_b, dtype=np.float64)) * confidence


def classify_change(score: float, threshold: float = DEFAULT_THRESHOLD) -> bool:
    """Change call: true when the score strictly exceeds the threshold."""
    return score > threshold


@dataclass(frozen=True)
class ChangeScore:
    score: float
    score_map: np.ndarray
    confidence_map: np.ndarray

    def is_change(self, threshold: float = DEFAULT_THRESHOLD) -> bool:
        return self.score > threshold


def change_score(stack_a: np.ndarray, stack_b: np.ndarray,
                 c_const: float = DEFAULT_C) -> ChangeScore:
    """Confidence-weighted mean-difference score between two stacks."""
    mean_a, std_a = stack_stats(stack_a)
    mean_b, std_b = stack_stats(stack_b)
    if mean_a.shape != mean_b.shape:
        raise ValueError("stacks must share image shape")
    confidence = confidence_map(std_a, std_b, c_const)
    smap = score_map(mean_a, mean_b, confidence)
    return ChangeScore(score=float(smap.mean()), score_map=smap,
                       confidence_map=confidence)


def size_change_score(stack_a: np.ndarray, stack_b: np.ndarray,
                      extent=None) -> float:
    """Alternative classifier input: absolute lump-area difference.

    Uses the mean lump area across each stack, in world units.
    """
    sizes_a = [lump_size(img, extent) for img in np.asarray(stack_a)]
    sizes_b = [lump_size(img, extent) for img in np.asarray(stack_b)]
    return abs(float(np.mean(sizes_b)) - float(np.mean(sizes_a)))


def auc_score(labels, scores) -> float:
    """Area under the ROC curve via rank statistics, ties averaged."""
    y = np.asarray(labels, dtype=bool)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1:
        raise ValueError("labels and scores must be equal-length 1D arrays")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(y.size, dtype=np.float64)
    ranks[order] = np.arange(1, y.size + 1)
    # average ranks within tied groups
    sorted_scores = s[order]
    i = 0
    while i < y.size:
        j = i
        while j + 1 < y.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        if j > i:
            ranks[order[i:j + 1]] = 0.5 * (i + 1 + j + 1)
        i = j + 1
    rank_sum = ranks[y].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def confusion_counts(labels, predictions) -> dict[str, int]:
    """2x2 confusion table entries for boolean change calls."""
    y = np.asarray(labels, dtype=bool)
    p = np.asarray(predictions, dtype=bool)
    if y.shape != p.shape:
        raise ValueError("labels and predictions must share shape")
    return {
        "tp": int(np.sum(p & y)),
        "fp": int(np.sum(p & ~y)),
        "fn": int(np.sum(~p & y)),
        "tn": int(np.sum(~p & ~y)),
    }
