"""The subsampled reconstruction objective and the press-block shuffle."""

from __future__ import annotations

import numpy as np
import torch


def reconstruction_loss(decoder, states: torch.Tensor, centers: torch.Tensor,
                        readings: torch.Tensor, n_anchors: int,
                        n_queries: int, rng: np.random.Generator) -> torch.Tensor:
    """Monte Carlo estimate of the all-pairs reconstruction error.

    The exhaustive objective asks every step's state to predict every
    step's reading:

        sum over anchor steps t, query steps u of
            || decoder(state_t, center_u) - reading_u ||^2,
        divided by 2 * n_anchors * n_queries.

    This estimator draws ``n_anchors`` anchor steps without replacement,
    and for each anchor an independent set of ``n_queries`` query steps,
    also without replacement. With ``n_anchors == n_queries == T`` every
    pair appears exactly once and the estimate equals the exhaustive
    average exactly; smaller values give an unbiased estimate. Asking for
    more anchors or queries than there are steps is an error.
    """
    t = states.shape[0]
    if n_anchors < 1 or n_queries < 1:
        raise ValueError("n_anchors and n_queries must be at least 1")
    if n_anchors > t or n_queries > t:
        raise ValueError(
            f"cannot draw {n_anchors} anchors and {n_queries} queries "
            f"without replacement from {t} steps")
    anchors = rng.choice(t, size=n_anchors, replace=False)
    queries = np.stack([rng.choice(t, size=n_queries, replace=False)
                        for _ in range(n_anchors)])
    z = states[anchors].unsqueeze(1).expand(-1, n_queries, -1)
    pred = decoder(z, centers[queries])
    diff = pred - readings[queries]
    return diff.square().sum() / (2.0 * n_anchors * n_queries)


def permute_trajectories(centers: np.ndarray, readings: np.ndarray,
                         block_length: int,
                         rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Reorder whole press blocks of a trial sequence, keeping the step
    order inside each block.

    A trial sequence is the concatenation of equally long press
    recordings; ``block_length`` is the steps per press. The sequence
    length must be an exact multiple of it.
    """
    t = centers.shape[0]
    if readings.shape[0] != t:
        raise ValueError("centers and readings must share length")
    if block_length < 1 or t % block_length:
        raise ValueError(
            f"sequence of {t} steps is not whole blocks of {block_length}")
    order = rng.permutation(t // block_length)
    idx = (order[:, None] * block_length
           + np.arange(block_length)[None, :]).reshape(-1)
    return centers[idx], readings[idx]
