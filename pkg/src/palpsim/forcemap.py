"""Force-map baseline: locate stiff inclusions without any learning.

Each press trajectory is reduced to the mean probe pose and mean reading
norm over its final steps; pressing over a stiff lump produces larger
terminal forces. Those weighted points are splatted into an image with a
Gaussian kernel, and thresholding the image yields a lump mask that can be
scored like any predicted class map. The threshold is tuned on a validation
split by sweeping quantile levels of the map values.
"""

from __future__ import annotations

import math

import numpy as np

from .palpation import Trajectory
from .raster import DEFAULT_EXTENT, DEFAULT_RESOLUTION, LUMP, f1_class, pixel_centers, pixel_pitch


def terminal_stats(traj: Trajectory, frac: float = 0.1) -> tuple[np.ndarray, float]:
    """Mean pose and mean reading norm over the trailing fraction of steps."""
    if not 0.0 < frac <= 1.0:
        raise ValueError(f"frac must be in (0, 1], got {frac}")
    t = traj.n_steps
    m = max(1, math.ceil(frac * t))
    tail_poses = traj.poses[t - m:].astype(np.float64)
    tail_forces = traj.forces[t - m:].astype(np.float64)
    norms = np.sqrt(np.sum(tail_forces * tail_forces, axis=1))
    return tail_poses.mean(axis=0), float(norms.mean())


def trial_points(trajectories: list[Trajectory], frac: float = 0.1) -> np.ndarray:
    """(n, 3) array of [x, y, weight] summaries, one row per trajectory."""
    if not trajectories:
        raise ValueError("need at least one trajectory")
    rows = []
    for traj in trajectories:
        pose, w = terminal_stats(traj, frac)
        rows.append([pose[0], pose[1], w])
    return np.array(rows, dtype=np.float64)


def kde_map(points: np.ndarray, resolution: int = DEFAULT_RESOLUTION,
            extent=DEFAULT_EXTENT, bandwidth: float | None = None) -> np.ndarray:
    """Weighted Gaussian splat of [x, y, w] points onto the image grid.

    Default bandwidth is two pixel pitches. Returns a float64 (R, R) map.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise ValueError("need at least one point")
    px, py = pixel_pitch(extent, (resolution, resolution))
    if bandwidth is None:
        bandwidth = 2.0 * px
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    xs, ys = pixel_centers(extent, (resolution, resolution))
    image = np.zeros((resolution, resolution), dtype=np.float64)
    inv = 1.0 / (2.0 * bandwidth * bandwidth)
    for x, y, w in pts:
        d2 = (xs[None, :] - x) ** 2 + (ys[:, None] - y) ** 2
        image += w * np.exp(-d2 * inv)
    return image


def threshold_mask(image: np.ndarray, threshold: float) -> np.ndarray:
    """Binarize a force map into a lump-class image (values 0 and 2)."""
    return np.where(np.asarray(image) >= threshold, LUMP, 0).astype(np.uint8)


def tune_threshold(images: list[np.ndarray], gts: list[np.ndarray],
                   n_levels: int = 64) -> tuple[float, float]:
    """Pick the threshold maximizing mean lump F1 over a validation set.

    Candidates are quantiles of the pooled map values at ``n_levels`` evenly
    spaced levels. Returns (threshold, mean_f1); ties keep the lowest level.
    """
    if len(images) != len(gts) or not images:
        raise ValueError("need equally many maps and ground truths, at least one")
    if n_levels < 1:
        raise ValueError("need at least one candidate level")
    pooled = np.concatenate([np.asarray(im).ravel() for im in images])
    levels = np.linspace(0.0, 1.0, n_levels)
    candidates = np.quantile(pooled, levels)
    best_thr = float(candidates[0])
    best_f1 = -1.0
    for thr in candidates:
        score = float(np.mean([
            f1_class(threshold_mask(im, thr), gt, LUMP)
            for im, gt in zip(images, gts)
        ]))
        if score > best_f1:
            best_f1 = score
            best_thr = float(thr)
    return best_thr, best_f1
