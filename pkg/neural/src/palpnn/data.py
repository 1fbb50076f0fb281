"""Dataset walking, trial sequences, image labels and small metrics."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import formats
from .errors import FormatError

# world window the generator rasterizes into (x_lo, x_hi, y_lo, y_hi);
# fixed by the dataset tooling, needed to place pixels in world coordinates
WORLD_WINDOW = (-1.2, 1.2, -0.2, 2.2)

BACKGROUND, TISSUE, LUMP = 0, 1, 2


@dataclass(frozen=True)
class TrialSequence:
    """All recorded steps of one trial, presses concatenated in file order.

    ``block_length`` is the (shared) step count of each press, so the
    sequence is ``n_blocks`` equal blocks and block boundaries fall at
    multiples of it.
    """

    centers: np.ndarray
    readings: np.ndarray
    block_length: int

    @property
    def n_steps(self) -> int:
        return self.centers.shape[0]

    @property
    def n_blocks(self) -> int:
        return self.centers.shape[0] // self.block_length


def trial_record(body: dict, trial: int) -> dict:
    for rec in body["trials"]:
        if rec["trial"] == trial:
            return rec
    raise KeyError(f"body {body['index']} has no trial {trial}")


def load_trial_sequence(root: str | Path, body: dict,
                        trial: int) -> TrialSequence:
    """Load and concatenate a trial's press recordings, in manifest order."""
    root = Path(root)
    rec = trial_record(body, trial)
    presses = [formats.read_recording(root / rel) for rel in rec["trajectories"]]
    if not presses:
        raise FormatError(f"trial {trial} of body {body['index']} lists no presses")
    lengths = {p.n_steps for p in presses}
    widths = {p.reading_width for p in presses}
    if len(lengths) != 1 or len(widths) != 1:
        raise FormatError(
            f"presses of body {body['index']} trial {trial} disagree on "
            f"shape: steps {sorted(lengths)}, widths {sorted(widths)}")
    return TrialSequence(
        centers=np.concatenate([p.centers for p in presses]),
        readings=np.concatenate([p.readings for p in presses]),
        block_length=lengths.pop())


def load_ground_truth(root: str | Path, body: dict, trial: int) -> np.ndarray:
    return formats.read_image(Path(root) / trial_record(body, trial)["gt"])


@dataclass(frozen=True)
class LumpStats:
    """Lump pixels of a class image, summarized in world coordinates."""

    com_x: float
    com_y: float
    area_fraction: float
    n_pixels: int


def lump_stats(classes: np.ndarray, window=WORLD_WINDOW) -> LumpStats:
    """Center of mass and area of the lump class.

    Pixel centers sit at half-pitch offsets inside the window, row 0 at
    the top. An image with no lump pixels reports zero area and a center
    of mass at the window center.
    """
    h, w = classes.shape
    x_lo, x_hi, y_lo, y_hi = window
    rows, cols = np.nonzero(classes == LUMP)
    if rows.size == 0:
        return LumpStats(com_x=0.5 * (x_lo + x_hi), com_y=0.5 * (y_lo + y_hi),
                         area_fraction=0.0, n_pixels=0)
    px, py = (x_hi - x_lo) / w, (y_hi - y_lo) / h
    xs = x_lo + (cols + 0.5) * px
    ys = y_hi - (rows + 0.5) * py
    return LumpStats(com_x=float(xs.mean()), com_y=float(ys.mean()),
                     area_fraction=float(rows.size) / classes.size,
                     n_pixels=int(rows.size))


def reading_rms(sequences) -> float:
    """Root mean square of all readings across sequences; 1.0 when empty
    or all zero, so it is always a safe normalizer."""
    total, count = 0.0, 0
    for seq in sequences:
        total += float(np.sum(np.square(seq.readings, dtype=np.float64)))
        count += seq.readings.size
    rms = (total / max(count, 1)) ** 0.5
    return rms if rms > 0 else 1.0


def class_f1(pred: np.ndarray, truth: np.ndarray, cls: int) -> float:
    """F1 of one class; 1.0 when the class is absent from both images."""
    p = pred == cls
    t = truth == cls
    tp = int(np.sum(p & t))
    fp = int(np.sum(p & ~t))
    fn = int(np.sum(~p & t))
    if tp == 0 and fp == 0 and fn == 0:
        return 1.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def macro_f1(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean F1 over the three classes."""
    return float(np.mean([class_f1(pred, truth, c)
                          for c in (BACKGROUND, TISSUE, LUMP)]))


def split_trials(bodies: list[dict], n_trials: int, test_fraction: float,
                 rng: np.random.Generator) -> tuple[list, list]:
    """Random split of (body index, trial index) pairs, test set last.

    This is the split used for imaging: trials scatter across the two
    sides, so both trials of one body may land on different sides.
    """
    pairs = [(b["index"], t) for b in bodies for t in range(n_trials)]
    order = rng.permutation(len(pairs))
    n_test = max(1, int(round(test_fraction * len(pairs))))
    test = [pairs[i] for i in order[:n_test]]
    train = [pairs[i] for i in order[n_test:]]
    return train, test


def split_bodies(bodies: list[dict], n_eval: int) -> tuple[list[dict], list[dict]]:
    """Deterministic body-level split: the last ``n_eval`` bodies are held
    out whole, for evaluations that must not have seen either trial."""
    if not 0 < n_eval < len(bodies):
        raise ValueError(f"cannot hold out {n_eval} of {len(bodies)} bodies")
    return bodies[:-n_eval], bodies[-n_eval:]
