"""Self-supervised pretraining of the touch representation.

The training signal is purely the data: every state along a trial sequence
is asked to predict the sensor reading at other steps' probe positions
(see ``loss.reconstruction_loss``). Shuffling whole presses within a trial
is the one augmentation; it teaches the state to be about the body rather
than about the order the presses happened in.
"""

from __future__ import annotations

import logging
import time

import numpy as np
import torch

from .config import EncoderConfig, PretrainConfig
from .data import reading_rms
from .encoder import PalpationAutoencoder
from .errors import TrainingDivergedError
from .loss import permute_trajectories, reconstruction_loss

log = logging.getLogger(__name__)


def pretrain(sequences, encoder_cfg: EncoderConfig,
             train_cfg: PretrainConfig) -> tuple[PalpationAutoencoder, dict]:
    """Train a fresh autoencoder on trial sequences; returns (model, history).

    Deterministic given the config seed: weight init, the anchor/query
    subsampling and the press shuffle all derive from it. The per-epoch
    mean loss is logged and returned in the history. A non-finite loss
    aborts the run with TrainingDivergedError rather than training on.
    """
    if not sequences:
        raise ValueError("need at least one trial sequence")
    torch.manual_seed(train_cfg.seed)
    rng = np.random.default_rng(train_cfg.seed)

    scale = 1.0 / reading_rms(sequences)
    model = PalpationAutoencoder(encoder_cfg, force_scale=scale)
    opt = torch.optim.Adam(model.parameters(), lr=train_cfg.lr)

    n_anchors = train_cfg.n_anchors or encoder_cfg.n_anchors
    n_queries = train_cfg.n_queries or encoder_cfg.n_queries

    epoch_loss = []
    started = time.perf_counter()
    for epoch in range(train_cfg.epochs):
        order = rng.permutation(len(sequences))
        losses = []
        for idx in order:
            seq = sequences[idx]
            centers, readings = seq.centers, seq.readings
            if train_cfg.permute:
                centers, readings = permute_trajectories(
                    centers, readings, seq.block_length, rng)
            centers_t = torch.from_numpy(np.ascontiguousarray(centers)).float()
            readings_t = torch.from_numpy(np.ascontiguousarray(readings)).float()
            states = model.encode(centers_t, readings_t)
            # Targets in normalized units, matching the decoder's raw output;
            # a zero-predictor then scores near 0.5 regardless of units.
            loss = reconstruction_loss(
                model.decoder, states, centers_t, readings_t * scale,
                min(n_anchors, seq.n_steps), min(n_queries, seq.n_steps), rng)
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss became non-finite at epoch {epoch}, "
                    f"sequence {int(idx)}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(float(loss.detach()))
        epoch_loss.append(float(np.mean(losses)))
        log.info("pretrain epoch %d/%d: loss %.4e",
                 epoch + 1, train_cfg.epochs, epoch_loss[-1])

    history = {
        "epoch_loss": epoch_loss,
        "force_scale": scale,
        "n_sequences": len(sequences),
        "seconds": time.perf_counter() - started,
    }
    return model, history


def encode_sequence(model: PalpationAutoencoder, centers: np.ndarray,
                    readings: np.ndarray) -> torch.Tensor:
    """States for a whole sequence, gradient-free: (T, 2), (T, K) -> (T, H)."""
    with torch.no_grad():
        return model.encode(torch.from_numpy(np.ascontiguousarray(centers)).float(),
                            torch.from_numpy(np.ascontiguousarray(readings)).float())


def final_state(model: PalpationAutoencoder, seq) -> torch.Tensor:
    """The state after the last step of a trial sequence."""
    return encode_sequence(model, seq.centers, seq.readings)[-1]


def heldout_reconstruction(model: PalpationAutoencoder, seq):
    """Encode all but the last press of a trial; return that state plus the
    held-out press, for probing what the state knows about unvisited poses.
    """
    if seq.n_blocks < 2:
        raise ValueError("need at least two presses to hold one out")
    cut = seq.n_steps - seq.block_length
    state = encode_sequence(model, seq.centers[:cut], seq.readings[:cut])[-1]
    return state, seq.centers[cut:], seq.readings[cut:]


def reading_mse(model: PalpationAutoencoder, state: torch.Tensor,
                centers: np.ndarray, readings: np.ndarray) -> float:
    """Mean squared reading error of a state's predictions at given poses."""
    with torch.no_grad():
        centers_t = torch.from_numpy(np.ascontiguousarray(centers)).float()
        pred = model.predict_reading(
            state.unsqueeze(0).expand(centers_t.shape[0], -1), centers_t)
        target = torch.from_numpy(np.ascontiguousarray(readings)).float()
        return float((pred - target).square().mean())
