"""Shared fixtures: a small simulated dataset and models trained on it.

The dataset comes from the simulator's command line (the only way this
package touches the simulator) and is cached under PALPNN_TEST_CACHE, or
~/.cache/palpnn-tests, so repeat runs skip the generation. Everything
trained on it is rebuilt every run; only raw data is cached.

Scale is deliberately small so the whole suite runs on one desktop core:
16 bodies, 2 trials each, 32 presses per trial, 32 px images, and encoder
sizes a notch down from the production defaults. The split is 10 bodies
for training pools and 6 held out whole for change detection; imaging
splits the pool's 20 trials 14/6 at trial granularity.
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import torch

from palpnn import data, formats
from palpnn.config import EncoderConfig, ImagingConfig, PretrainConfig
from palpnn.imaging import (supervised_step_indices, train_imaging,
                            train_supervised_baseline)
from palpnn.pretrain import encode_sequence, final_state, pretrain

DATASET_SEED = 102
N_BODIES = 16
N_TRIALS = 2
N_PRESSES = 32
N_EVAL_BODIES = 6
RESOLUTION = 32
RECIPE = "v2"
# Desk deviations from the generator's defaults, chosen so the tiny
# dataset carries enough signal to learn from in seconds: deeper presses,
# sensor noise cut to a fifth of the per-step force scale, and lumps
# placed nearer the pressed surface where their force signature is
# strongest. Half the bodies change between trials.
CONFIG_TEXT = (
    "p_change = 0.5\n"
    "press_depth = 0.15\n"
    "raster_resolution = 32\n"
    "sigma_noise = 5e-6\n"
    "center_lump_lo = 0.60\n"
    "center_lump_hi = 0.70\n"
    "r_lump_change_lo = 0.10\n"
    "r_lump_change_hi = 0.15\n"
    "r_lump_nochange_lo = 0.15\n"
    "r_lump_nochange_hi = 0.21\n"
)

SEEDS = (0, 1, 2)
LABEL_FRACTION = 0.25

DESK_ENCODER = EncoderConfig(reading_dim=32, embed_dim=32, state_dim=64,
                             decoder_pe_dim=64, decoder_hidden=(128, 64),
                             n_anchors=16, n_queries=16)
# At desk scale the default rate is too timid: readings are normalized to
# unit rms inside pretrain, and 1e-3 halves the loss in 30 epochs where
# 1e-4 barely moves it.
PRETRAIN_EPOCHS = 30
PRETRAIN_LR = 1e-3
DESK_IMAGING = ImagingConfig(resolution=RESOLUTION, latent_channels=4,
                             n_steps=4, channels=(8, 16, 24), lr=1e-3,
                             epochs=30, batch_size=8,
                             class_weights=(1.0, 1.0, 8.0))

SIM = [sys.executable, "-m", "palpsim.cli"]


def run_sim(*args: str, timeout: float = 600.0) -> dict:
    """Run the simulator CLI; returns its JSON payload."""
    proc = subprocess.run([*SIM, *args], capture_output=True, text=True,
                          timeout=timeout)
    if proc.returncode != 0:
        raise RuntimeError(
            f"simulator CLI failed ({proc.returncode}): {args}\n{proc.stderr}")
    return json.loads(proc.stdout) if proc.stdout.strip() else {}


@pytest.fixture(scope="session")
def dataset_root() -> Path:
    cache = Path(os.environ.get("PALPNN_TEST_CACHE",
                                Path.home() / ".cache" / "palpnn-tests"))
    root = cache / f"ds-{RECIPE}-s{DATASET_SEED}-b{N_BODIES}-t{N_PRESSES}"
    manifest_path = root / "manifest.json"
    if manifest_path.exists():
        manifest = formats.read_manifest(manifest_path)
        if (manifest["master_seed"], manifest["n_bodies"],
                manifest["n_traj"]) == (DATASET_SEED, N_BODIES, N_PRESSES):
            return root
    cache.mkdir(parents=True, exist_ok=True)
    cfg_path = cache / f"mini-{RECIPE}.cfg"
    cfg_path.write_text(CONFIG_TEXT, encoding="utf-8")
    run_sim("generate", "--out", str(root), "--seed", str(DATASET_SEED),
            "--n-bodies", str(N_BODIES), "--n-traj", str(N_PRESSES),
            "--config", str(cfg_path), "--overwrite", "--quiet",
            timeout=3600.0)
    return root


@pytest.fixture(scope="session")
def manifest(dataset_root) -> dict:
    return formats.read_manifest(dataset_root / "manifest.json")


@pytest.fixture(scope="session")
def body_split(manifest):
    """(pool bodies, held-out eval bodies), split at body level."""
    return data.split_bodies(manifest["bodies"], N_EVAL_BODIES)


@pytest.fixture(scope="session")
def sequences(dataset_root, manifest) -> dict:
    """Every trial sequence, keyed by (body index, trial)."""
    out = {}
    for body in manifest["bodies"]:
        for trial in range(N_TRIALS):
            out[(body["index"], trial)] = data.load_trial_sequence(
                dataset_root, body, trial)
    return out


@pytest.fixture(scope="session")
def ground_truths(dataset_root, manifest) -> dict:
    out = {}
    for body in manifest["bodies"]:
        for trial in range(N_TRIALS):
            out[(body["index"], trial)] = data.load_ground_truth(
                dataset_root, body, trial)
    return out


@pytest.fixture(scope="session")
def imaging_split(body_split):
    """(train pairs, test pairs) over the pool bodies' trials."""
    pool, _ = body_split
    return data.split_trials(pool, N_TRIALS, test_fraction=0.3,
                             rng=np.random.default_rng(717))


@pytest.fixture(scope="session")
def labeled_quarter(imaging_split):
    """The fixed label-restricted subset of the training trials."""
    train, _ = imaging_split
    rng = np.random.default_rng(909)
    n = max(1, round(LABEL_FRACTION * len(train)))
    picked = rng.choice(len(train), size=n, replace=False)
    return [train[i] for i in sorted(picked)]


def _pretrain_set(sequences, imaging_split):
    train, _ = imaging_split
    return [sequences[pair] for pair in train]


@pytest.fixture(scope="session")
def aug_models(sequences, imaging_split):
    """Pretrained autoencoders with press shuffling, one per seed."""
    seqs = _pretrain_set(sequences, imaging_split)
    return [pretrain(seqs, DESK_ENCODER,
                     PretrainConfig(epochs=PRETRAIN_EPOCHS, lr=PRETRAIN_LR,
                                    seed=s, permute=True))
            for s in SEEDS]


@pytest.fixture(scope="session")
def noaug_models(sequences, imaging_split):
    """The same pretraining with the augmentation turned off."""
    seqs = _pretrain_set(sequences, imaging_split)
    return [pretrain(seqs, DESK_ENCODER,
                     PretrainConfig(epochs=PRETRAIN_EPOCHS, lr=PRETRAIN_LR,
                                    seed=s, permute=False))
            for s in SEEDS]


def states_for(model, sequences, pairs) -> torch.Tensor:
    return torch.stack([final_state(model, sequences[p]) for p in pairs])


def _head_cfg(seed: int) -> ImagingConfig:
    from dataclasses import replace
    return replace(DESK_IMAGING, seed=seed)


def head_training_set(model, sequences, ground_truths, pairs):
    """States and target images for fitting a head: the running state at
    every supervised press of each trial (same schedule as the end-to-end
    baseline), all sharing that trial's image. Cheap augmentation that
    matters at this scale: 14 labelled trials alone underdetermine a
    conv decoder, 25 states each pin it down.
    """
    states, images = [], []
    for p in pairs:
        seq = sequences[p]
        all_states = encode_sequence(model, seq.centers, seq.readings)
        for step in supervised_step_indices(seq.n_steps, seq.block_length,
                                            DESK_IMAGING.min_coverage):
            states.append(all_states[step])
            images.append(ground_truths[p])
    return torch.stack(states), np.stack(images)


def train_heads(models, sequences, ground_truths, pairs):
    """One imaging head per pretrained model, fit on the given trials."""
    heads = []
    for seed, (model, _) in zip(SEEDS, models):
        states, images = head_training_set(model, sequences,
                                           ground_truths, pairs)
        head, _ = train_imaging(states, images, _head_cfg(seed))
        heads.append(head)
    return heads


@pytest.fixture(scope="session")
def full_heads_aug(aug_models, sequences, ground_truths, imaging_split):
    train, _ = imaging_split
    return train_heads(aug_models, sequences, ground_truths, train)


@pytest.fixture(scope="session")
def full_heads_noaug(noaug_models, sequences, ground_truths, imaging_split):
    train, _ = imaging_split
    return train_heads(noaug_models, sequences, ground_truths, train)


@pytest.fixture(scope="session")
def quarter_heads_aug(aug_models, sequences, ground_truths, labeled_quarter):
    return train_heads(aug_models, sequences, ground_truths, labeled_quarter)


@pytest.fixture(scope="session")
def supervised_models(sequences, ground_truths, labeled_quarter):
    """End-to-end baselines on the label-restricted subset, per seed."""
    samples = [(sequences[p], ground_truths[p]) for p in labeled_quarter]
    out = []
    for seed in SEEDS:
        model, _ = train_supervised_baseline(samples, DESK_ENCODER,
                                             _head_cfg(seed))
        out.append(model)
    return out
