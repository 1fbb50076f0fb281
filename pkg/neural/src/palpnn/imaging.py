"""Latent-conditioned image synthesis and its training loops.

A trial's final touch state is decoded into a class image by iterative
refinement: a small U-Net repeatedly adds a correction to a latent image
that starts as pure noise, with a countdown plane telling it how far along
the refinement is and the touch state injected at the bottleneck. A
convolutional readout turns the final latent into per-pixel class logits.
Training applies cross entropy only after the full refinement, never to
intermediate latents.
"""

from __future__ import annotations

import logging
import time

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .config import EncoderConfig, ImagingConfig
from .data import reading_rms
from .encoder import ForceLocationEncoder, SequenceEncoder
from .errors import TrainingDivergedError
from .loss import permute_trajectories

log = logging.getLogger(__name__)


def _norm(channels: int) -> nn.Module:
    groups = 4 if channels % 4 == 0 else 1
    return nn.GroupNorm(groups, channels)


class _ConvBlock(nn.Module):
    def __init__(self, ch_in: int, ch_out: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(ch_in, ch_out, 3, padding=1), _norm(ch_out), nn.ReLU(),
            nn.Conv2d(ch_out, ch_out, 3, padding=1), _norm(ch_out), nn.ReLU())

    def forward(self, x):
        return self.net(x)


class CondUNet(nn.Module):
    """Three-scale U-Net over the latent image plus a countdown plane,
    with the touch state added (projected) at the bottleneck.

    The final convolution starts at zero, so a fresh network proposes the
    null correction and the refinement is the identity until training
    moves it.
    """

    def __init__(self, latent_channels: int, state_dim: int,
                 channels: tuple[int, int, int]):
        super().__init__()
        c1, c2, c3 = channels
        self.down1 = _ConvBlock(latent_channels + 1, c1)
        self.down2 = _ConvBlock(c1, c2)
        self.mid = _ConvBlock(c2, c3)
        self.inject = nn.Linear(state_dim, c3)
        self.reduce2 = nn.Conv2d(c3, c2, 1)
        self.up2 = _ConvBlock(2 * c2, c2)
        self.reduce1 = nn.Conv2d(c2, c1, 1)
        self.up1 = _ConvBlock(2 * c1, c1)
        self.out = nn.Conv2d(c1, latent_channels, 1)
        nn.init.zeros_(self.out.weight)
        nn.init.zeros_(self.out.bias)

    def forward(self, x: torch.Tensor, state: torch.Tensor) -> torch.Tensor:
        d1 = self.down1(x)
        d2 = self.down2(F.max_pool2d(d1, 2))
        mid = self.mid(F.max_pool2d(d2, 2))
        mid = mid + self.inject(state)[:, :, None, None]
        u2 = F.interpolate(mid, scale_factor=2, mode="nearest")
        u2 = self.up2(torch.cat([self.reduce2(u2), d2], dim=1))
        u1 = F.interpolate(u2, scale_factor=2, mode="nearest")
        u1 = self.up1(torch.cat([self.reduce1(u1), d1], dim=1))
        return self.out(u1)


class LatentImager(nn.Module):
    """Turn a touch state into a class image by iterative refinement."""

    def __init__(self, state_dim: int, cfg: ImagingConfig):
        super().__init__()
        self.cfg = cfg
        self.state_dim = state_dim
        self.unet = CondUNet(cfg.latent_channels, state_dim, cfg.channels)
        self.readout = nn.Sequential(
            nn.Conv2d(cfg.latent_channels, 16, 3, padding=1), nn.ReLU(),
            nn.Conv2d(16, 3, 1))

    def logits(self, states: torch.Tensor, noise: torch.Tensor,
               n_steps: int | None = None) -> torch.Tensor:
        """(B, S) states and (B, C, H, W) starting noise -> (B, 3, H, W).

        Runs the full refinement; the countdown plane falls from 1 to 0
        over ``n_steps`` refinement steps.
        """
        n_steps = n_steps or self.cfg.n_steps
        latent = noise
        b, _, h, w = noise.shape
        for t in torch.linspace(1.0, 0.0, n_steps):
            plane = noise.new_full((b, 1, h, w), float(t))
            latent = latent + self.unet(torch.cat([latent, plane], dim=1),
                                        states)
        return self.readout(latent)

    def predict_image(self, state: torch.Tensor, noise_seed: int,
                      n_steps: int | None = None) -> np.ndarray:
        """Class image for one state, deterministic given the noise seed.

        A single noise image is drawn from the seed; the refinement and
        readout contain no further randomness.
        """
        gen = torch.Generator().manual_seed(int(noise_seed))
        res = self.cfg.resolution
        noise = torch.randn((1, self.cfg.latent_channels, res, res),
                            generator=gen)
        with torch.no_grad():
            out = self.logits(state.unsqueeze(0), noise, n_steps)
        return out.argmax(dim=1).squeeze(0).numpy().astype(np.uint8)


def _class_weight(cfg: ImagingConfig):
    if cfg.class_weights is None:
        return None
    return torch.tensor(cfg.class_weights, dtype=torch.float32)


def train_imaging(states: torch.Tensor, images: np.ndarray,
                  cfg: ImagingConfig) -> tuple[LatentImager, dict]:
    """Fit an imager to (touch state, class image) pairs.

    The states are plain inputs here, so whatever encoder produced them is
    untouched by this training. Per-pixel cross entropy is applied to the
    logits after the full refinement. Deterministic given the config seed.
    """
    states = states.detach().float()
    targets = torch.from_numpy(np.ascontiguousarray(images)).long()
    n = states.shape[0]
    if targets.shape[0] != n:
        raise ValueError("states and images must pair up")
    if targets.shape[1] != cfg.resolution or targets.shape[2] != cfg.resolution:
        raise ValueError(
            f"images are {tuple(targets.shape[1:])}, config says "
            f"{cfg.resolution}")
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    model = LatentImager(states.shape[1], cfg)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    weight = _class_weight(cfg)

    epoch_loss = []
    started = time.perf_counter()
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        losses = []
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            noise = torch.randn((len(idx), cfg.latent_channels,
                                 cfg.resolution, cfg.resolution))
            out = model.logits(states[idx], noise)
            loss = F.cross_entropy(out, targets[idx], weight=weight)
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    f"imaging loss became non-finite at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(float(loss.detach()))
        epoch_loss.append(float(np.mean(losses)))
        log.info("imaging epoch %d/%d: loss %.4e",
                 epoch + 1, cfg.epochs, epoch_loss[-1])

    history = {"epoch_loss": epoch_loss,
               "seconds": time.perf_counter() - started}
    return model, history


class SupervisedImager(nn.Module):
    """The same architecture end to end: step embedder, recurrent core and
    imager in one module, trained from labels alone (no pretraining)."""

    def __init__(self, encoder_cfg: EncoderConfig, imaging_cfg: ImagingConfig,
                 force_scale: float = 1.0):
        super().__init__()
        self.embedder = ForceLocationEncoder(encoder_cfg.reading_dim,
                                             encoder_cfg.embed_dim, force_scale)
        self.recurrent = SequenceEncoder(encoder_cfg.embed_dim,
                                         encoder_cfg.state_dim)
        self.imager = LatentImager(encoder_cfg.state_dim, imaging_cfg)

    def final_state(self, centers: torch.Tensor,
                    readings: torch.Tensor) -> torch.Tensor:
        return self.recurrent(self.embedder(readings, centers))[-1]

    def logits(self, centers: torch.Tensor, readings: torch.Tensor,
               noise: torch.Tensor) -> torch.Tensor:
        return self.imager.logits(self.final_state(centers, readings)
                                  .unsqueeze(0), noise)


def supervised_step_indices(n_steps: int, block_length: int,
                            min_coverage: float) -> np.ndarray:
    """Steps whose running state gets a label: the last step of each press
    from ``min_coverage`` of the trial onward. Early states have touched
    too little of the body to be held to the full image.
    """
    n_blocks = max(1, n_steps // max(block_length, 1))
    first = max(1, int(round(min_coverage * n_blocks)))
    return np.arange(first, n_blocks + 1) * block_length - 1


def train_supervised_baseline(samples, encoder_cfg: EncoderConfig,
                              cfg: ImagingConfig) -> tuple[SupervisedImager, dict]:
    """Train the end-to-end baseline on (trial sequence, class image) pairs.

    Gradients reach every part, including the recurrent core; this is the
    labels-only comparison point for the pretrained pipeline. Every
    supervised step of a trial (see ``supervised_step_indices``) predicts
    the same image, in one batched imager pass per trial.
    """
    if not samples:
        raise ValueError("need at least one labelled sample")
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    scale = 1.0 / reading_rms([seq for seq, _ in samples])
    model = SupervisedImager(encoder_cfg, cfg, force_scale=scale)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    weight = _class_weight(cfg)

    tensors = []
    for seq, image in samples:
        picks = supervised_step_indices(seq.n_steps, seq.block_length,
                                        cfg.min_coverage)
        target = torch.from_numpy(np.ascontiguousarray(image)).long()
        tensors.append((
            torch.from_numpy(np.ascontiguousarray(seq.centers)).float(),
            torch.from_numpy(np.ascontiguousarray(seq.readings)).float(),
            torch.from_numpy(picks),
            target.unsqueeze(0).expand(len(picks), -1, -1)))

    epoch_loss = []
    started = time.perf_counter()
    for epoch in range(cfg.epochs):
        losses = []
        for idx in rng.permutation(len(tensors)):
            centers, readings, picks, target = tensors[idx]
            states = model.recurrent(model.embedder(readings, centers))[picks]
            noise = torch.randn((len(picks), cfg.latent_channels,
                                 cfg.resolution, cfg.resolution))
            out = model.imager.logits(states, noise)
            loss = F.cross_entropy(out, target, weight=weight)
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    f"baseline loss became non-finite at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(float(loss.detach()))
        epoch_loss.append(float(np.mean(losses)))
        log.info("baseline epoch %d/%d: loss %.4e",
                 epoch + 1, cfg.epochs, epoch_loss[-1])

    history = {"epoch_loss": epoch_loss,
               "seconds": time.perf_counter() - started}
    return model, history


def train_property_probe(states: torch.Tensor, targets: np.ndarray,
                         hidden: int = 128, epochs: int = 400,
                         lr: float = 1e-2, seed: int = 0):
    """Fit a small perceptron from touch states to lump properties.

    ``targets`` is (N, 3): center of mass x, center of mass y, lump area
    fraction. Plain squared error, full-batch. Returns (probe, history).
    """
    states = states.detach().float()
    target_t = torch.from_numpy(np.ascontiguousarray(targets)).float()
    torch.manual_seed(seed)
    probe = nn.Sequential(nn.Linear(states.shape[1], hidden), nn.ReLU(),
                          nn.Linear(hidden, 3))
    opt = torch.optim.Adam(probe.parameters(), lr=lr)
    epoch_loss = []
    for epoch in range(epochs):
        loss = (probe(states) - target_t).square().mean()
        if not torch.isfinite(loss):
            raise TrainingDivergedError(
                f"probe loss became non-finite at epoch {epoch}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        epoch_loss.append(float(loss.detach()))
    return probe, {"epoch_loss": epoch_loss}


def predict_ensemble(autoencoder, imager: LatentImager, seq, n_perm: int = 10,
                     seed: int = 0, n_steps: int | None = None) -> np.ndarray:
    """Stack of predicted class images under press-order reshuffles.

    The first member encodes the trial as recorded; the rest shuffle whole
    presses before encoding. Each member draws its own noise image from a
    seed derived from ``seed`` and its position, so the stack is
    deterministic. Returns (n_perm, H, W) uint8.
    """
    from .pretrain import encode_sequence

    if n_perm < 1:
        raise ValueError("n_perm must be at least 1")
    rng = np.random.default_rng(seed)
    images = []
    for member in range(n_perm):
        centers, readings = seq.centers, seq.readings
        if member > 0:
            centers, readings = permute_trajectories(
                centers, readings, seq.block_length, rng)
        state = encode_sequence(autoencoder, centers, readings)[-1]
        images.append(imager.predict_image(
            state, noise_seed=1_000_003 * seed + member, n_steps=n_steps))
    return np.stack(images)


def write_stack(stack_dir, stack: np.ndarray) -> None:
    """Write an ensemble as numbered class-image files the simulator's
    scoring tools can read as a prediction stack."""
    from pathlib import Path

    from . import formats

    stack_dir = Path(stack_dir)
    stack_dir.mkdir(parents=True, exist_ok=True)
    for i, image in enumerate(stack):
        formats.write_image(stack_dir / f"ens_{i:02d}.pimg", image)
