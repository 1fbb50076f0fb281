"""Neural pieces that turn a press sequence into a latent touch state.

The stack mirrors how the data is laid out: each recorded step pairs a
probe center with a force reading. Steps are embedded one at a time, a
recurrent core folds them left to right into a running state, and a
decoder answers "what would the sensor read at this position" from any
state. Training the decoder against held-back steps is what shapes the
state (see ``loss`` and ``pretrain``).
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .config import EncoderConfig

# geometric wavelength span of the position features, in world units:
# the short end resolves sub-probe detail, the long end covers the whole
# workspace without phase wrapping
WAVELENGTH_LO = 0.02
WAVELENGTH_HI = 4.0


def position_code(centers: torch.Tensor, dim: int) -> torch.Tensor:
    """Sinusoidal features of 2D positions, shape (..., dim).

    Each coordinate gets dim/4 geometrically spaced wavelengths between
    ``WAVELENGTH_LO`` and ``WAVELENGTH_HI``, contributing a sin and a cos
    channel. Deterministic, no parameters; dtype and device follow the
    input.
    """
    if dim % 4:
        raise ValueError(f"position code width must be divisible by 4, got {dim}")
    if centers.shape[-1] != 2:
        raise ValueError(f"positions must be (..., 2), got {tuple(centers.shape)}")
    n_waves = dim // 4
    waves = torch.logspace(math.log10(WAVELENGTH_LO), math.log10(WAVELENGTH_HI),
                           n_waves, dtype=centers.dtype, device=centers.device)
    ang = 2.0 * math.pi * centers.unsqueeze(-1) / waves
    feats = torch.cat([torch.sin(ang), torch.cos(ang)], dim=-1)
    return feats.reshape(*centers.shape[:-1], dim)


class ForceLocationEncoder(nn.Module):
    """Embed one step: a two-layer perceptron on the scaled reading, plus
    the position code of the probe center, summed elementwise.

    The perceptron's output layer starts at zero, so a fresh module embeds
    position alone and the reading pathway grows in during training.
    ``force_scale`` is a fixed normalization (readings are tiny in raw
    units); it is a buffer, saved with the weights, and shared with the
    decoder so the whole reading pathway trains at O(1) magnitudes.
    """

    def __init__(self, reading_dim: int, embed_dim: int,
                 force_scale: float = 1.0):
        super().__init__()
        self.lift = nn.Linear(reading_dim, embed_dim)
        self.mix = nn.Linear(embed_dim, embed_dim)
        nn.init.zeros_(self.mix.weight)
        nn.init.zeros_(self.mix.bias)
        self.register_buffer("force_scale",
                             torch.tensor(float(force_scale)))

    def forward(self, readings: torch.Tensor,
                centers: torch.Tensor) -> torch.Tensor:
        h = torch.relu(self.lift(readings * self.force_scale))
        return self.mix(h) + position_code(centers, self.mix.out_features)


class SequenceEncoder(nn.Module):
    """Single-layer GRU over step embeddings, zero initial state.

    The state after step t depends only on steps up to t, so any prefix of
    a sequence encodes to the same states as the full sequence does over
    that prefix.
    """

    def __init__(self, embed_dim: int, state_dim: int):
        super().__init__()
        self.gru = nn.GRU(embed_dim, state_dim, batch_first=True)

    def forward(self, embeds: torch.Tensor) -> torch.Tensor:
        """(T, E) -> (T, H), or batched (B, T, E) -> (B, T, H)."""
        squeeze = embeds.dim() == 2
        if squeeze:
            embeds = embeds.unsqueeze(0)
        states, _ = self.gru(embeds)
        return states.squeeze(0) if squeeze else states


class ForceDecoder(nn.Module):
    """Predict the sensor reading at a query position from a touch state.

    The state is projected to the position-feature width, summed with the
    query's position code, and pushed through a perceptron. The output
    layer starts at zero: a fresh decoder predicts the zero reading
    everywhere, which is the right prior for a sensor that mostly reads
    near zero.
    """

    def __init__(self, state_dim: int, reading_dim: int,
                 pe_dim: int = 1020, hidden: tuple[int, ...] = (2048, 1024)):
        super().__init__()
        if pe_dim % 4:
            raise ValueError(f"pe_dim must be divisible by 4, got {pe_dim}")
        self.inject = nn.Linear(state_dim, pe_dim)
        widths = (pe_dim,) + tuple(hidden)
        layers = []
        for a, b in zip(widths[:-1], widths[1:]):
            layers += [nn.Linear(a, b), nn.ReLU()]
        layers.append(nn.Linear(widths[-1], reading_dim))
        nn.init.zeros_(layers[-1].weight)
        nn.init.zeros_(layers[-1].bias)
        self.mlp = nn.Sequential(*layers)
        self.pe_dim = pe_dim

    def forward(self, states: torch.Tensor,
                centers: torch.Tensor) -> torch.Tensor:
        base = self.inject(states) + position_code(centers, self.pe_dim)
        return self.mlp(base)


class PalpationAutoencoder(nn.Module):
    """The full stack: step embedder, recurrent core, reading decoder."""

    def __init__(self, cfg: EncoderConfig, force_scale: float = 1.0):
        super().__init__()
        self.cfg = cfg
        self.embedder = ForceLocationEncoder(cfg.reading_dim, cfg.embed_dim,
                                             force_scale)
        self.recurrent = SequenceEncoder(cfg.embed_dim, cfg.state_dim)
        self.decoder = ForceDecoder(cfg.state_dim, cfg.reading_dim,
                                    cfg.decoder_pe_dim, cfg.decoder_hidden)

    def encode(self, centers: torch.Tensor,
               readings: torch.Tensor) -> torch.Tensor:
        """States for every step of one sequence: (T, 2), (T, K) -> (T, H)."""
        return self.recurrent(self.embedder(readings, centers))

    def predict_reading(self, states: torch.Tensor,
                        centers: torch.Tensor) -> torch.Tensor:
        """Physical-unit readings. The decoder itself works in normalized
        units (same force_scale as the embedder input); descale here so
        optimizer step sizes stay matched to O(1) targets during training.
        """
        return self.decoder(states, centers) / self.embedder.force_scale
