"""Configuration dataclasses for the encoder, pretraining and imaging."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class EncoderConfig:
    """Sizes of the touch representation stack.

    ``reading_dim`` must match the sensor width of the data (twice the
    probe point count). ``embed_dim`` and ``decoder_pe_dim`` carry
    sinusoidal position features split as sin/cos pairs per coordinate, so
    both must be divisible by four.
    """

    reading_dim: int = 32
    embed_dim: int = 256
    state_dim: int = 1024
    decoder_pe_dim: int = 1020
    decoder_hidden: tuple[int, ...] = (2048, 1024)
    n_anchors: int = 64
    n_queries: int = 64

    def __post_init__(self):
        for name in ("reading_dim", "embed_dim", "state_dim",
                     "decoder_pe_dim", "n_anchors", "n_queries"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not self.decoder_hidden or any(h <= 0 for h in self.decoder_hidden):
            raise ValueError("decoder_hidden must be positive sizes")
        if self.embed_dim % 4 or self.decoder_pe_dim % 4:
            raise ValueError("position feature widths must be divisible by 4")


@dataclass(frozen=True)
class PretrainConfig:
    """Hyperparameters of the self-supervised pretraining loop."""

    epochs: int = 30
    lr: float = 1e-4
    seed: int = 0
    permute: bool = True
    # None means: use the sizes from the encoder config, clipped to the
    # sequence length
    n_anchors: int | None = None
    n_queries: int | None = None

    def __post_init__(self):
        if self.epochs <= 0 or self.lr <= 0:
            raise ValueError("epochs and lr must be positive")


@dataclass(frozen=True)
class ImagingConfig:
    """Shape and training knobs of the latent-conditioned imager."""

    resolution: int = 128
    latent_channels: int = 8
    n_steps: int = 8
    channels: tuple[int, int, int] = (16, 32, 64)
    lr: float = 1e-3
    epochs: int = 40
    batch_size: int = 8
    seed: int = 0
    # optional per-class loss weights (background, tissue, lump)
    class_weights: tuple[float, float, float] | None = None
    # earliest fraction of a trial whose running state is supervised when
    # training end to end; later states of the same trial share the label
    min_coverage: float = 0.25

    def __post_init__(self):
        if self.resolution <= 0 or self.resolution % 4:
            raise ValueError("resolution must be a positive multiple of 4")
        if self.latent_channels <= 0 or self.n_steps <= 0:
            raise ValueError("latent_channels and n_steps must be positive")
        if len(self.channels) != 3 or any(c <= 0 for c in self.channels):
            raise ValueError("channels must be three positive sizes")
        if self.epochs <= 0 or self.lr <= 0 or self.batch_size <= 0:
            raise ValueError("epochs, lr and batch_size must be positive")
        if not 0.0 < self.min_coverage <= 1.0:
            raise ValueError("min_coverage must be in (0, 1]")
