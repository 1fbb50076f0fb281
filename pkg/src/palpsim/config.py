"""Run configuration: dataclasses plus a plain-text ``key = value`` loader.

The file format is intentionally minimal. One assignment per line, ``#`` starts
a comment, blank lines ignored. Keys are flat and listed in ``CONFIG_KEYS``;
anything else raises :class:`ConfigError` so a typo cannot silently fall back
to a default.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError


@dataclass
class ProbeConfig:
    """Circular probe: point ring, penalty stiffness, sensor noise."""

    radius: float = 0.1
    n_points: int = 16
    stiffness: float = 0.01
    noise_sigma: float = 1e-4


@dataclass
class SolverConfig:
    """Adam settings for the quasi-static equilibrium solves."""

    lr: float = 1e-3
    beta1: float = 0.2
    beta2: float = 0.999
    eps: float = 1e-8
    tol: float = 1e-6
    max_iters: int = 2000


@dataclass
class BodyConfig:
    """Distributions for body geometry, materials and lump placement."""

    r_model_mu: float = 1.0
    r_model_sigma: float = 0.01
    l_grid: float = 0.15
    l_perimeter: float = 0.1
    sigma_jitter: float = 0.001
    mu_ym_lo: float = 0.0027
    mu_ym_hi: float = 0.0033
    sigma_ym: float = 0.0002
    mu_pr_lo: float = 0.09
    mu_pr_hi: float = 0.11
    sigma_pr: float = 0.01
    ym_lump: float = 0.01
    pr_lump: float = 0.1
    p_change: float = 0.1
    p_lump: float = 1.0
    center_lump_lo: float = 0.44
    center_lump_hi: float = 0.55
    r_lump_change_lo: float = 0.07
    r_lump_change_hi: float = 0.15
    r_lump_nochange_lo: float = 0.11
    r_lump_nochange_hi: float = 0.21
    delta_r_lump_mu: float = 0.03
    delta_r_lump_sigma: float = 0.01


@dataclass
class PressConfig:
    """Probe approach and press schedule."""

    step: float = 0.01          # inward travel per pose
    depth: float = 0.25         # travel recorded after first contact
    start_clearance: float = 2.0  # start at body_radius + clearance*probe_radius


@dataclass
class DatasetConfig:
    """Top-level bundle consumed by dataset generation and the CLI."""

    n_bodies: int = 1000
    n_trials: int = 2
    n_traj: int = 32
    raster_resolution: int = 128
    body: BodyConfig = field(default_factory=BodyConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    press: PressConfig = field(default_factory=PressConfig)


# flat file key -> (section attribute or None for top level, field name)
CONFIG_KEYS = {
    "n_bodies": (None, "n_bodies"),
    "n_trials": (None, "n_trials"),
    "n_traj": (None, "n_traj"),
    "raster_resolution": (None, "raster_resolution"),
    "sigma_noise": ("probe", "noise_sigma"),
    "n_points": ("probe", "n_points"),
    "r_probe": ("probe", "radius"),
    "kappa_collision": ("probe", "stiffness"),
    "lr": ("solver", "lr"),
    "beta1": ("solver", "beta1"),
    "beta2": ("solver", "beta2"),
    "eps": ("solver", "eps"),
    "tol": ("solver", "tol"),
    "max_iters": ("solver", "max_iters"),
    "press_step": ("press", "step"),
    "press_depth": ("press", "depth"),
    "start_clearance": ("press", "start_clearance"),
    "r_model_mu": ("body", "r_model_mu"),
    "r_model_sigma": ("body", "r_model_sigma"),
    "l_grid": ("body", "l_grid"),
    "l_perimeter": ("body", "l_perimeter"),
    "sigma_jitter": ("body", "sigma_jitter"),
    "mu_ym_lo": ("body", "mu_ym_lo"),
    "mu_ym_hi": ("body", "mu_ym_hi"),
    "sigma_ym": ("body", "sigma_ym"),
    "mu_pr_lo": ("body", "mu_pr_lo"),
    "mu_pr_hi": ("body", "mu_pr_hi"),
    "sigma_pr": ("body", "sigma_pr"),
    "ym_lump": ("body", "ym_lump"),
    "pr_lump": ("body", "pr_lump"),
    "p_change": ("body", "p_change"),
    "p_lump": ("body", "p_lump"),
    "center_lump_lo": ("body", "center_lump_lo"),
    "center_lump_hi": ("body", "center_lump_hi"),
    "r_lump_change_lo": ("body", "r_lump_change_lo"),
    "r_lump_change_hi": ("body", "r_lump_change_hi"),
    "r_lump_nochange_lo": ("body", "r_lump_nochange_lo"),
    "r_lump_nochange_hi": ("body", "r_lump_nochange_hi"),
    "delta_r_lump_mu": ("body", "delta_r_lump_mu"),
    "delta_r_lump_sigma": ("body", "delta_r_lump_sigma"),
}


def _coerce(key: str, raw: str, kind: type) -> int | float:
    try:
        if kind is int:
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"value for '{key}' is not a {kind.__name__}: {raw!r}") from exc


def apply_overrides(cfg: DatasetConfig, pairs: dict[str, str]) -> DatasetConfig:
    """Apply flat string key/value pairs onto a config, in place."""
    for key, raw in pairs.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key: '{key}'")
        section, name = CONFIG_KEYS[key]
        target = cfg if section is None else getattr(cfg, section)
        current = getattr(target, name)
        setattr(target, name, _coerce(key, raw, type(current)))
    return cfg


def load_config(path: str | Path, base: DatasetConfig | None = None) -> DatasetConfig:
    """Parse a ``key = value`` file into a :class:`DatasetConfig`.

    Unknown keys, malformed lines and non-numeric values all raise
    :class:`ConfigError`. ``base`` lets callers layer a file on top of an
    existing config; by default a fresh default config is used.
    """
    cfg = base if base is not None else DatasetConfig()
    pairs: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if not key or not raw:
            raise ConfigError(f"{path}:{lineno}: empty key or value in {line!r}")
        if key in pairs:
            raise ConfigError(f"{path}:{lineno}: duplicate key '{key}'")
        pairs[key] = raw
    return apply_overrides(cfg, pairs)


def config_to_dict(cfg: DatasetConfig) -> dict:
    """Nested plain-dict echo of a config, suitable for JSON manifests."""
    return dataclasses.asdict(cfg)
