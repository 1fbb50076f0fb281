"""Checkpoints: a weights archive next to a JSON description.

A checkpoint is a directory holding

    weights.npz   flat name -> array map of the module's state dict
    meta.json     kind tag, the config needed to rebuild the module,
                  the training history, and any extra fields the trainer
                  recorded (e.g. the input normalization)

Both files are written to temp names and renamed into place, so a reader
never sees a half-written checkpoint. Arrays keep their trained dtype.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from .config import EncoderConfig
from .errors import FormatError

CHECKPOINT_FORMAT = "palpnn-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(ckpt_dir: str | Path, module: torch.nn.Module, kind: str,
                    config, history: dict | None = None,
                    extra: dict | None = None) -> None:
    ckpt_dir = Path(ckpt_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    arrays = {name: tensor.detach().cpu().numpy()
              for name, tensor in module.state_dict().items()}
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": kind,
        "config": asdict(config) if hasattr(config, "__dataclass_fields__")
                  else dict(config),
        "history": history or {},
        "extra": extra or {},
    }
    wpath = ckpt_dir / "weights.npz"
    tmp = wpath.with_name("weights.npz.tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    tmp.replace(wpath)
    mpath = ckpt_dir / "meta.json"
    tmp = mpath.with_name("meta.json.tmp")
    tmp.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                   encoding="utf-8")
    tmp.replace(mpath)


def load_checkpoint(ckpt_dir: str | Path) -> tuple[dict, dict]:
    """Read a checkpoint directory; returns (meta, state dict of tensors)."""
    ckpt_dir = Path(ckpt_dir)
    try:
        meta = json.loads((ckpt_dir / "meta.json").read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FormatError(f"{ckpt_dir} holds no checkpoint") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"checkpoint meta is not valid JSON: {exc}") from exc
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise FormatError(f"not a checkpoint: format {meta.get('format')!r}")
    if meta.get("version") != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version: {meta.get('version')}")
    with np.load(ckpt_dir / "weights.npz") as archive:
        state = {name: torch.from_numpy(archive[name].copy())
                 for name in archive.files}
    return meta, state


def load_autoencoder(ckpt_dir: str | Path):
    """Rebuild a pretrained autoencoder from its checkpoint."""
    from .encoder import PalpationAutoencoder

    meta, state = load_checkpoint(ckpt_dir)
    if meta["kind"] != "autoencoder":
        raise FormatError(f"checkpoint holds a {meta['kind']!r}, "
                          "expected an autoencoder")
    raw = dict(meta["config"])
    raw["decoder_hidden"] = tuple(raw["decoder_hidden"])
    model = PalpationAutoencoder(EncoderConfig(**raw))
    model.load_state_dict(state)
    return model, meta
