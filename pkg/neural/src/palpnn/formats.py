"""Readers and one writer for the palpation dataset's on-disk artifacts.

The simulator that generates the datasets defines three artifact kinds,
little-endian throughout:

press recordings (``.palp``)
    magic ``b"PALP"``, u32 format version (1), u32 step count T, u32 pose
    width (2), u32 reading width K, then T rows of 2 + K float32 values
    (probe center, then the flattened per-point force reading), then T
    status bytes whose bit 0 means that step's solve converged.

class images (``.pimg``)
    magic ``b"PIMG"``, u16 height, u16 width, then height * width class
    bytes row-major with row 0 at the top. Class ids: 0 background,
    1 tissue, 2 lump.

``manifest.json``
    schema_version 1, generation counts and config echo, and a ``bodies``
    list with one record per body carrying per-trial file paths, the lump
    geometry and the change flag.

This module is an independent implementation of those layouts so the
learning code needs no import from the simulator package. Readers check
magic, version and declared sizes against the actual byte count and raise
FormatError on mismatch instead of guessing. ``write_image`` emits the same
image layout, which is how prediction stacks are handed back to the
simulator's scoring tools.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError

RECORDING_MAGIC = b"PALP"
RECORDING_VERSION = 1
IMAGE_MAGIC = b"PIMG"
MANIFEST_SCHEMA = 1

_RECORDING_HEADER = struct.Struct("<4sIIII")
_IMAGE_HEADER = struct.Struct("<4sHH")

# reject absurd headers before allocating anything
_MAX_STEPS = 10_000_000
_MAX_READING = 100_000


@dataclass(frozen=True)
class PressRecording:
    """One recorded press: probe centers, sensor readings, solve status.

    ``centers`` is (T, 2) float32 world coordinates of the probe center at
    each recorded step; ``readings`` is (T, K) float32 with K twice the
    probe point count (per-point force vectors, flattened); ``flags`` is
    (T,) uint8 raw status bytes.
    """

    centers: np.ndarray
    readings: np.ndarray
    flags: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.centers.shape[0]

    @property
    def reading_width(self) -> int:
        return self.readings.shape[1]

    @property
    def converged(self) -> np.ndarray:
        """Per-step convergence bit as a boolean array."""
        return (self.flags & 1).astype(bool)


def recording_from_bytes(blob: bytes) -> PressRecording:
    if len(blob) < _RECORDING_HEADER.size:
        raise FormatError(f"recording blob too short: {len(blob)} bytes")
    magic, version, t, pose_dim, k = _RECORDING_HEADER.unpack_from(blob)
    if magic != RECORDING_MAGIC:
        raise FormatError(f"bad recording magic: {magic!r}")
    if version != RECORDING_VERSION:
        raise FormatError(f"unsupported recording version: {version}")
    if pose_dim != 2:
        raise FormatError(f"unsupported pose width: {pose_dim}")
    if t < 1 or t > _MAX_STEPS or k < 1 or k > _MAX_READING:
        raise FormatError(f"implausible recording header: T={t} K={k}")
    expected = _RECORDING_HEADER.size + t * (pose_dim + k) * 4 + t
    if len(blob) != expected:
        raise FormatError(
            f"recording size mismatch: header implies {expected} bytes, "
            f"got {len(blob)}")
    rows = np.frombuffer(blob, dtype="<f4", count=t * (pose_dim + k),
                         offset=_RECORDING_HEADER.size).reshape(t, pose_dim + k)
    if not np.all(np.isfinite(rows)):
        raise FormatError("recording payload contains non-finite values")
    flags = np.frombuffer(blob, dtype=np.uint8, count=t,
                          offset=_RECORDING_HEADER.size + rows.nbytes)
    return PressRecording(centers=rows[:, :pose_dim].astype(np.float32),
                          readings=rows[:, pose_dim:].astype(np.float32),
                          flags=flags.copy())


def read_recording(path: str | Path) -> PressRecording:
    return recording_from_bytes(Path(path).read_bytes())


def image_from_bytes(blob: bytes) -> np.ndarray:
    if len(blob) < _IMAGE_HEADER.size:
        raise FormatError(f"image blob too short: {len(blob)} bytes")
    magic, h, w = _IMAGE_HEADER.unpack_from(blob)
    if magic != IMAGE_MAGIC:
        raise FormatError(f"bad image magic: {magic!r}")
    expected = _IMAGE_HEADER.size + h * w
    if len(blob) != expected:
        raise FormatError(
            f"image size mismatch: header implies {expected} bytes, "
            f"got {len(blob)}")
    arr = np.frombuffer(blob, dtype=np.uint8,
                        offset=_IMAGE_HEADER.size).reshape(h, w)
    if arr.size and arr.max() > 2:
        raise FormatError(f"class id {int(arr.max())} out of range")
    return arr.copy()


def read_image(path: str | Path) -> np.ndarray:
    """Read a class image as a (H, W) uint8 array."""
    return image_from_bytes(Path(path).read_bytes())


def image_bytes(classes: np.ndarray) -> bytes:
    arr = np.asarray(classes)
    if arr.ndim != 2:
        raise FormatError(f"class image must be 2D, got shape {arr.shape}")
    if arr.shape[0] > 0xFFFF or arr.shape[1] > 0xFFFF:
        raise FormatError(f"image too large for format: {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > 2):
        raise FormatError("class image values must be 0, 1 or 2")
    header = _IMAGE_HEADER.pack(IMAGE_MAGIC, arr.shape[0], arr.shape[1])
    return header + arr.astype(np.uint8).tobytes()


def write_image(path: str | Path, classes: np.ndarray) -> None:
    """Write a class image atomically (temp file, then rename)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(image_bytes(classes))
    tmp.replace(path)


def read_manifest(path: str | Path) -> dict:
    try:
        manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict):
        raise FormatError("manifest root must be an object")
    version = manifest.get("schema_version")
    if version != MANIFEST_SCHEMA:
        raise FormatError(f"unsupported manifest schema: {version}")
    if not isinstance(manifest.get("bodies"), list):
        raise FormatError("manifest lacks a bodies list")
    return manifest
