"""Binary on-disk formats, the dataset manifest, and content hashing.

Trajectory files (little-endian throughout):

    bytes 0..3   magic b"PALP"
    u32          format version, currently 1
    u32          T, number of recorded steps
    u32          pose dimension, currently 2
    u32          K, force reading width (2 * probe points)
    T records    pose (2 float32) then reading (K float32)
    T bytes      per-step flags, bit 0 = solver converged

Image files:

    bytes 0..3   magic b"PIMG"
    u16          height
    u16          width
    H*W bytes    class ids row-major, row 0 at the top; values 0, 1, 2

Readers validate magic, version, declared sizes against the actual byte
count, and class-id range; any mismatch raises FormatError rather than
returning a best-effort object. Round-trips are bit-exact: what you read is
byte for byte what was written.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .palpation import Trajectory
from .raster import GroundTruthImage

TRAJ_MAGIC = b"PALP"
TRAJ_VERSION = 1
IMG_MAGIC = b"PIMG"
MANIFEST_SCHEMA = 1

_TRAJ_HEADER = struct.Struct("<4sIIII")
_IMG_HEADER = struct.Struct("<4sHH")

# sanity caps so corrupt headers fail fast instead of allocating gigabytes
_MAX_STEPS = 10_000_000
_MAX_WIDTH = 100_000


def _atomic_write_bytes(path: Path, blob: bytes) -> None:
    # write to a sibling tmp file, rename into place; readers never see a
    # half-written file
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    tmp.replace(path)


def trajectory_bytes(traj: Trajectory) -> bytes:
    """Serialize a trajectory to its wire form."""
    if not (np.all(np.isfinite(traj.poses)) and np.all(np.isfinite(traj.forces))):
        raise FormatError("trajectory payload contains non-finite values")
    t = traj.n_steps
    k = traj.forces.shape[1]
    header = _TRAJ_HEADER.pack(TRAJ_MAGIC, TRAJ_VERSION, t, 2, k)
    body = np.concatenate(
        [traj.poses.astype("<f4"), traj.forces.astype("<f4")], axis=1)
    return header + body.tobytes() + traj.flags.astype(np.uint8).tobytes()


def write_trajectory(path: str | Path, traj: Trajectory) -> None:
    _atomic_write_bytes(Path(path), trajectory_bytes(traj))


def trajectory_from_bytes(blob: bytes) -> Trajectory:
    """Parse wire bytes back into a Trajectory (angle is not stored)."""
    if len(blob) < _TRAJ_HEADER.size:
        raise FormatError(f"trajectory blob too short: {len(blob)} bytes")
    magic, version, t, pose_dim, k = _TRAJ_HEADER.unpack_from(blob)
    if magic != TRAJ_MAGIC:
        raise FormatError(f"bad trajectory magic: {magic!r}")
    if version != TRAJ_VERSION:
        raise FormatError(f"unsupported trajectory version: {version}")
    if pose_dim != 2:
        raise FormatError(f"unsupported pose dimension: {pose_dim}")
    if t > _MAX_STEPS or k > _MAX_WIDTH:
        raise FormatError(f"implausible trajectory header: T={t} K={k}")
    if t < 2:
        raise FormatError(f"trajectory must record at least two steps, got {t}")
    expected = _TRAJ_HEADER.size + t * (pose_dim + k) * 4 + t
    if len(blob) != expected:
        raise FormatError(
            f"trajectory size mismatch: header implies {expected} bytes, "
            f"got {len(blob)}")
    rec = np.frombuffer(blob, dtype="<f4", count=t * (pose_dim + k),
                        offset=_TRAJ_HEADER.size).reshape(t, pose_dim + k)
    if not np.all(np.isfinite(rec)):
        raise FormatError("trajectory payload contains non-finite values")
    flags = np.frombuffer(blob, dtype=np.uint8, count=t,
                          offset=_TRAJ_HEADER.size + t * (pose_dim + k) * 4)
    return Trajectory(poses=rec[:, :pose_dim].astype(np.float32),
                      forces=rec[:, pose_dim:].astype(np.float32),
                      flags=flags.copy(), angle=None)


def read_trajectory(path: str | Path) -> Trajectory:
    return trajectory_from_bytes(Path(path).read_bytes())


def image_bytes(image) -> bytes:
    """Serialize a class image (GroundTruthImage or uint8-like 2D array)."""
    arr = image.classes if isinstance(image, GroundTruthImage) else np.asarray(image)
    if arr.ndim != 2:
        raise FormatError(f"class image must be 2D, got shape {arr.shape}")
    if arr.shape[0] > 65535 or arr.shape[1] > 65535:
        raise FormatError(f"image too large for format: {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > 2):
        raise FormatError("class image values must be 0, 1 or 2")
    header = _IMG_HEADER.pack(IMG_MAGIC, arr.shape[0], arr.shape[1])
    return header + arr.astype(np.uint8).tobytes()


def write_image(path: str | Path, image) -> None:
    _atomic_write_bytes(Path(path), image_bytes(image))


def image_from_bytes(blob: bytes) -> np.ndarray:
    """Parse wire bytes into a (H, W) uint8 class array."""
    if len(blob) < _IMG_HEADER.size:
        raise FormatError(f"image blob too short: {len(blob)} bytes")
    magic, h, w = _IMG_HEADER.unpack_from(blob)
    if magic != IMG_MAGIC:
        raise FormatError(f"bad image magic: {magic!r}")
    expected = _IMG_HEADER.size + h * w
    if len(blob) != expected:
        raise FormatError(
            f"image size mismatch: header implies {expected} bytes, got {len(blob)}")
    arr = np.frombuffer(blob, dtype=np.uint8, offset=_IMG_HEADER.size).reshape(h, w)
    if arr.size and arr.max() > 2:
        raise FormatError(f"class id {int(arr.max())} out of range")
    return arr.copy()


def read_image(path: str | Path) -> np.ndarray:
    return image_from_bytes(Path(path).read_bytes())


def write_manifest(path: str | Path, manifest: dict) -> None:
    """Write the manifest atomically (tmp file, then rename)."""
    path = Path(path)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                   encoding="utf-8")
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
        raise FormatError(f"unsupported manifest schema_version: {version!r}")
    for key in ("master_seed", "n_bodies", "bodies", "config"):
        if key not in manifest:
            raise FormatError(f"manifest missing required key '{key}'")
    return manifest


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def tree_hash(root: str | Path) -> str:
    """Content hash of a directory tree.

    Files are visited in sorted relative-path order; each contributes its
    path and its sha256. Two trees hash equal iff they contain the same
    files with the same bytes.
    """
    root = Path(root)
    h = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        rel = path.relative_to(root).as_posix()
        h.update(rel.encode("utf-8"))
        h.update(b"\0")
        h.update(bytes.fromhex(file_digest(path)))
    return h.hexdigest()
