"""Dataset generation: many bodies, multiple trials each, written to disk.

Layout under the output directory:

    manifest.json
    bodies/body_00000/trial_0/traj_000.palp ... gt.pimg
    bodies/body_00000/trial_1/...
    bodies/body_00001/...

Trial 0 palpates the body exactly as generated. Later trials resample the
background materials around the body's means; on change-flagged bodies the
lump is grown once and all later trials see the grown lump, so trial 0 vs
trial 1 is the before/after pair. Every stochastic choice is keyed by
(master seed, body index, purpose), which makes the whole tree a pure
function of the config and the master seed: bodies can be generated in any
order or in parallel and the bytes come out identical. The manifest is
written last, so its presence marks a complete dataset.
"""

from __future__ import annotations

import dataclasses
import shutil
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable

from . import io as iomod
from . import rng as rngmod
from .bodygen import BodyModel, LumpSpec, apply_change, generate_body, perturb_materials
from .config import DatasetConfig, config_to_dict
from .palpation import collect_trial
from .raster import rasterize_body


def _lump_dict(lump: LumpSpec | None) -> dict | None:
    if lump is None:
        return None
    return {
        "center": [float(lump.center[0]), float(lump.center[1])],
        "radius": float(lump.radius),
        "young": float(lump.young),
        "poisson": float(lump.poisson),
    }


def body_trial_states(base: BodyModel, cfg: DatasetConfig,
                      n_trials: int) -> list[BodyModel]:
    """Materialize the body state palpated in each trial."""
    changed = base
    if base.change_flag and base.lump is not None:
        changed = apply_change(base, cfg.body,
                               rngmod.stream(base.seed, rngmod.CHANGE))
    states = [base]
    for t in range(1, n_trials):
        gen = rngmod.stream(base.seed, rngmod.MATERIAL_EPOCH_BASE + t)
        states.append(perturb_materials(changed, cfg.body, gen))
    return states


def generate_body_files(out_root: Path, body_index: int, master_seed: int,
                        cfg: DatasetConfig) -> dict:
    """Generate one body, run its trials, write its files; returns its record."""
    seed = rngmod.derive_seed(master_seed, body_index)
    base = generate_body(seed, cfg.body)
    states = body_trial_states(base, cfg, cfg.n_trials)

    body_dir = out_root / "bodies" / f"body_{body_index:05d}"
    trials = []
    try:
        for t, state in enumerate(states):
            trial_dir = body_dir / f"trial_{t}"
            trial_dir.mkdir(parents=True, exist_ok=True)
            noise = rngmod.stream(seed, rngmod.SENSOR_NOISE_BASE + t)
            trial = collect_trial(state, cfg.n_traj, cfg.probe, cfg.press,
                                  cfg.solver, rng=noise, body_id=body_index,
                                  trial_index=t, material_epoch=t)
            traj_paths = []
            for j, traj in enumerate(trial.trajectories):
                rel = f"bodies/body_{body_index:05d}/trial_{t}/traj_{j:03d}.palp"
                iomod.write_trajectory(out_root / rel, traj)
                traj_paths.append(rel)
            gt = rasterize_body(state, resolution=cfg.raster_resolution)
            gt_rel = f"bodies/body_{body_index:05d}/trial_{t}/gt.pimg"
            iomod.write_image(out_root / gt_rel, gt)
            trials.append({
                "trial": t,
                "trajectories": traj_paths,
                "gt": gt_rel,
                "lump": _lump_dict(state.lump),
                "n_unconverged": trial.n_unconverged,
            })
    except BaseException:
        # never leave a half-written body behind: a body dir either holds
        # every file its manifest record names, or does not exist
        shutil.rmtree(body_dir, ignore_errors=True)
        raise

    return {
        "index": body_index,
        "seed": int(seed),
        "body_radius": float(base.body_radius),
        "change_flag": bool(base.change_flag),
        "lump_initial": _lump_dict(base.lump),
        "lump_final": _lump_dict(states[-1].lump),
        "trials": trials,
    }


def _job(args) -> dict:
    out_root, body_index, master_seed, cfg = args
    return generate_body_files(Path(out_root), body_index, master_seed, cfg)


def generate_dataset(
    cfg: DatasetConfig,
    out_dir: str | Path,
    master_seed: int,
    threads: int = 1,
    overwrite: bool = False,
    progress: Callable[[int, int], None] | None = None,
) -> dict:
    """Generate the full dataset and return the manifest dict.

    ``threads`` > 1 fans bodies out over worker processes; results are
    identical to a serial run. Refuses to write into a directory that
    already holds a manifest unless ``overwrite`` is set.
    """
    out_root = Path(out_dir)
    manifest_path = out_root / "manifest.json"
    if manifest_path.exists() and not overwrite:
        raise FileExistsError(f"{manifest_path} exists; pass overwrite to replace")
    out_root.mkdir(parents=True, exist_ok=True)

    cfg = dataclasses.replace(cfg)
    indices = range(cfg.n_bodies)
    if threads > 1:
        jobs = [(str(out_root), i, master_seed, cfg) for i in indices]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = []
            for rec in pool.map(_job, jobs):
                records.append(rec)
                if progress is not None:
                    progress(len(records), cfg.n_bodies)
    else:
        records = []
        for i in indices:
            records.append(generate_body_files(out_root, i, master_seed, cfg))
            if progress is not None:
                progress(len(records), cfg.n_bodies)

    manifest = {
        "schema_version": iomod.MANIFEST_SCHEMA,
        "master_seed": int(master_seed),
        "n_bodies": cfg.n_bodies,
        "n_trials": cfg.n_trials,
        "n_traj": cfg.n_traj,
        "config": config_to_dict(cfg),
        "bodies": records,
    }
    iomod.write_manifest(manifest_path, manifest)
    return manifest
