"""Command-line interface.

Subcommands: generate (build a dataset), render-gt (single ground-truth
image), metrics (score predicted class maps against ground truth),
force-map (no-learning lump localization from terminal forces),
change-score (compare prediction stacks between trials), inspect
(summarize a dataset). Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import changedetect, dataset, forcemap
from . import io as iomod
from .bodygen import generate_body
from .config import DatasetConfig, load_config
from .errors import FormatError, PalpsimError
from .raster import com_error, f1_class, f1_macro, rasterize_body, size_error
from .rng import derive_seed


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; route through our own code instead
    def error(self, message):
        raise _UsageError(message)


def _load_cfg(args) -> DatasetConfig:
    cfg = DatasetConfig()
    if getattr(args, "config", None):
        cfg = load_config(args.config, base=cfg)
    for name in ("n_bodies", "n_trials", "n_traj"):
        value = getattr(args, name.replace("-", "_"), None)
        if value is not None:
            setattr(cfg, name, value)
    return cfg


def _emit(payload: dict, quiet: bool = False) -> None:
    if not quiet:
        print(json.dumps(payload, indent=2, sort_keys=True))


def _cmd_generate(args) -> int:
    cfg = _load_cfg(args)

    def progress(done, total):
        if not args.quiet:
            print(f"body {done}/{total}", file=sys.stderr)

    manifest = dataset.generate_dataset(
        cfg, args.out, master_seed=args.seed, threads=args.threads,
        overwrite=args.overwrite, progress=progress)
    _emit({
        "out": str(args.out),
        "n_bodies": manifest["n_bodies"],
        "tree_hash": iomod.tree_hash(args.out),
    }, args.quiet)
    return 0


def _cmd_render_gt(args) -> int:
    cfg = _load_cfg(args)
    seed = derive_seed(args.seed, args.body) if args.body is not None else args.seed
    body = generate_body(seed, cfg.body)
    image = rasterize_body(body, resolution=args.resolution)
    iomod.write_image(args.out, image)
    _emit({"out": str(args.out), "lump": body.lump is not None,
           "change_flag": body.change_flag}, args.quiet)
    return 0


def _pimg_pairs(pred_dir: Path, gt_dir: Path) -> list[tuple[str, Path, Path]]:
    preds = sorted(pred_dir.glob("*.pimg"))
    if not preds:
        raise FormatError(f"no .pimg files in {pred_dir}")
    pairs = []
    for p in preds:
        g = gt_dir / p.name
        if not g.is_file():
            raise FormatError(f"no ground truth for {p.name} in {gt_dir}")
        pairs.append((p.name, p, g))
    return pairs


def _cmd_metrics(args) -> int:
    rows = []
    for name, p, g in _pimg_pairs(Path(args.pred), Path(args.gt)):
        pred = iomod.read_image(p)
        gt = iomod.read_image(g)
        rows.append({
            "name": name,
            "f1_macro": f1_macro(pred, gt),
            "f1_lump": f1_class(pred, gt, 2),
            "size_error": size_error(pred, gt),
            "com_error": com_error(pred, gt),
        })
    means = {
        key: float(np.nanmean([r[key] for r in rows]))
        for key in ("f1_macro", "f1_lump", "size_error", "com_error")
    }
    payload = {"n": len(rows), "mean": means, "per_image": rows}
    if args.json:
        Path(args.json).write_text(json.dumps(payload, indent=2) + "\n")
    _emit(payload if args.verbose else {"n": len(rows), "mean": means}, args.quiet)
    return 0


def _read_stack(stack_dir: Path) -> np.ndarray:
    files = sorted(stack_dir.glob("*.pimg"))
    if not files:
        raise FormatError(f"no .pimg files in {stack_dir}")
    return np.stack([iomod.read_image(f) for f in files])


def _cmd_force_map(args) -> int:
    root = Path(args.dataset)
    manifest = iomod.read_manifest(root / "manifest.json")
    bodies = manifest["bodies"]
    selected = bodies if args.body is None else [bodies[args.body]]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    maps, gts, names = [], [], []
    for rec in selected:
        trial = rec["trials"][args.trial]
        trajs = [iomod.read_trajectory(root / rel) for rel in trial["trajectories"]]
        points = forcemap.trial_points(trajs, frac=args.tail_frac)
        image = forcemap.kde_map(points, resolution=args.resolution,
                                 bandwidth=args.bandwidth)
        name = f"body_{rec['index']:05d}_trial_{args.trial}"
        np.save(out_dir / f"{name}.npy", image)
        maps.append(image)
        gts.append(iomod.read_image(root / trial["gt"]))
        names.append(name)

    payload: dict = {"n": len(maps), "out": str(out_dir)}
    threshold = args.threshold
    if (args.tune or threshold is not None) and maps[0].shape != gts[0].shape:
        raise FormatError(
            f"map resolution {maps[0].shape[0]} does not match ground truth "
            f"{gts[0].shape[0]}; scoring needs equal grids")
    if args.tune:
        threshold, tuned_f1 = forcemap.tune_threshold(maps, gts)
        payload["tuned_threshold"] = threshold
        payload["tuned_f1"] = tuned_f1
    if threshold is not None:
        f1s = []
        for image, gt, name in zip(maps, gts, names):
            mask = forcemap.threshold_mask(image, threshold)
            iomod.write_image(out_dir / f"{name}.pimg", mask)
            f1s.append(f1_class(mask, gt, 2))
        payload["threshold"] = threshold
        payload["mean_lump_f1"] = float(np.mean(f1s))
    _emit(payload, args.quiet)
    return 0


def _cmd_change_score(args) -> int:
    if args.stack_a:
        if not args.stack_b:
            raise _UsageError("--stack-a requires --stack-b")
        stack_a = _read_stack(Path(args.stack_a))
        stack_b = _read_stack(Path(args.stack_b))
        if args.by_size:
            score = changedetect.size_change_score(stack_a, stack_b)
            changed = score > args.threshold
        else:
            result = changedetect.change_score(stack_a, stack_b, args.c_const)
            score, changed = result.score, result.is_change(args.threshold)
            if args.map_out:
                np.save(args.map_out, result.score_map)
        _emit({"score": float(score), "changed": bool(changed),
               "threshold": args.threshold}, args.quiet)
        return 0

    if not args.pred_root or not args.manifest:
        raise _UsageError("need either --stack-a/--stack-b or --pred-root/--manifest")
    manifest = iomod.read_manifest(args.manifest)
    pred_root = Path(args.pred_root)
    per_body, labels, scores = [], [], []
    for rec in manifest["bodies"]:
        body_dir = pred_root / f"body_{rec['index']:05d}"
        if not body_dir.is_dir():
            continue
        stack_a = _read_stack(body_dir / f"trial_{args.trial_a}")
        stack_b = _read_stack(body_dir / f"trial_{args.trial_b}")
        if args.by_size:
            score = changedetect.size_change_score(stack_a, stack_b)
        else:
            score = changedetect.change_score(stack_a, stack_b, args.c_const).score
        label = bool(rec["change_flag"])
        per_body.append({"index": rec["index"], "score": float(score),
                         "label": label})
        labels.append(label)
        scores.append(score)
    if not per_body:
        raise FormatError(f"no prediction stacks under {pred_root}")
    predictions = [s > args.threshold for s in scores]
    payload = {
        "n": len(per_body),
        "threshold": args.threshold,
        "confusion": changedetect.confusion_counts(labels, predictions),
        "per_body": per_body,
    }
    if any(labels) and not all(labels):
        payload["auc"] = changedetect.auc_score(labels, scores)
    _emit(payload, args.quiet)
    return 0


def _cmd_inspect(args) -> int:
    root = Path(args.dataset)
    manifest = iomod.read_manifest(root / "manifest.json")
    bodies = manifest["bodies"]
    payload = {
        "n_bodies": manifest["n_bodies"],
        "n_trials": manifest["n_trials"],
        "n_traj": manifest["n_traj"],
        "master_seed": manifest["master_seed"],
        "n_change": sum(1 for b in bodies if b["change_flag"]),
        "n_with_lump": sum(1 for b in bodies if b["lump_initial"] is not None),
        "n_unconverged": sum(t["n_unconverged"] for b in bodies for t in b["trials"]),
    }
    if args.hash:
        payload["tree_hash"] = iomod.tree_hash(root)
    _emit(payload, args.quiet)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="palpsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--quiet", action="store_true")
        p.add_argument("--config", help="key = value config file")

    p = sub.add_parser("generate", help="generate a palpation dataset")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-bodies", type=int)
    p.add_argument("--n-trials", type=int)
    p.add_argument("--n-traj", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("render-gt", help="render one body's ground truth image")
    common(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--body", type=int,
                   help="derive the body seed from (seed, body index)")
    p.add_argument("--out", required=True)
    p.add_argument("--resolution", type=int, default=128)
    p.set_defaults(func=_cmd_render_gt)

    p = sub.add_parser("metrics", help="score predicted class maps")
    common(p)
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--json", help="write full per-image results here")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("force-map", help="terminal-force lump localization")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--body", type=int, help="restrict to one body index")
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--resolution", type=int, default=128)
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--tail-frac", type=float, default=0.1)
    p.add_argument("--threshold", type=float)
    p.add_argument("--tune", action="store_true",
                   help="tune the threshold on the selected bodies")
    p.set_defaults(func=_cmd_force_map)

    p = sub.add_parser("change-score", help="score change between trials")
    common(p)
    p.add_argument("--stack-a", help="directory of .pimg predictions, trial A")
    p.add_argument("--stack-b", help="directory of .pimg predictions, trial B")
    p.add_argument("--pred-root", help="per-body prediction stacks")
    p.add_argument("--manifest", help="dataset manifest for labels")
    p.add_argument("--trial-a", type=int, default=0)
    p.add_argument("--trial-b", type=int, default=1)
    p.add_argument("--c-const", type=float, default=changedetect.DEFAULT_C)
    p.add_argument("--threshold", type=float, default=changedetect.DEFAULT_THRESHOLD)
    p.add_argument("--by-size", action="store_true",
                   help="use lump-area difference instead of the weighted score")
    p.add_argument("--map-out", help="write the score map as .npy")
    p.set_defaults(func=_cmd_change_score)

    p = sub.add_parser("inspect", help="summarize a dataset")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--hash", action="store_true", help="include the tree hash")
    p.set_defaults(func=_cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (PalpsimError, FileNotFoundError, FileExistsError, NotADirectoryError,
            IndexError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
