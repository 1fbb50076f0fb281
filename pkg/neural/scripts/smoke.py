"""Drive the package end to end against a tiny simulator dataset.

Usage: python3 smoke.py DATASET_DIR

Pretrains a small encoder for two epochs, fits an imaging head, checks
the checkpoint round-trip, and writes ensemble prediction stacks under
./preds for the simulator's change scorer. Speed over accuracy; a clean
exit is the point.
"""

import sys
from pathlib import Path

import numpy as np
import torch

from palpnn import checkpoint, data, formats
from palpnn.config import EncoderConfig, ImagingConfig, PretrainConfig
from palpnn.imaging import predict_ensemble, train_imaging, write_stack
from palpnn.pretrain import final_state, pretrain


def main(root: Path) -> None:
    manifest = formats.read_manifest(root / "manifest.json")
    seqs, images = {}, {}
    for body in manifest["bodies"]:
        for rec in body["trials"]:
            key = (body["index"], rec["trial"])
            seqs[key] = data.load_trial_sequence(root, body, rec["trial"])
            images[key] = data.load_ground_truth(root, body, rec["trial"])

    first = next(iter(seqs.values()))
    enc = EncoderConfig(reading_dim=first.readings.shape[1], embed_dim=16,
                        state_dim=24, decoder_pe_dim=12, decoder_hidden=(24,),
                        n_anchors=8, n_queries=8)
    model, history = pretrain(list(seqs.values()), enc,
                              PretrainConfig(epochs=2, lr=1e-3, seed=0))
    print("pretrain loss:", [round(x, 4) for x in history["epoch_loss"]])

    res = next(iter(images.values())).shape[0]
    cfg = ImagingConfig(resolution=res, latent_channels=2, n_steps=2,
                        channels=(4, 6, 8), epochs=2, batch_size=4, seed=0)
    keys = sorted(seqs)
    states = torch.stack([final_state(model, seqs[k]) for k in keys])
    head, _ = train_imaging(states, np.stack([images[k] for k in keys]), cfg)
    pred = head.predict_image(states[0], noise_seed=0)
    print("class histogram:", np.bincount(pred.ravel(), minlength=3).tolist())

    checkpoint.save_checkpoint("ckpt", model, "autoencoder", enc,
                               history=history)
    clone, _ = checkpoint.load_autoencoder("ckpt")
    for (name, a), (_, b) in zip(model.state_dict().items(),
                                 clone.state_dict().items()):
        assert torch.equal(a, b), name
    print("checkpoint round-trip: ok")

    for (index, trial), seq in seqs.items():
        stack = predict_ensemble(model, head, seq, n_perm=3, seed=trial)
        write_stack(Path("preds") / f"body_{index:05d}" / f"trial_{trial}",
                    stack)
    print("stacks written:", len(seqs))


if __name__ == "__main__":
    main(Path(sys.argv[1]))
