"""Overfit the toy set through the library API, then report train mIoU.

Equivalent to ``samba-seg train --config configs/toy.cfg`` followed by
``samba-seg eval``. Takes a few minutes on one CPU core.

    python3 demos/train_toy.py [iterations]
"""

import sys
from pathlib import Path

from samba_seg import SambaSegmenter, evaluate, load_config, train_loop
from samba_seg.data import SegmentationDataset, load_manifest

REPO = Path(__file__).resolve().parents[1]


def main(iterations=None):
    cfg = load_config(REPO / "configs" / "toy.cfg")
    if iterations:
        cfg.train.total_iterations = iterations
        cfg.train.warmup_iterations = min(cfg.train.warmup_iterations, iterations)
    man = load_manifest(cfg.data.root, cfg.data.train_split)
    model = SambaSegmenter(cfg.model, cfg.decoder, seed=cfg.train.seed)
    result = train_loop(model, SegmentationDataset(man, cfg.augment), cfg.train)
    for it, lr, loss in result.history[:: max(1, len(result.history) // 10)]:
        print(f"iter {it:4d}  lr {lr:.2e}  loss {loss:.4f}")
    res = evaluate(model, man, cfg.eval.tile, cfg.eval.stride)
    for c in man.classes:
        print(f"{c.name:<12} IoU {res.iou[c.index]:.3f}")
    print(f"train mIoU {res.miou:.3f} after {result.seconds:.0f} s")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else None)
