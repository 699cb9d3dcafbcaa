"""Data pipeline on the bundled toy set: augmentation, batching and tiling.

    python3 demos/pipeline.py
"""

from pathlib import Path

import numpy as np

from samba_seg.data import AugmentationConfig, SegmentationDataset, load_manifest, tile_image

TOY = Path(__file__).resolve().parents[1] / "data" / "toy"


def main():
    man = load_manifest(TOY, "train")
    print(f"{len(man)} scenes, classes: {', '.join(c.name for c in man.classes)}")

    ds = SegmentationDataset(man, AugmentationConfig(crop_size=32, seed=1))
    images, masks = next(ds.batches(4))
    print(f"batch {images.shape} {images.dtype}, masks {masks.shape}, "
          f"labels {sorted(np.unique(masks).tolist())}")
    print(f"normalized pixel range [{images.min():.2f}, {images.max():.2f}]")

    tiles, places = tile_image(man.load(0), tile=32, stride=16)
    print(f"64x64 scene with 32px tiles at stride 16 -> {len(tiles)} tiles at "
          + ", ".join(f"({p.top},{p.left})" for p in places))


if __name__ == "__main__":
    main()
