"""Dataset ingestion, augmentation and tiling."""

from .augment import (
    AugmentationConfig,
    augment_geometric,
    denormalize,
    hflip,
    normalize,
    photometric_distortion,
    sample_rng,
)
from .loader import SegmentationDataset
from .manifest import (
    IGNORE_INDEX,
    ClassInfo,
    DatasetManifest,
    SegmentationSample,
    load_manifest,
)
from .tiling import Placement, stitch_logits, tile_image
from .toy import make_toy_dataset

__all__ = [
    "AugmentationConfig", "augment_geometric", "denormalize", "hflip", "normalize",
    "photometric_distortion", "sample_rng", "SegmentationDataset", "IGNORE_INDEX",
    "ClassInfo", "DatasetManifest", "SegmentationSample", "load_manifest",
    "Placement", "stitch_logits", "tile_image", "make_toy_dataset",
]
