"""Dataset layout discovery and class tables.

Expected layout::

    root/classes.txt                 index<TAB>name<TAB>#RRGGBB per line
    root/<split>/images/<stem>.png   8-bit RGB
    root/<split>/masks/<stem>.png    8-bit class indices, 255 = ignore
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import ManifestError, ValidationError

IGNORE_INDEX = 255


@dataclass(frozen=True)
class ClassInfo:
    index: int
    name: str
    color: tuple[int, int, int]


@dataclass
class SegmentationSample:
    image: np.ndarray   # [H, W, 3] uint8
    mask: np.ndarray    # [H, W] uint8
    name: str = ""

    def __post_init__(self):
        if self.image.ndim != 3 or self.image.shape[2] != 3:
            raise ValidationError(f"image must be HxWx3, got {self.image.shape}")
        if self.image.shape[:2] != self.mask.shape:
            raise ValidationError(f"image {self.image.shape[:2]} and mask {self.mask.shape} sizes differ")


@dataclass
class DatasetManifest:
    root: Path
    split: str
    pairs: list[tuple[Path, Path]]
    classes: list[ClassInfo]
    ignore_index: int = IGNORE_INDEX
    stems: list[str] = field(default_factory=list)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def palette(self) -> np.ndarray:
        return np.array([c.color for c in self.classes], dtype=np.uint8)

    def __len__(self):
        return len(self.pairs)

    def load(self, i: int) -> SegmentationSample:
        img_path, mask_path = self.pairs[i]
        return SegmentationSample(read_image(img_path), read_mask(mask_path), name=self.stems[i])

    def validate(self, indices=None) -> None:
        """Decode masks and check every label is a known class or ignore."""
        indices = range(len(self)) if indices is None else indices
        for i in indices:
            mask = read_mask(self.pairs[i][1])
            labels = np.unique(mask)
            bad = labels[(labels != self.ignore_index) & (labels >= self.num_classes)]
            if bad.size:
                raise ValidationError(
                    f"{self.stems[i]}: unknown class indices {bad.tolist()} "
                    f"(dataset declares {self.num_classes} classes)")


def read_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def read_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode not in ("L", "P"):
            raise ValidationError(f"{path}: mask must be a single-channel index raster, got mode {im.mode}")
        return np.asarray(im, dtype=np.uint8).copy()


def write_image(path, image: np.ndarray) -> None:
    Image.fromarray(np.asarray(image, dtype=np.uint8), mode="RGB").save(path)


def write_mask(path, mask: np.ndarray) -> None:
    Image.fromarray(np.asarray(mask, dtype=np.uint8), mode="L").save(path)


def parse_classes(text: str) -> list[ClassInfo]:
    classes = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#") and "\t" not in line:
            continue
        parts = line.split("\t")
        if len(parts) != 3 or not parts[2].startswith("#") or len(parts[2]) != 7:
            raise ManifestError(f"classes.txt line {lineno}: expected index<TAB>name<TAB>#RRGGBB")
        try:
            index = int(parts[0])
            color = tuple(int(parts[2][k:k + 2], 16) for k in (1, 3, 5))
        except ValueError as exc:
            raise ManifestError(f"classes.txt line {lineno}: {exc}") from None
        classes.append(ClassInfo(index, parts[1], color))
    classes.sort(key=lambda c: c.index)
    if [c.index for c in classes] != list(range(len(classes))):
        raise ManifestError("class indices must be dense from 0")
    return classes


def format_classes(classes) -> str:
    return "".join(
        f"{c.index}\t{c.name}\t#{c.color[0]:02X}{c.color[1]:02X}{c.color[2]:02X}\n" for c in classes
    )


def find_class_table(root: Path, split: str | None = None) -> Path:
    candidates = ([root / split / "classes.txt"] if split else []) + [root / "classes.txt"]
    for path in candidates:
        if path.is_file():
            return path
    raise ManifestError(f"no classes.txt under {root}")


def load_manifest(root, split: str) -> DatasetManifest:
    """Enumerate image/mask pairs of ``root/split``, sorted by stem."""
    root = Path(root)
    split_dir = root / split
    if not split_dir.is_dir():
        raise ManifestError(f"split directory not found: {split_dir}")
    classes = parse_classes(find_class_table(root, split).read_text(encoding="utf-8"))
    image_dir, mask_dir = split_dir / "images", split_dir / "masks"
    images = sorted(image_dir.glob("*.png")) if image_dir.is_dir() else []
    pairs, stems = [], []
    for img in images:
        mask = mask_dir / img.name
        if not mask.is_file():
            raise ManifestError(f"missing mask for image stem {img.stem!r} (expected {mask})")
        pairs.append((img, mask))
        stems.append(img.stem)
    return DatasetManifest(root=root, split=split, pairs=pairs, classes=classes, stems=stems)
