"""Conventions of the public remote-sensing benchmarks.

Class tables, evaluation exclusions and the fixed validation tile lists of
LoveDA, ISPRS Vaihingen and ISPRS Potsdam. Vaihingen rasters carry IR-R-G
bands; they are handled as ordinary 3-channel images.
"""

from __future__ import annotations

from dataclasses import dataclass

from .manifest import ClassInfo


@dataclass(frozen=True)
class DatasetPreset:
    name: str
    classes: tuple[ClassInfo, ...]
    excluded: tuple[int, ...]          # classes left out of mIoU
    native_size: tuple[int, int] | None
    val_ids: tuple[str, ...] = ()
    train_count: int | None = None
    val_count: int | None = None

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def evaluated_classes(self) -> list[int]:
        return [c.index for c in self.classes if c.index not in self.excluded]


def _table(*rows):
    return tuple(ClassInfo(i, name, color) for i, (name, color) in enumerate(rows))


LOVEDA = DatasetPreset(
    name="loveda",
    classes=_table(
        ("background", (255, 255, 255)),
        ("building", (255, 0, 0)),
        ("road", (255, 255, 0)),
        ("water", (0, 0, 255)),
        ("barren", (159, 129, 183)),
        ("forest", (0, 255, 0)),
        ("agricultural", (255, 195, 128)),
    ),
    excluded=(),
    native_size=(1024, 1024),
    train_count=2522,
    val_count=1669,
)

_ISPRS_CLASSES = _table(
    ("impervious_surface", (255, 255, 255)),
    ("building", (0, 0, 255)),
    ("low_vegetation", (0, 255, 255)),
    ("tree", (0, 255, 0)),
    ("car", (255, 255, 0)),
    ("clutter", (255, 0, 0)),
)

VAIHINGEN = DatasetPreset(
    name="vaihingen",
    classes=_ISPRS_CLASSES,
    excluded=(5,),
    native_size=None,  # tiles vary, about 2494 x 2064 on average
    val_ids=tuple(str(i) for i in (2, 4, 6, 8, 10, 12, 14, 16, 20, 22, 24, 27, 29, 31, 33, 35, 38)),
)

POTSDAM = DatasetPreset(
    name="potsdam",
    classes=_ISPRS_CLASSES,
    excluded=(5,),
    native_size=(6000, 6000),
    val_ids=("2_13", "2_14", "3_13", "3_14", "4_13", "4_14", "4_15",
             "5_13", "5_14", "5_15", "6_13", "6_14", "6_15", "7_13"),
)

PRESETS = {p.name: p for p in (LOVEDA, VAIHINGEN, POTSDAM)}
