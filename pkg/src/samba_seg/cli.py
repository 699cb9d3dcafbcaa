"""Command-line entry point: ``train``, ``eval``, ``predict`` and ``inspect``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical abort,
4 corrupt checkpoint.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint
from .config import RunConfig, load_config, parse_config
from .data.loader import SegmentationDataset
from .data.manifest import DatasetManifest, find_class_table, load_manifest, parse_classes, \
    read_image, write_image, write_mask
from .errors import CheckpointError, ConfigError, ManifestError, TrainingError, ValidationError
from .model import SambaSegmenter
from .training import evaluate, predict_mask, train_loop

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CORRUPT = 0, 2, 3, 4
PATH_KEYS = ("data.root", "output.dir")

log = logging.getLogger("samba_seg")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _overrides(extra: list[str]) -> dict[str, str]:
    """``--section.key value`` or ``--section.key=value`` pairs."""
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or "." not in tok:
            raise UsageError(f"unrecognized argument {tok!r}")
        key, eq, value = tok[2:].partition("=")
        if not eq:
            if i + 1 >= len(extra):
                raise UsageError(f"missing value for {tok}")
            value = extra[i + 1]
            i += 1
        if key in PATH_KEYS:
            value = str(Path(value).resolve())
        out[key] = value
        i += 1
    return out


def build_model(cfg: RunConfig) -> SambaSegmenter:
    return SambaSegmenter(cfg.model, cfg.decoder, seed=cfg.train.seed)


def model_from_checkpoint(ckpt: Checkpoint) -> tuple[SambaSegmenter, RunConfig]:
    cfg = parse_config(ckpt.config_text, source="<checkpoint>")
    model = build_model(cfg)
    try:
        model.load_state_dict(ckpt.tensors, strict=True)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"checkpoint does not match its embedded config: {exc}") from None
    model.eval()
    return model, cfg


def _manifest(cfg: RunConfig, split: str) -> DatasetManifest:
    root = Path(cfg.data.root)
    if not root.is_dir():
        raise ConfigError(f"dataset root not found: {root}")
    manifest = load_manifest(root, split)
    if manifest.num_classes != cfg.decoder.num_classes:
        raise ConfigError(f"decoder.num_classes = {cfg.decoder.num_classes} but {root} "
                          f"declares {manifest.num_classes} classes")
    return manifest


def cmd_train(args, overrides) -> int:
    cfg = load_config(args.config, overrides)
    manifest = _manifest(cfg, cfg.data.train_split)
    out_dir = Path(cfg.output.dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    text = cfg.to_text()
    (out_dir / "config.cfg").write_text(text, encoding="utf-8")
    dataset = SegmentationDataset(manifest, cfg.augment)
    model = build_model(cfg)
    result = train_loop(model, dataset, cfg.train, out_dir=out_dir, config_text=text)
    print(f"trained {len(result.history)} iterations in {result.seconds:.1f}s, "
          f"final loss {result.losses[-1]:.4f}")
    print(f"checkpoint: {result.checkpoints[-1]}")
    return EXIT_OK


def cmd_eval(args, overrides) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    model, cfg = model_from_checkpoint(ckpt)
    if args.config:
        data_cfg = load_config(args.config, overrides)
        data_cfg.model, data_cfg.decoder = cfg.model, cfg.decoder
        cfg = data_cfg
    elif overrides:
        cfg = parse_config(cfg.to_text(), overrides)
    split = args.split or cfg.data.val_split
    manifest = _manifest(cfg, split)
    result = evaluate(model, manifest, cfg.eval.tile, cfg.eval.stride, cfg.data.exclude_classes)
    out_dir = Path(args.out or cfg.output.dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = {c.index: c.name for c in manifest.classes}
    print(f"{'class':<20}{'IoU':>8}")
    with open(out_dir / "eval.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "iou"])
        for c in result.included:
            print(f"{names[c]:<20}{100 * result.iou[c]:>8.2f}")
            writer.writerow([names[c], repr(float(result.iou[c]))])
        print(f"{'mIoU':<20}{100 * result.miou:>8.2f}")
        writer.writerow(["mIoU", repr(result.miou)])
    return EXIT_OK


def _palette(cfg: RunConfig, num_classes: int) -> np.ndarray:
    try:
        table = find_class_table(Path(cfg.data.root), cfg.data.train_split)
        classes = parse_classes(table.read_text(encoding="utf-8"))
    except (ManifestError, OSError):
        classes = []
    if len(classes) == num_classes:
        return np.array([c.color for c in classes], dtype=np.uint8)
    rng = np.random.default_rng(0)
    return rng.integers(0, 256, size=(num_classes, 3), dtype=np.uint8)


def cmd_predict(args, overrides) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    model, cfg = model_from_checkpoint(ckpt)
    if overrides:
        cfg = parse_config(cfg.to_text(), overrides)
    try:
        image = read_image(args.image)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read image {args.image}: {exc}") from None
    h, w = image.shape[:2]
    tile = min(cfg.eval.tile, max(32, -(-max(h, w) // 32) * 32))
    stride = min(cfg.eval.stride, tile)
    mask = predict_mask(model, image, tile, stride)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_mask(out, mask)
    color_path = out.with_name(out.stem + "_color.png")
    write_image(color_path, _palette(cfg, model.num_classes)[mask])
    print(f"wrote {out} and {color_path}")
    return EXIT_OK


def cmd_inspect(args, overrides) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    print(f"format version: {ckpt.version}")
    print("config:")
    for line in ckpt.config_text.splitlines():
        print(f"  {line}")
    print(f"tensors: {len(ckpt.tensors)}")
    total = 0
    for name, arr in ckpt.tensors.items():
        total += arr.size
        print(f"  {name:<60} {str(tuple(arr.shape)):<20} {arr.dtype}")
    print(f"total parameters: {total}")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="samba-seg", description="State-space segmentation network on numpy.")
    p.add_argument("-v", "--verbose", action="store_true", help="log every training iteration")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    t = sub.add_parser("train", help="train from a config file")
    t.add_argument("--config", required=True)
    t.set_defaults(func=cmd_train)
    e = sub.add_parser("eval", help="evaluate a checkpoint and write eval.csv")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--config", help="config for the dataset (defaults to the checkpoint's)")
    e.add_argument("--split", help="split to evaluate (defaults to data.val_split)")
    e.add_argument("--out", help="directory for eval.csv (defaults to output.dir)")
    e.set_defaults(func=cmd_eval)
    r = sub.add_parser("predict", help="segment one image")
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--image", required=True)
    r.add_argument("--out", required=True, help="class-index PNG; a *_color.png is written beside it")
    r.set_defaults(func=cmd_predict)
    i = sub.add_parser("inspect", help="print checkpoint contents")
    i.add_argument("checkpoint")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args, extra = _parser().parse_known_args(argv)
        overrides = _overrides(extra)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args, overrides)
    except (ConfigError, ManifestError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingError as exc:
        print(f"error: training aborted at iteration {exc.iteration}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CORRUPT


if __name__ == "__main__":
    sys.exit(main())
