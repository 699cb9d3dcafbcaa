import csv

import numpy as np
import pytest

from samba_seg.data import AugmentationConfig, SegmentationDataset, load_manifest
from samba_seg.decoder import DecoderConfig
from samba_seg.encoder import SambaConfig
from samba_seg.errors import TrainingError
from samba_seg.losses import cross_entropy_loss
from samba_seg.model import SambaSegmenter
from samba_seg.optim import TrainConfig
from samba_seg.tensor import Tensor, no_grad
from samba_seg.training import predict_logits, predict_mask, train_loop

from conftest import TOY_ROOT

SMALL = (SambaConfig(base_channels=8, stage_depths=(1, 1, 1, 1), d_state=2),
         DecoderConfig(fpn_channels=8, pool_scales=(1, 2), num_classes=4, dropout=0.0))
PLAIN = AugmentationConfig(crop_size=64, scale_min=1.0, scale_max=1.0, hflip_prob=0.0, photometric_prob=0.0)


def toy_dataset(n=None, aug=PLAIN):
    man = load_manifest(TOY_ROOT, "train")
    if n is not None:
        man.pairs, man.stems = man.pairs[:n], man.stems[:n]
    return SegmentationDataset(man, aug)


def test_one_step_reduces_loss_on_single_sample():
    ds = toy_dataset(1)
    model = SambaSegmenter(*SMALL, seed=0)
    x, y = ds.sample(0, 0)

    def loss():
        with no_grad():
            return cross_entropy_loss(model(Tensor(x[None])), y[None]).item()

    before = loss()
    train_loop(model, ds, TrainConfig(total_iterations=1, batch_size=1, base_lr=1e-4, warmup_iterations=0))
    assert loss() < before


def test_fixed_seed_gives_identical_curves():
    cfg = TrainConfig(total_iterations=4, batch_size=2, warmup_iterations=2)
    aug = AugmentationConfig(crop_size=64)
    runs = [train_loop(SambaSegmenter(*SMALL, seed=1), toy_dataset(aug=aug), cfg).history for _ in range(2)]
    assert runs[0] == runs[1]


def test_metrics_and_checkpoints_written(tmp_path):
    cfg = TrainConfig(total_iterations=3, batch_size=2, warmup_iterations=1, checkpoint_every=2)
    res = train_loop(SambaSegmenter(*SMALL), toy_dataset(), cfg, out_dir=tmp_path, config_text="x")
    with open(tmp_path / "metrics.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iter", "lr", "loss"] and len(rows) == 4
    assert [int(r[0]) for r in rows[1:]] == [0, 1, 2]
    assert [float(r[2]) for r in rows[1:]] == res.losses
    assert [p.name for p in res.checkpoints] == ["iter_000002.smba", "last.smba"]


def test_nonfinite_loss_aborts_with_iteration(tmp_path):
    model = SambaSegmenter(*SMALL)
    cfg = TrainConfig(total_iterations=5, batch_size=2, warmup_iterations=0, base_lr=1e30)
    with pytest.raises(TrainingError) as info:
        train_loop(model, toy_dataset(), cfg, out_dir=tmp_path)
    assert info.value.iteration is not None and 0 < info.value.iteration < 5


def test_predict_logits_tiling_matches_single_pass():
    model = SambaSegmenter(*SMALL, seed=2)
    img = load_manifest(TOY_ROOT, "train").load(0).image
    whole = predict_logits(model, img, 64, 64)
    tiled = predict_logits(model, np.tile(img, (2, 2, 1)), 64, 64)
    np.testing.assert_allclose(tiled[:, 64:, 64:], whole, atol=1e-5)
    assert predict_mask(model, img, 64, 64).shape == (64, 64)
    assert model.training
