import csv
import subprocess
import sys

import numpy as np
import pytest

from samba_seg import cli
from samba_seg.accounting import count_parameters
from samba_seg.checkpoint import encode_checkpoint, load_checkpoint
from samba_seg.data.manifest import load_manifest, parse_classes, read_image, read_mask, \
    write_image

from conftest import TOY_CONFIG, TOY_ROOT

MICRO = ["--model.base_channels", "4", "--model.stage_depths", "1,1,1,1", "--model.d_state", "2",
         "--decoder.fpn_channels", "4", "--decoder.pool_scales", "1",
         "--train.total_iterations", "2", "--train.warmup_iterations", "1", "--train.batch_size", "2"]


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def micro_ckpt(tmp_path, capsys):
    code, _, _ = run(capsys, "train", "--config", TOY_CONFIG, "--output.dir", tmp_path / "m", *MICRO)
    assert code == 0
    return tmp_path / "m" / "last.smba"


# -- train -----------------------------------------------------------------------

def test_toy_train_succeeds(toy_run):
    assert toy_run["code"] == 0
    assert (toy_run["dir"] / "last.smba").is_file() and (toy_run["dir"] / "config.cfg").is_file()
    with open(toy_run["dir"] / "metrics.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iter", "lr", "loss"] and len(rows) == 501


def test_single_iteration_override(tmp_path, capsys):
    code, out, _ = run(capsys, "train", "--config", TOY_CONFIG, "--output.dir", tmp_path,
                       *MICRO, "--train.total_iterations=1", "--train.warmup_iterations", "0")
    assert code == 0 and "trained 1 iterations" in out
    assert len((tmp_path / "metrics.csv").read_text().splitlines()) == 2


def test_missing_root(tmp_path, capsys):
    missing = tmp_path / "no_such_dataset"
    code, _, err = run(capsys, "train", "--config", TOY_CONFIG, "--data.root", missing)
    assert code == 2 and str(missing) in err


def test_bad_key(tmp_path, capsys):
    code, _, err = run(capsys, "train", "--config", TOY_CONFIG, "--train.lr", "0.1")
    assert code == 2 and "train.lr" in err
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[model]\nwidth = 3\n", encoding="utf-8")
    code, _, err = run(capsys, "train", "--config", cfg)
    assert code == 2 and "model.width" in err


def test_usage_errors(capsys):
    assert run(capsys)[0] == 2
    assert run(capsys, "train")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "train", "--config", TOY_CONFIG, "stray")[0] == 2


def test_nonfinite_training_exits_3(tmp_path, capsys):
    code, _, err = run(capsys, "train", "--config", TOY_CONFIG, "--output.dir", tmp_path, *MICRO,
                       "--train.total_iterations", "4", "--train.base_lr", "1e30", "--train.warmup_iterations", "0")
    assert code == 3 and "iteration" in err


def test_class_count_mismatch(tmp_path, capsys):
    code, _, err = run(capsys, "train", "--config", TOY_CONFIG, "--output.dir", tmp_path, "--decoder.num_classes", "7")
    assert code == 2 and "num_classes" in err


# -- eval --------------------------------------------------------------------------

def test_eval_overfit_toy(toy_run, tmp_path, capsys):
    code, out, _ = run(capsys, "eval", "--checkpoint", toy_run["dir"] / "last.smba", "--out", tmp_path)
    assert code == 0
    printed = float(out.strip().splitlines()[-1].split()[-1])
    assert printed > 95.0
    with open(tmp_path / "eval.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    names = [c.name for c in load_manifest(TOY_ROOT, "train").classes]
    assert rows[0] == ["class", "iou"] and [r[0] for r in rows[1:]] == names + ["mIoU"]
    assert float(rows[-1][1]) > 0.95
    assert float(rows[-1][1]) == pytest.approx(np.mean([float(r[1]) for r in rows[1:-1]]))


def test_eval_excluded_class_drops_row(micro_ckpt, tmp_path, capsys):
    code, _, _ = run(capsys, "eval", "--checkpoint", micro_ckpt, "--out", tmp_path, "--data.exclude_classes", "3")
    rows = (tmp_path / "eval.csv").read_text().splitlines()
    assert code == 0 and len(rows) == 1 + 3 + 1 and not any(r.startswith("triangle") for r in rows)


def test_eval_truncated_checkpoint(micro_ckpt, tmp_path, capsys):
    bad = tmp_path / "cut.smba"
    bad.write_bytes(micro_ckpt.read_bytes()[:-7])
    assert run(capsys, "eval", "--checkpoint", bad, "--out", tmp_path)[0] == 4
    assert run(capsys, "eval", "--checkpoint", tmp_path / "absent.smba")[0] == 4


def test_eval_checkpoint_config_mismatch(micro_ckpt, tmp_path, capsys):
    ckpt = load_checkpoint(micro_ckpt)
    tensors = dict(ckpt.tensors)
    tensors.pop(next(iter(tensors)))
    bad = tmp_path / "partial.smba"
    bad.write_bytes(encode_checkpoint(tensors, ckpt.config_text))
    assert run(capsys, "eval", "--checkpoint", bad)[0] == 4


# -- predict ------------------------------------------------------------------------

def test_predict_overfit_toy(toy_run, tmp_path, capsys):
    man = load_manifest(TOY_ROOT, "train")
    img_path, mask_path = man.pairs[3]
    out = tmp_path / "pred" / "p.png"
    code, _, _ = run(capsys, "predict", "--checkpoint", toy_run["dir"] / "last.smba", "--image", img_path,
                     "--out", out)
    assert code == 0
    pred = read_mask(out)
    color = read_image(out.with_name("p_color.png"))
    gt = read_mask(mask_path)
    assert pred.shape == gt.shape and color.shape[:2] == gt.shape
    assert (pred == gt).mean() > 0.95
    palette = {c.color for c in parse_classes((TOY_ROOT / "classes.txt").read_text())}
    assert {tuple(int(v) for v in px) for px in color.reshape(-1, 3)} <= palette


def test_predict_odd_size_image(micro_ckpt, tmp_path, capsys):
    img = np.random.default_rng(0).integers(0, 256, (50, 70, 3), dtype=np.uint8)
    write_image(tmp_path / "odd.png", img)
    code, _, _ = run(capsys, "predict", "--checkpoint", micro_ckpt, "--image", tmp_path / "odd.png",
                     "--out", tmp_path / "odd_pred.png")
    assert code == 0 and read_mask(tmp_path / "odd_pred.png").shape == (50, 70)


def test_predict_unreadable_image(micro_ckpt, tmp_path, capsys):
    junk = tmp_path / "junk.png"
    junk.write_bytes(b"not an image")
    for path in (junk, tmp_path / "missing.png"):
        code, _, err = run(capsys, "predict", "--checkpoint", micro_ckpt, "--image", path, "--out", tmp_path / "o.png")
        assert code == 2 and str(path) in err


# -- inspect ------------------------------------------------------------------------

def test_inspect_reports_model(micro_ckpt, capsys):
    code, out, _ = run(capsys, "inspect", micro_ckpt)
    assert code == 0 and "format version: 1" in out
    model, _ = cli.model_from_checkpoint(load_checkpoint(micro_ckpt))
    assert f"total parameters: {count_parameters(model)}" in out
    state = model.state_dict()
    assert f"tensors: {len(state)}" in out
    for name, arr in state.items():
        line = next(l for l in out.splitlines() if l.split() and l.split()[0] == name)
        assert str(tuple(arr.shape)) in line


def test_inspect_empty_and_corrupt(tmp_path, capsys):
    empty = tmp_path / "empty.smba"
    empty.write_bytes(encode_checkpoint({}))
    code, out, _ = run(capsys, "inspect", empty)
    assert code == 0 and "tensors: 0" in out and "total parameters: 0" in out
    bad = tmp_path / "bad.smba"
    bad.write_bytes(b"NOPE" + empty.read_bytes()[4:])
    assert run(capsys, "inspect", bad)[0] == 4


# -- idempotence ---------------------------------------------------------------------

def test_commands_are_idempotent(micro_ckpt, tmp_path, capsys):
    outs = []
    for i in range(2):
        d = tmp_path / f"run{i}"
        img = TOY_ROOT / "train" / "images" / "toy_000.png"
        assert run(capsys, "eval", "--checkpoint", micro_ckpt, "--out", d)[0] == 0
        assert run(capsys, "predict", "--checkpoint", micro_ckpt, "--image", img, "--out", d / "p.png")[0] == 0
        code, text, _ = run(capsys, "inspect", micro_ckpt)
        outs.append(((d / "eval.csv").read_bytes(), (d / "p.png").read_bytes(),
                     (d / "p_color.png").read_bytes(), text))
    assert outs[0] == outs[1]


def test_training_is_reproducible(micro_ckpt, tmp_path, capsys):
    again = tmp_path / "again"
    assert run(capsys, "train", "--config", TOY_CONFIG, "--output.dir", again, *MICRO)[0] == 0
    a, b = load_checkpoint(again / "last.smba").tensors, load_checkpoint(micro_ckpt).tensors
    assert a.keys() == b.keys() and all(a[k].tobytes() == b[k].tobytes() for k in a)
    assert (again / "metrics.csv").read_bytes() == (micro_ckpt.parent / "metrics.csv").read_bytes()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "samba_seg", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "predict" in res.stdout
