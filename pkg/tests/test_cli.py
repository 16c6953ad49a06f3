import re

import numpy as np
import pytest

from lengthwise.cli import main

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def run(argv, capsys):
    rc = main(argv)
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "ds"
    rc = main(["synth", "--per-class", "3", "--channels", "4", "--samples", "448",
               "--rate", "256", "--noise", "0.4", "--seed", "11", "--out", str(path)])
    assert rc == 0
    return path


@pytest.fixture(scope="module")
def cv_dir(dataset_dir, tmp_path_factory):
    path = tmp_path_factory.mktemp("cv") / "out"
    rc = main(["cv", "--data", str(dataset_dir), "--folds", "2", "--epochs", "2",
               "--batch", "8", "--seed", "5", "--model", "both", "--out", str(path)])
    assert rc == 0
    return path


def test_synth_writes_expected_files(dataset_dir):
    names = {p.name for p in dataset_dir.iterdir()}
    trials = {n for n in names if n.endswith(".eegt")}
    assert len(trials) == 15
    assert "dataset.txt" in names and "manifest.txt" in names
    manifest = (dataset_dir / "manifest.txt").read_text()
    assert "command synth" in manifest
    assert "master_seed 11" in manifest


def test_synth_repeat_is_byte_identical(dataset_dir, tmp_path):
    again = tmp_path / "again"
    rc = main(["synth", "--per-class", "3", "--channels", "4", "--samples", "448",
               "--rate", "256", "--noise", "0.4", "--seed", "11", "--out", str(again)])
    assert rc == 0
    for p in sorted(dataset_dir.iterdir()):
        assert (again / p.name).read_bytes() == p.read_bytes(), p.name


def test_synth_usage_errors(tmp_path, capsys):
    rc, _, err = run(["synth", "--per-class", "2", "--noise", "-1",
                      "--out", str(tmp_path / "x")], capsys)
    assert rc == 2 and "usage" in err
    rc, _, err = run(["synth", "--per-class", "0", "--out", str(tmp_path / "x")], capsys)
    assert rc == 2
    rc, _, err = run(["synth", "--per-class", "1", "--rate", "8",
                      "--out", str(tmp_path / "x")], capsys)
    assert rc == 2 and "Nyquist" in err


def test_cv_writes_all_artifacts(cv_dir):
    names = {p.name for p in cv_dir.iterdir()}
    assert {"manifest.txt", "summary.csv", "metrics.log",
            "confusion_hier.csv", "confusion_flat.csv",
            "folds_hier.csv", "folds_flat.csv",
            "fold0.ckpt", "fold1.ckpt",
            "fold0.flat.ckpt", "fold1.flat.ckpt", "figures"} <= names
    for fig in ("confusion_hier.png", "confusion_flat.png", "fold_accuracy.png"):
        raw = (cv_dir / "figures" / fig).read_bytes()
        assert raw.startswith(PNG_MAGIC), fig


def test_cv_summary_has_a_row_per_variant(cv_dir):
    lines = (cv_dir / "summary.csv").read_text().splitlines()
    assert lines[0] == "model,mean,std,median,max,min"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["hier", "flat"]


def test_cv_metrics_log_schema(cv_dir):
    lines = (cv_dir / "metrics.log").read_text().splitlines()
    pattern = re.compile(
        r"^model=(hier|flat) fold=\d+ epoch=\d+ l_length=\d+\.\d{6} "
        r"l_short=\d+\.\d{6} l_long=\d+\.\d{6} total=\d+\.\d{6} "
        r"train_acc=\d+\.\d{6}$")
    assert len(lines) == 2 * 2 * 2  # variants x folds x epochs
    for line in lines:
        assert pattern.match(line), line
    # flat rows carry the plain cross-entropy in total and zero components
    flat_rows = [ln for ln in lines if ln.startswith("model=flat")]
    assert all("l_length=0.000000" in ln for ln in flat_rows)


def test_cv_manifest_lists_artifacts(cv_dir):
    manifest = (cv_dir / "manifest.txt").read_text()
    assert "command cv" in manifest
    assert "master_seed 5" in manifest
    for artifact in ("summary.csv", "fold0.ckpt", "fold0.flat.ckpt",
                     "figures/fold_accuracy.png"):
        assert f"artifact {artifact}" in manifest


def test_cv_rerun_reproduces_summary_bytes(dataset_dir, cv_dir, tmp_path):
    again = tmp_path / "again"
    rc = main(["cv", "--data", str(dataset_dir), "--folds", "2", "--epochs", "2",
               "--batch", "8", "--seed", "5", "--model", "both", "--out", str(again)])
    assert rc == 0
    for name in ("summary.csv", "metrics.log", "confusion_hier.csv", "folds_flat.csv"):
        assert (again / name).read_bytes() == (cv_dir / name).read_bytes(), name


def test_cv_short_crop_rejected(dataset_dir, tmp_path, capsys):
    rc, _, err = run(["cv", "--data", str(dataset_dir), "--crop", "256",
                      "--out", str(tmp_path / "x")], capsys)
    assert rc == 3
    assert "441" in err


def test_cv_overlong_crop_rejected(dataset_dir, tmp_path, capsys):
    rc, _, err = run(["cv", "--data", str(dataset_dir), "--crop", "512",
                      "--out", str(tmp_path / "x")], capsys)
    assert rc == 3
    assert "longer than" in err


def test_cv_missing_dataset_is_io_error(tmp_path, capsys):
    rc, _, err = run(["cv", "--data", str(tmp_path / "nope"),
                      "--out", str(tmp_path / "x")], capsys)
    assert rc == 5 and "io" in err


def test_predict_records(dataset_dir, cv_dir, tmp_path, capsys):
    out = tmp_path / "preds.txt"
    rc, stdout, _ = run(["predict", "--ckpt", str(cv_dir / "fold0.ckpt"),
                         "--data", str(dataset_dir), "--out", str(out)], capsys)
    assert rc == 0 and "accuracy" in stdout
    lines = out.read_text().splitlines()
    assert len(lines) == 16  # 15 trials plus the accuracy line
    for line in lines[:-1]:
        kv = dict(tok.split("=", 1) for tok in line.split()[2:])
        assert set(kv) == {"true", "pred", "branch", "p_short", "p_long", "words"}
        assert float(kv["p_short"]) + float(kv["p_long"]) == pytest.approx(1.0, abs=1e-9)
        word_probs = [float(w.split(":")[1]) for w in kv["words"].split(",")]
        assert sum(word_probs) == pytest.approx(1.0, abs=1e-9)
    tag, value = lines[-1].split()
    assert tag == "accuracy" and 0.0 <= float(value) <= 1.0


def test_predict_flat_checkpoint_records(dataset_dir, cv_dir, tmp_path, capsys):
    out = tmp_path / "preds.txt"
    rc, _, _ = run(["predict", "--ckpt", str(cv_dir / "fold0.flat.ckpt"),
                    "--data", str(dataset_dir), "--out", str(out)], capsys)
    assert rc == 0
    first = out.read_text().splitlines()[0]
    assert "branch=" not in first and "p_short=" not in first
    words = first.split("words=")[1].split(",")
    assert len(words) == 5  # the flat head scores the whole vocabulary


def test_predict_is_deterministic(dataset_dir, cv_dir, tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for out in (a, b):
        rc, _, _ = run(["predict", "--ckpt", str(cv_dir / "fold0.ckpt"),
                        "--data", str(dataset_dir), "--out", str(out)], capsys)
        assert rc == 0
    assert a.read_bytes() == b.read_bytes()


def test_predict_bad_checkpoint_is_format_error(dataset_dir, tmp_path, capsys):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"JUNKJUNKJUNK")
    rc, _, err = run(["predict", "--ckpt", str(bad), "--data", str(dataset_dir),
                      "--out", str(tmp_path / "p.txt")], capsys)
    assert rc == 4 and "format" in err


def test_predict_channel_mismatch_is_format_error(cv_dir, tmp_path, capsys):
    other = tmp_path / "otherds"
    rc = main(["synth", "--per-class", "1", "--channels", "3", "--samples", "448",
               "--rate", "256", "--noise", "0.1", "--seed", "1", "--out", str(other)])
    assert rc == 0
    rc, _, err = run(["predict", "--ckpt", str(cv_dir / "fold0.ckpt"),
                      "--data", str(other), "--out", str(tmp_path / "p.txt")], capsys)
    assert rc == 4 and "channels" in err


def test_predict_crop_mismatch_is_configuration_error(dataset_dir, cv_dir, tmp_path, capsys):
    rc, _, err = run(["predict", "--ckpt", str(cv_dir / "fold0.ckpt"),
                      "--data", str(dataset_dir), "--crop", "300",
                      "--out", str(tmp_path / "p.txt")], capsys)
    assert rc == 3 and "configuration" in err


def test_report_regenerates_summary(cv_dir, tmp_path, capsys):
    out = tmp_path / "report"
    rc, stdout, _ = run(["report", "--from", str(cv_dir), "--out", str(out)], capsys)
    assert rc == 0
    assert (out / "summary.csv").read_bytes() == (cv_dir / "summary.csv").read_bytes()
    for name in ("confusion_hier.csv", "confusion_flat.csv"):
        assert (out / name).read_bytes() == (cv_dir / name).read_bytes()
    assert (out / "figures" / "fold_accuracy.png").read_bytes().startswith(PNG_MAGIC)


def test_report_from_empty_directory_is_format_error(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    rc, _, err = run(["report", "--from", str(empty), "--out", str(tmp_path / "r")],
                     capsys)
    assert rc == 4 and "no folds_" in err


def test_top_level_usage(capsys):
    rc, _, _ = run([], capsys)
    assert rc == 2
    rc, out, _ = run(["--help"], capsys)
    assert rc == 0 and "synth" in out
    rc, _, _ = run(["no-such-command"], capsys)
    assert rc == 2
    rc, _, _ = run(["cv"], capsys)  # missing required flags
    assert rc == 2
