import numpy as np
import pytest

from lengthwise.data import VOCABULARY, WordLabel
from lengthwise.evaluate import (ConfusionMatrix, SummaryStats, emit_report,
                                 format_number, summarize_folds,
                                 write_fold_accuracies)


def test_format_number_rendering():
    assert format_number(59.47) == "59.47"
    assert format_number(62.0) == "62"
    assert format_number(6.8586) == "6.8586"
    assert format_number(0.0) == "0"
    assert format_number(100.0) == "100"
    assert format_number(-0.0) == "0"
    assert format_number(0.25) == "0.25"


def test_confusion_identity():
    pairs = [(w, w) for w in VOCABULARY for _ in range(3)]
    cm = ConfusionMatrix.from_pairs(pairs)
    np.testing.assert_array_equal(cm.counts, 3 * np.eye(5, dtype=np.int64))
    np.testing.assert_array_equal(cm.normalized, np.eye(5))
    assert cm.accuracy_percent() == 100.0


def test_confusion_empty_rows_stay_zero():
    cm = ConfusionMatrix.from_pairs([(WordLabel.hello, WordLabel.yes)])
    assert cm.counts.sum() == 1
    np.testing.assert_array_equal(cm.normalized[1:], 0.0)
    assert cm.normalized[0, WordLabel.yes.value] == 1.0
    assert cm.accuracy_percent() == 0.0


def test_confusion_row_normalization():
    pairs = ([(WordLabel.stop, WordLabel.stop)] * 3
             + [(WordLabel.stop, WordLabel.yes)] * 2)
    cm = ConfusionMatrix.from_pairs(pairs)
    assert cm.normalized[WordLabel.stop.value, WordLabel.stop.value] == pytest.approx(0.6)
    assert cm.normalized[WordLabel.stop.value, WordLabel.yes.value] == pytest.approx(0.4)
    # normalization is scale-free: tripling every count changes nothing
    cm3 = ConfusionMatrix.from_counts(cm.counts * 3)
    np.testing.assert_allclose(cm3.normalized, cm.normalized, atol=1e-15)


def test_confusion_trace_equals_accuracy(rng):
    for _ in range(20):
        counts = rng.integers(0, 9, size=(5, 5))
        cm = ConfusionMatrix.from_counts(counts)
        expected = 100.0 * np.trace(counts) / counts.sum()
        assert abs(cm.accuracy_percent() - expected) < 1e-12


def test_confusion_combine_sums_counts(rng):
    parts = [ConfusionMatrix.from_counts(rng.integers(0, 5, size=(5, 5)))
             for _ in range(3)]
    total = ConfusionMatrix.combine(parts)
    np.testing.assert_array_equal(total.counts, sum(p.counts for p in parts))


def test_confusion_shape_guard():
    with pytest.raises(ValueError, match="5x5"):
        ConfusionMatrix.from_counts(np.zeros((4, 4)))


def test_summarize_pinned_values():
    stats = summarize_folds([36.0, 44.0, 52.0, 60.0, 64.0])
    assert stats.mean == pytest.approx(51.2)
    assert stats.median == 52.0
    assert stats.max == 64.0
    assert stats.min == 36.0
    # population standard deviation, not the sample estimate
    assert stats.std == pytest.approx(float(np.std([36, 44, 52, 60, 64])), abs=1e-12)


def test_summarize_is_order_invariant(rng):
    accs = list(rng.uniform(0, 100, size=7))
    base = summarize_folds(accs)
    shuffled = summarize_folds(list(rng.permutation(accs)))
    for field in ("mean", "std", "median", "max", "min"):
        assert getattr(base, field) == pytest.approx(getattr(shuffled, field), abs=1e-12)


def test_summarize_empty_raises():
    with pytest.raises(ValueError, match="at least one"):
        summarize_folds([])


def test_emit_report_pinned_row(tmp_path):
    stats = SummaryStats(mean=59.47, std=6.86, median=62.0, max=70.0, min=48.0)
    cm = ConfusionMatrix.from_counts(np.zeros((5, 5), dtype=np.int64))
    emit_report([("proposed", stats, cm)], tmp_path)
    lines = (tmp_path / "summary.csv").read_text().splitlines()
    assert lines[0] == "model,mean,std,median,max,min"
    assert lines[1] == "proposed,59.47,6.86,62,70,48"


def test_emit_report_rows_in_input_order(tmp_path):
    cm = ConfusionMatrix.from_counts(np.eye(5, dtype=np.int64))
    stats = SummaryStats(50.0, 0.0, 50.0, 50.0, 50.0)
    written = emit_report([("zeta", stats, cm), ("alpha", stats, cm)], tmp_path)
    lines = (tmp_path / "summary.csv").read_text().splitlines()
    assert [ln.split(",")[0] for ln in lines[1:]] == ["zeta", "alpha"]
    names = {p.name for p in written}
    assert names == {"summary.csv", "confusion_zeta.csv", "confusion_alpha.csv"}


def test_emit_report_is_byte_deterministic(tmp_path, rng):
    counts = rng.integers(0, 7, size=(5, 5))
    results = [("m", summarize_folds([33.25, 41.5]), ConfusionMatrix.from_counts(counts))]
    emit_report(results, tmp_path / "a")
    emit_report(results, tmp_path / "b")
    for name in ("summary.csv", "confusion_m.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_emit_report_empty_raises(tmp_path):
    with pytest.raises(ValueError, match="at least one"):
        emit_report([], tmp_path)


def test_confusion_csv_blocks(tmp_path):
    pairs = [(WordLabel.hello, WordLabel.hello), (WordLabel.hello, WordLabel.stop)]
    cm = ConfusionMatrix.from_pairs(pairs)
    emit_report([("x", summarize_folds([50.0]), cm)], tmp_path)
    lines = (tmp_path / "confusion_x.csv").read_text().splitlines()
    assert lines[0] == "counts"
    assert lines[1] == ",hello,help_me,thank_you,stop,yes"
    assert lines[2] == "hello,1,0,0,1,0"
    assert lines[7] == "row_normalized"
    assert lines[9] == "hello,0.5,0,0,0.5,0"


def test_write_fold_accuracies(tmp_path):
    out = write_fold_accuracies(tmp_path, "hier", [60.0, 53.3333])
    assert out.name == "folds_hier.csv"
    assert out.read_text() == "fold,accuracy\n0,60\n1,53.3333\n"
