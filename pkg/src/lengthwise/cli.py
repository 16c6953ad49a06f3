"""Command-line entry point wiring data, training, and evaluation into
reproducible runs.

Subcommands: synth (write a synthetic dataset), cv (cross-validated
training plus report and figures), predict (label a dataset with a
checkpoint), report (re-render report files from a finished cv output
directory). Every run writes manifest.txt before any long computation,
all randomness flows from --seed, and exit codes are categorized:
0 ok, 2 usage, 3 configuration, 4 format, 5 I/O.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .data import (BRANCH_WORDS, HyperLabel, SynthSpec, VOCABULARY,
                   load_dataset, save_dataset, synthesize_dataset)
from .errors import ConfigurationError, DimensionError, FormatError, UsageError
from .evaluate import (ConfusionMatrix, emit_report, format_number,
                       summarize_folds, write_fold_accuracies)
from .model import (ModelConfig, compute_shapes, load_checkpoint, predict,
                    predict_flat, save_checkpoint)
from .training import TrainConfig, crop_trial, run_cross_validation

MANIFEST_FILE = "manifest.txt"
METRICS_FILE = "metrics.log"
FIGURES_DIR = "figures"


@dataclass
class RunManifest:
    """Everything needed to reproduce a run, written before it starts."""

    command: str
    master_seed: int
    config_lines: list
    artifacts: list
    version: str = __version__

    def text(self) -> str:
        lines = [f"command {self.command}", f"version {self.version}",
                 f"master_seed {self.master_seed}"]
        lines += self.config_lines
        lines += [f"artifact {a}" for a in self.artifacts]
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / MANIFEST_FILE
        path.write_text(self.text())
        return path


def _positive_int(name: str, value: int) -> int:
    if value < 1:
        raise UsageError(f"--{name} must be at least 1, got {value}")
    return value


def cmd_synth(args) -> int:
    _positive_int("per-class", args.per_class)
    _positive_int("channels", args.channels)
    _positive_int("samples", args.samples)
    if args.noise < 0:
        raise UsageError(f"--noise must be nonnegative, got {args.noise}")
    if args.rate <= 0:
        raise UsageError(f"--rate must be positive, got {args.rate}")
    try:
        spec = SynthSpec(n_per_class=args.per_class, channels=args.channels,
                         samples=args.samples, sample_rate_hz=args.rate,
                         noise_sigma=args.noise, seed=args.seed)
    except ValueError as err:
        raise UsageError(str(err))
    trial_files = [f"{label.name}_{i:03d}.eegt"
                   for label in VOCABULARY for i in range(spec.n_per_class)]
    config_lines = [
        f"per_class {spec.n_per_class}",
        f"channels {spec.channels}",
        f"samples {spec.samples}",
        f"sample_rate_hz {spec.sample_rate_hz!r}",
        f"noise_sigma {spec.noise_sigma!r}",
        f"amplitude {spec.amplitude!r}",
        "group_freq_hz " + " ".join(
            f"{g.name}={spec.group_freq_hz[g]!r}" for g in HyperLabel),
        "class_freq_hz " + " ".join(
            f"{w.name}={spec.class_freq_hz[w]!r}" for w in VOCABULARY),
    ]
    manifest = RunManifest("synth", spec.seed, config_lines,
                           ["dataset.txt"] + trial_files)
    manifest.write(args.out)
    save_dataset(synthesize_dataset(spec), args.out)
    print(f"wrote {len(trial_files)} trials to {args.out}")
    return 0


def _model_config_line(config: ModelConfig) -> str:
    parts = []
    for f in fields(config):
        v = getattr(config, f.name)
        if f.name == "word_filters":
            v = ",".join(str(x) for x in v)
        parts.append(f"{f.name}={v}")
    return "model_config " + " ".join(parts)


def _dataset_geometry(trial_set):
    trials = trial_set.trials
    if not trials:
        raise FormatError("dataset contains no trials")
    channels, samples = trials[0].channels, trials[0].samples
    for t in trials:
        if (t.channels, t.samples) != (channels, samples):
            raise ConfigurationError(
                f"trial {t.id} has shape ({t.channels}, {t.samples}), "
                f"expected ({channels}, {samples}) like the rest of the set")
    return channels, samples


def _metrics_lines(variant: str, results) -> list:
    lines = []
    for r in results:
        for epoch, s in enumerate(r.epoch_stats):
            lines.append(
                f"model={variant} fold={r.fold_index} epoch={epoch} "
                f"l_length={s.l_length:.6f} l_short={s.l_short:.6f} "
                f"l_long={s.l_long:.6f} total={s.total:.6f} "
                f"train_acc={s.train_acc:.6f}")
    return lines


def cmd_cv(args) -> int:
    variants = ["hier", "flat"] if args.model == "both" else [args.model]
    trial_set = load_dataset(args.data)
    channels, samples = _dataset_geometry(trial_set)
    crop = args.crop or samples
    if crop > samples:
        raise ConfigurationError(
            f"crop window {crop} is longer than the {samples}-sample trials")
    model_config = ModelConfig(channels=channels, samples=crop)
    compute_shapes(model_config)  # rejects too-short crops, citing the minimum
    train_config = TrainConfig(epochs=args.epochs, batch_size=args.batch,
                               seed=args.seed, crop_samples=crop,
                               crop_stride=args.stride, lr=args.lr)
    out = Path(args.out)
    ckpt_name = {"hier": "fold{k}.ckpt", "flat": "fold{k}.flat.ckpt"}
    artifacts = ["summary.csv", METRICS_FILE]
    for v in variants:
        artifacts += [f"confusion_{v}.csv", f"folds_{v}.csv"]
        artifacts += [ckpt_name[v].format(k=k) for k in range(args.folds)]
        artifacts += [f"{FIGURES_DIR}/confusion_{v}.png"]
    artifacts += [f"{FIGURES_DIR}/fold_accuracy.png"]
    config_lines = [
        f"data {args.data}",
        _model_config_line(model_config),
        (f"train_config epochs={train_config.epochs} batch={train_config.batch_size} "
         f"lr={train_config.lr!r} crop={crop} stride={train_config.crop_stride} "
         f"weight_decay={train_config.weight_decay!r}"),
        f"folds {args.folds}",
        "variants " + " ".join(variants),
        f"jobs {args.jobs}",
    ]
    RunManifest("cv", args.seed, config_lines, artifacts).write(out)

    report_rows = []
    metrics_lines = []
    fold_accs = {}
    for variant in variants:
        results = run_cross_validation(trial_set, model_config, train_config,
                                       args.folds, variant=variant, jobs=args.jobs)
        for r in results:
            save_checkpoint(r.model, out / ckpt_name[variant].format(k=r.fold_index),
                            variant=variant)
        metrics_lines += _metrics_lines(variant, results)
        accs = [r.accuracy for r in results]
        fold_accs[variant] = accs
        write_fold_accuracies(out, variant, accs)
        combined = ConfusionMatrix.combine([r.confusion for r in results])
        report_rows.append((variant, summarize_folds(accs), combined))
        print(f"{variant}: folds " + " ".join(format_number(a) for a in accs)
              + f", mean {format_number(summarize_folds(accs).mean)}")
    (out / METRICS_FILE).write_text("\n".join(metrics_lines) + "\n")
    emit_report(report_rows, out)
    _render_figures(report_rows, fold_accs, out)
    return 0


def _render_figures(report_rows, fold_accs, out: Path) -> None:
    from .figures import confusion_figure, fold_accuracy_figure

    fig_dir = out / FIGURES_DIR
    fig_dir.mkdir(parents=True, exist_ok=True)
    for name, _, cm in report_rows:
        confusion_figure(cm, fig_dir / f"confusion_{name}.png", name)
    fold_accuracy_figure(fold_accs, fig_dir / "fold_accuracy.png")


def cmd_predict(args) -> int:
    model, variant = load_checkpoint(args.ckpt)
    trial_set = load_dataset(args.data)
    channels, samples = _dataset_geometry(trial_set)
    if channels != model.config.channels:
        raise FormatError(
            f"{args.ckpt}: checkpoint expects {model.config.channels} channels, "
            f"dataset has {channels}")
    crop = args.crop or model.config.samples
    if crop != model.config.samples:
        raise ConfigurationError(
            f"crop window {crop} does not match the checkpoint's trained "
            f"width {model.config.samples}")
    if crop > samples:
        raise ConfigurationError(
            f"crop window {crop} is longer than the {samples}-sample trials")
    records = []
    correct = 0
    for trial in trial_set.trials:
        windows = crop_trial(trial, crop, args.stride)
        if variant == "hier":
            label, diag = predict(model, windows)
            branch_probs = (diag.short_probs if diag.branch is HyperLabel.short
                            else diag.long_probs)
            word_txt = ",".join(
                f"{w.name}:{float(p)!r}"
                for w, p in zip(BRANCH_WORDS[diag.branch], branch_probs))
            records.append(
                f"trial {trial.id} true={trial.label.name} pred={label.name} "
                f"branch={diag.branch.name} p_short={float(diag.length.p_short)!r} "
                f"p_long={float(diag.length.p_long)!r} words={word_txt}")
        else:
            label, avg = predict_flat(model, windows)
            word_txt = ",".join(f"{w.name}:{float(p)!r}"
                                for w, p in zip(VOCABULARY, avg))
            records.append(f"trial {trial.id} true={trial.label.name} "
                           f"pred={label.name} words={word_txt}")
        correct += label is trial.label
    accuracy = correct / len(trial_set.trials)
    records.append(f"accuracy {accuracy!r}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(records) + "\n")
    print(f"accuracy {format_number(100.0 * accuracy)} on {len(trial_set.trials)} trials")
    return 0


def _read_fold_csv(path: Path):
    lines = path.read_text().splitlines()
    if not lines or lines[0] != "fold,accuracy":
        raise FormatError(f"{path}: expected a fold,accuracy header")
    accs = []
    for line in lines[1:]:
        try:
            accs.append(float(line.split(",")[1]))
        except (IndexError, ValueError):
            raise FormatError(f"{path}: malformed row {line!r}")
    return accs


def _read_confusion_csv(path: Path) -> ConfusionMatrix:
    lines = path.read_text().splitlines()
    n = len(VOCABULARY)
    if len(lines) < 2 + n or lines[0] != "counts":
        raise FormatError(f"{path}: expected a counts block")
    counts = np.zeros((n, n), dtype=np.int64)
    for i, line in enumerate(lines[2:2 + n]):
        parts = line.split(",")
        if len(parts) != n + 1 or parts[0] != VOCABULARY[i].name:
            raise FormatError(f"{path}: malformed counts row {line!r}")
        counts[i] = [int(x) for x in parts[1:]]
    return ConfusionMatrix.from_counts(counts)


def cmd_report(args) -> int:
    src = Path(args.src)
    out = Path(args.out) if args.out else src
    names = sorted((p.stem.removeprefix("folds_") for p in src.glob("folds_*.csv")),
                   key=lambda n: ({"hier": 0, "flat": 1}.get(n, 2), n))
    if not names:
        raise FormatError(f"{src}: no folds_<model>.csv files to report from")
    rows = []
    fold_accs = {}
    for name in names:
        accs = _read_fold_csv(src / f"folds_{name}.csv")
        cm = _read_confusion_csv(src / f"confusion_{name}.csv")
        fold_accs[name] = accs
        rows.append((name, summarize_folds(accs), cm))
    emit_report(rows, out)
    _render_figures(rows, fold_accs, out)
    print(f"report for {', '.join(names)} written to {out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lengthwise",
        description="Length-gated hierarchical classifier for multichannel trials.")
    sub = parser.add_subparsers(dest="subcommand")

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--per-class", type=int, required=True, dest="per_class")
    p.add_argument("--channels", type=int, default=64)
    p.add_argument("--samples", type=int, default=512)
    p.add_argument("--rate", type=float, default=256.0)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("cv", help="cross-validated training and report")
    p.add_argument("--data", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p.add_argument("--batch", type=int, default=TrainConfig.batch_size)
    p.add_argument("--lr", type=float, default=TrainConfig.lr)
    p.add_argument("--crop", type=int, default=None)
    p.add_argument("--stride", type=int, default=TrainConfig.crop_stride)
    p.add_argument("--seed", type=int, default=TrainConfig.seed)
    p.add_argument("--model", choices=("hier", "flat", "both"), default="hier")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("predict", help="label a dataset with a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--crop", type=int, default=None)
    p.add_argument("--stride", type=int, default=TrainConfig.crop_stride)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report", help="re-render reports from a cv output directory")
    p.add_argument("--from", dest="src", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    if not hasattr(args, "func"):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except UsageError as err:
        print(f"error (usage): {err}", file=sys.stderr)
        return 2
    except ConfigurationError as err:
        print(f"error (configuration): {err}", file=sys.stderr)
        return 3
    except FormatError as err:
        print(f"error (format): {err}", file=sys.stderr)
        return 4
    except DimensionError as err:
        print(f"error (configuration): {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"error (io): {err}", file=sys.stderr)
        return 5
    except ValueError as err:
        print(f"error (usage): {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
