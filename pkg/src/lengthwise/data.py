"""Trial data model, the EEGT on-disk format, hyper-label mapping, and a
seeded synthetic generator that stands in for real recordings.

A trial is a channels x samples matrix with a word label. Words carry a
derived hyper-label: short (one syllable) or long (two or more). The
synthetic generator gives every hyper group a shared sine component and
every word its own, mixed across channels by fixed seeded vectors, so
the group signal is strictly stronger evidence than the word signal.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import FormatError

TRIAL_MAGIC = b"EEGT"
DATASET_INDEX = "dataset.txt"


class WordLabel(Enum):
    hello = 0
    help_me = 1
    thank_you = 2
    stop = 3
    yes = 4


class HyperLabel(Enum):
    short = 0
    long = 1


VOCABULARY = tuple(WordLabel)
LONG_WORDS = (WordLabel.hello, WordLabel.help_me, WordLabel.thank_you)
SHORT_WORDS = (WordLabel.stop, WordLabel.yes)
BRANCH_WORDS = {HyperLabel.short: SHORT_WORDS, HyperLabel.long: LONG_WORDS}


def hyper_label(label: WordLabel) -> HyperLabel:
    """Map a word to its length group: 3 long words, 2 short words."""
    return HyperLabel.long if label in LONG_WORDS else HyperLabel.short


def branch_class_index(label: WordLabel) -> int:
    """Index of a word within its own branch's class order."""
    return BRANCH_WORDS[hyper_label(label)].index(label)


@dataclass
class EEGTrial:
    """One labeled recording; data [channels, samples], 64-bit in memory."""

    id: str
    channels: int
    samples: int
    data: np.ndarray
    label: WordLabel
    sample_rate_hz: float

    def __post_init__(self):
        if self.data.shape != (self.channels, self.samples):
            raise ValueError(
                f"trial {self.id}: data shape {self.data.shape} does not match "
                f"header ({self.channels}, {self.samples})")
        if not np.all(np.isfinite(self.data)):
            raise ValueError(f"trial {self.id}: non-finite sample values")


@dataclass
class TrialSet:
    """A named collection of trials sharing one sample rate."""

    name: str
    sample_rate_hz: float
    trials: list

    def by_label(self) -> dict:
        out = {label: [] for label in VOCABULARY}
        for t in self.trials:
            out[t.label].append(t)
        return out


def _default_class_freqs() -> dict:
    return {WordLabel.hello: 6.0, WordLabel.help_me: 8.0, WordLabel.thank_you: 12.0,
            WordLabel.stop: 14.0, WordLabel.yes: 16.0}


def _default_group_freqs() -> dict:
    return {HyperLabel.short: 10.0, HyperLabel.long: 20.0}


@dataclass
class SynthSpec:
    """Parameters of the synthetic generator."""

    n_per_class: int
    channels: int = 64
    samples: int = 512
    sample_rate_hz: float = 256.0
    group_freq_hz: dict = field(default_factory=_default_group_freqs)
    class_freq_hz: dict = field(default_factory=_default_class_freqs)
    amplitude: float = 1.0
    noise_sigma: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_per_class < 1:
            raise ValueError("n_per_class must be at least 1")
        if self.channels < 1 or self.samples < 1:
            raise ValueError("channels and samples must be at least 1")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        nyquist = self.sample_rate_hz / 2.0
        for f in list(self.group_freq_hz.values()) + list(self.class_freq_hz.values()):
            if not 0 < f < nyquist:
                raise ValueError(
                    f"frequency {f} Hz outside (0, Nyquist {nyquist} Hz)")


def synthesize_dataset(spec: SynthSpec) -> TrialSet:
    """Generate n_per_class trials per word, deterministic for a given seed.

    Each trial is amplitude * (m_group * sin(group tone) + m_class *
    sin(class tone)) plus Gaussian noise. Draw order is fixed: group
    mixing vectors (short, long), class mixing vectors in vocabulary
    order, then per trial phase1, phase2, noise, trials generated
    class-major in vocabulary order.
    """
    rng = np.random.default_rng(spec.seed)
    group_mix = {g: rng.standard_normal(spec.channels) for g in HyperLabel}
    class_mix = {label: rng.standard_normal(spec.channels) for label in VOCABULARY}
    t = np.arange(spec.samples) / spec.sample_rate_hz
    trials = []
    for label in VOCABULARY:
        group = hyper_label(label)
        f_group = spec.group_freq_hz[group]
        f_class = spec.class_freq_hz[label]
        for i in range(spec.n_per_class):
            phase1 = rng.uniform(0.0, 2.0 * np.pi)
            phase2 = rng.uniform(0.0, 2.0 * np.pi)
            noise = rng.standard_normal((spec.channels, spec.samples))
            x = spec.amplitude * (
                group_mix[group][:, None] * np.sin(2.0 * np.pi * f_group * t + phase1)
                + class_mix[label][:, None] * np.sin(2.0 * np.pi * f_class * t + phase2))
            x = x + spec.noise_sigma * noise
            trials.append(EEGTrial(
                id=f"{label.name}_{i:03d}", channels=spec.channels,
                samples=spec.samples, data=x, label=label,
                sample_rate_hz=spec.sample_rate_hz))
    return TrialSet(name="synthetic", sample_rate_hz=spec.sample_rate_hz, trials=trials)


def save_dataset(trial_set: TrialSet, directory) -> None:
    """Write one EEGT file per trial plus the dataset.txt index.

    Trial file layout: magic "EEGT", u32 little-endian channel count,
    u32 sample count, then channels*samples 32-bit little-endian floats
    in channel-major order. Re-saving the same set is byte-identical.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [f"name {trial_set.name}",
             f"sample_rate_hz {trial_set.sample_rate_hz!r}",
             "vocabulary " + " ".join(label.name for label in VOCABULARY)]
    for trial in trial_set.trials:
        fname = f"{trial.id}.eegt"
        payload = (TRIAL_MAGIC
                   + struct.pack("<II", trial.channels, trial.samples)
                   + trial.data.astype("<f4").tobytes())
        (directory / fname).write_bytes(payload)
        lines.append(f"trial {fname} {trial.label.name}")
    (directory / DATASET_INDEX).write_text("\n".join(lines) + "\n")


def _load_trial_file(path: Path, label: WordLabel, sample_rate_hz: float) -> EEGTrial:
    raw = path.read_bytes()
    if raw[:4] != TRIAL_MAGIC:
        raise FormatError(f"{path}: bad magic, not an EEGT trial file")
    if len(raw) < 12:
        raise FormatError(f"{path}: truncated header")
    channels, samples = struct.unpack("<II", raw[4:12])
    expected = channels * samples * 4
    body = raw[12:]
    if len(body) < expected:
        raise FormatError(
            f"{path}: truncated, expected {expected} data bytes, found {len(body)}")
    if len(body) > expected:
        raise FormatError(f"{path}: trailing data after {expected} expected bytes")
    data = np.frombuffer(body, dtype="<f4").astype(np.float64).reshape(channels, samples)
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: non-finite sample values")
    return EEGTrial(id=path.stem, channels=channels, samples=samples,
                    data=data, label=label, sample_rate_hz=sample_rate_hz)


def load_dataset(directory) -> TrialSet:
    """Read a dataset directory back; fails atomically on any defect."""
    directory = Path(directory)
    index = directory / DATASET_INDEX
    text = index.read_text()
    name = None
    sample_rate_hz = None
    entries = []
    by_name = {label.name: label for label in VOCABULARY}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        tag, _, rest = line.partition(" ")
        if tag == "name":
            name = rest
        elif tag == "sample_rate_hz":
            try:
                sample_rate_hz = float(rest)
            except ValueError:
                raise FormatError(f"{index}: line {lineno}: bad sample rate {rest!r}")
        elif tag == "vocabulary":
            if rest.split() != [label.name for label in VOCABULARY]:
                raise FormatError(f"{index}: line {lineno}: vocabulary mismatch")
        elif tag == "trial":
            parts = rest.split()
            if len(parts) != 2:
                raise FormatError(f"{index}: line {lineno}: malformed trial entry")
            fname, label_name = parts
            if label_name not in by_name:
                raise FormatError(f"{index}: line {lineno}: unknown label {label_name!r}")
            entries.append((fname, by_name[label_name]))
        else:
            raise FormatError(f"{index}: line {lineno}: unknown tag {tag!r}")
    if name is None or sample_rate_hz is None:
        raise FormatError(f"{index}: missing name or sample_rate_hz")
    trials = []
    for fname, label in entries:
        path = directory / fname
        if not path.exists():
            raise FormatError(f"{index}: trial file {fname} missing for id {Path(fname).stem}")
        try:
            trials.append(_load_trial_file(path, label, sample_rate_hz))
        except ValueError as err:
            if isinstance(err, FormatError):
                raise
            raise FormatError(f"{path}: {err}")
    return TrialSet(name=name, sample_rate_hz=sample_rate_hz, trials=trials)
