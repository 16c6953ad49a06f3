"""Model assembly and inference routing.

One shared trunk (temporal conv, spatial conv, pool) produces the
feature tensor consumed by four heads: the 2-way length gate, the
short-word branch (M classes), the long-word branch (N classes), and a
flat 5-way baseline used only as a control. Inference averages window
distributions, routes by the gate's argmax, then argmaxes the selected
branch. Checkpoints round-trip bitwise.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .data import BRANCH_WORDS, HyperLabel, VOCABULARY, WordLabel
from .errors import ConfigurationError, DimensionError, FormatError
from .kernel import (AvgPoolLayer, ConvLayer, FCLayer, avgpool_forward,
                     conv2d_forward, elu, fc_forward, softmax)

CHECKPOINT_MAGIC = b"LWM1"
# pooling window and stride shared by the trunk and the word branches
POOL = 3
# the length head's own conv kernel and pool window
LENGTH_KERNEL = 16
LENGTH_POOL = 15
N_CLASSES = len(VOCABULARY)


@dataclass(frozen=True)
class ModelConfig:
    channels: int = 64
    samples: int = 512
    trunk_filters: int = 36
    word_filters: tuple = (72, 144, 288)
    temporal_kernel: int = 64
    word_kernel: int = 10
    n_short: int = 2
    n_long: int = 3


@dataclass(frozen=True)
class ShapeReport:
    """Every computed width in the pipeline; nothing is hard-coded."""

    conv_width: int          # after the temporal conv (spatial conv keeps it)
    feature_width: int       # after the trunk pool
    length_conv_width: int
    length_pool_width: int
    length_fc_in: int
    branch_widths: tuple     # after conv1, pool1, conv2, pool2, conv3, pool3
    branch_fc_in: int
    flat_fc_in: int


def _conv_out(width: int, kernel: int) -> int:
    return width - kernel + 1


def _pool_out(width: int, pool: int, stride: int) -> int:
    # the model caps a pool window at the available width, so narrow
    # tails collapse to a single averaged output instead of failing
    return (width - min(pool, width)) // stride + 1


def _min_in_for_pool(out_width: int, pool: int, stride: int) -> int:
    if out_width <= 1:
        return 1
    return pool + stride * (out_width - 1)


def _min_in_for_conv(out_width: int, kernel: int) -> int:
    return out_width + kernel - 1


def min_feature_width(config: ModelConfig) -> int:
    """Smallest trunk feature width every head can consume."""
    need = 1
    for _ in config.word_filters:
        need = _min_in_for_conv(_min_in_for_pool(need, POOL, POOL), config.word_kernel)
    return max(need, LENGTH_KERNEL)


def min_samples(config: ModelConfig) -> int:
    """Smallest input width the architecture accepts, by backward
    shape-requirement arithmetic through the trunk."""
    feat = min_feature_width(config)
    return _min_in_for_conv(_min_in_for_pool(feat, POOL, POOL), config.temporal_kernel)


def compute_shapes(config: ModelConfig) -> ShapeReport:
    """Validate the config and derive every width via the conv/pool formulas."""
    for name in ("channels", "samples", "trunk_filters", "temporal_kernel",
                 "word_kernel", "n_short", "n_long"):
        if getattr(config, name) < 1:
            raise ConfigurationError(f"{name} must be at least 1")
    if len(config.word_filters) != 3 or any(f < 1 for f in config.word_filters):
        raise ConfigurationError("word_filters must be three positive counts")
    need = min_samples(config)
    if config.samples < need:
        raise ConfigurationError(
            f"input width {config.samples} is below the architecture minimum {need}")
    conv_w = _conv_out(config.samples, config.temporal_kernel)
    feat_w = _pool_out(conv_w, POOL, POOL)
    len_conv_w = _conv_out(feat_w, LENGTH_KERNEL)
    len_pool_w = _pool_out(len_conv_w, LENGTH_POOL, LENGTH_POOL)
    widths = []
    w = feat_w
    for _ in config.word_filters:
        w = _conv_out(w, config.word_kernel)
        widths.append(w)
        w = _pool_out(w, POOL, POOL)
        widths.append(w)
    return ShapeReport(
        conv_width=conv_w,
        feature_width=feat_w,
        length_conv_width=len_conv_w,
        length_pool_width=len_pool_w,
        length_fc_in=config.trunk_filters * len_pool_w,
        branch_widths=tuple(widths),
        branch_fc_in=config.word_filters[-1] * widths[-1],
        flat_fc_in=config.trunk_filters * feat_w)


@dataclass
class LengthProbs:
    p_short: float
    p_long: float


@dataclass
class WordBranch:
    convs: list
    pools: list
    fc: FCLayer


@dataclass
class HierarchicalModel:
    config: ModelConfig
    shapes: ShapeReport
    trunk_temporal: ConvLayer
    trunk_spatial: ConvLayer
    trunk_pool: AvgPoolLayer
    length_conv: ConvLayer
    length_pool: AvgPoolLayer
    length_fc: FCLayer
    short: WordBranch
    long: WordBranch
    flat_fc: FCLayer

    def branch(self, group: HyperLabel) -> WordBranch:
        return self.short if group is HyperLabel.short else self.long

    def parameters(self):
        """(name, array) pairs in the fixed draw/serialization order."""
        named = [("trunk_temporal", self.trunk_temporal),
                 ("trunk_spatial", self.trunk_spatial),
                 ("length_conv", self.length_conv),
                 ("length_fc", self.length_fc)]
        for prefix, br in (("short", self.short), ("long", self.long)):
            for i, conv in enumerate(br.convs, start=1):
                named.append((f"{prefix}_conv{i}", conv))
            named.append((f"{prefix}_fc", br.fc))
        named.append(("flat_fc", self.flat_fc))
        out = []
        for name, layer in named:
            out.append((f"{name}.weights", layer.weights))
            out.append((f"{name}.bias", layer.bias))
        return out

    def param_dict(self) -> dict:
        return dict(self.parameters())


def _build_branch(rng, config: ModelConfig, shapes: ShapeReport, n_out: int) -> WordBranch:
    convs, pools = [], []
    in_ch = config.trunk_filters
    for stage, out_f in enumerate(config.word_filters):
        convs.append(ConvLayer.seeded(rng, 1, config.word_kernel, in_ch, out_f))
        conv_w = shapes.branch_widths[2 * stage]
        pools.append(AvgPoolLayer(1, min(POOL, conv_w), 1, POOL))
        in_ch = out_f
    fc = FCLayer.seeded(rng, shapes.branch_fc_in, n_out)
    return WordBranch(convs, pools, fc)


def build_model(config: ModelConfig, seed: int) -> HierarchicalModel:
    """Assemble a model with seeded parameters; identical seed and
    config give bitwise-identical parameters. Draw order is the
    parameters() order."""
    shapes = compute_shapes(config)
    rng = np.random.default_rng(seed)
    trunk_temporal = ConvLayer.seeded(rng, 1, config.temporal_kernel, 1, config.trunk_filters)
    trunk_spatial = ConvLayer.seeded(rng, config.channels, 1,
                                     config.trunk_filters, config.trunk_filters)
    trunk_pool = AvgPoolLayer(1, min(POOL, shapes.conv_width), 1, POOL)
    length_conv = ConvLayer.seeded(rng, 1, LENGTH_KERNEL,
                                   config.trunk_filters, config.trunk_filters)
    length_pool = AvgPoolLayer(1, min(LENGTH_POOL, shapes.length_conv_width), 1, LENGTH_POOL)
    length_fc = FCLayer.seeded(rng, shapes.length_fc_in, 2)
    short = _build_branch(rng, config, shapes, config.n_short)
    long = _build_branch(rng, config, shapes, config.n_long)
    flat_fc = FCLayer.seeded(rng, shapes.flat_fc_in, N_CLASSES)
    return HierarchicalModel(config, shapes, trunk_temporal, trunk_spatial, trunk_pool,
                             length_conv, length_pool, length_fc, short, long, flat_fc)


def forward_trunk(model: HierarchicalModel, window: np.ndarray) -> np.ndarray:
    """Shared feature for one window [1, channels, samples] -> [filters, 1, width]."""
    if window.ndim != 3 or window.shape[0] != 1:
        raise DimensionError(f"trunk expects a [1, channels, samples] window, got {window.shape}")
    if window.shape[1] != model.config.channels:
        raise DimensionError(
            f"trunk: channel axis is {window.shape[1]}, model expects {model.config.channels}")
    if window.shape[2] != model.config.samples:
        raise DimensionError(
            f"trunk: width axis is {window.shape[2]}, model expects {model.config.samples}")
    a = conv2d_forward(window[None], model.trunk_temporal)
    a = conv2d_forward(a, model.trunk_spatial)
    a = avgpool_forward(elu(a), model.trunk_pool)
    return a[0]


def forward_length(model: HierarchicalModel, feature: np.ndarray) -> LengthProbs:
    """Length gate: feature -> 2-way distribution (short, long)."""
    a = conv2d_forward(feature[None], model.length_conv)
    a = avgpool_forward(elu(a), model.length_pool)
    logits = fc_forward(a.reshape(1, -1), model.length_fc)
    p = softmax(logits)[0]
    return LengthProbs(float(p[0]), float(p[1]))


def forward_word(model: HierarchicalModel, branch, feature: np.ndarray) -> np.ndarray:
    """One word branch: feature -> distribution over that branch's classes."""
    if isinstance(branch, str):
        branch = HyperLabel[branch]
    br = model.branch(branch)
    a = feature[None]
    for conv, pool in zip(br.convs, br.pools):
        a = avgpool_forward(elu(conv2d_forward(a, conv)), pool)
    logits = fc_forward(a.reshape(1, -1), br.fc)
    return softmax(logits)[0]


def forward_flat(model: HierarchicalModel, feature: np.ndarray) -> np.ndarray:
    """Flat baseline: feature -> 5-way distribution."""
    logits = fc_forward(feature.reshape(1, -1), model.flat_fc)
    return softmax(logits)[0]


@dataclass
class PredictDiagnostics:
    length: LengthProbs      # averaged over windows
    short_probs: np.ndarray  # averaged over windows
    long_probs: np.ndarray
    branch: HyperLabel       # where routing sent the trial


def predict(model: HierarchicalModel, trial_windows):
    """Average distributions over windows, route by the gate, pick the word.

    A routing tie goes to the short branch. Returns (label, diagnostics).
    """
    if len(trial_windows) == 0:
        raise ValueError("predict needs at least one window")
    length_sum = np.zeros(2)
    short_sum = np.zeros(model.config.n_short)
    long_sum = np.zeros(model.config.n_long)
    for window in trial_windows:
        w = window if window.ndim == 3 else window[None]
        feature = forward_trunk(model, w)
        gate = forward_length(model, feature)
        length_sum += (gate.p_short, gate.p_long)
        short_sum += forward_word(model, HyperLabel.short, feature)
        long_sum += forward_word(model, HyperLabel.long, feature)
    n = len(trial_windows)
    length_avg = LengthProbs(length_sum[0] / n, length_sum[1] / n)
    short_avg, long_avg = short_sum / n, long_sum / n
    branch = HyperLabel.short if length_avg.p_short >= length_avg.p_long else HyperLabel.long
    probs = short_avg if branch is HyperLabel.short else long_avg
    label = BRANCH_WORDS[branch][int(np.argmax(probs))]
    return label, PredictDiagnostics(length_avg, short_avg, long_avg, branch)


def predict_flat(model: HierarchicalModel, trial_windows):
    """Baseline decision rule: average the 5-way distribution, argmax."""
    if len(trial_windows) == 0:
        raise ValueError("predict needs at least one window")
    total = np.zeros(N_CLASSES)
    for window in trial_windows:
        w = window if window.ndim == 3 else window[None]
        total += forward_flat(model, forward_trunk(model, w))
    avg = total / len(trial_windows)
    return VOCABULARY[int(np.argmax(avg))], avg


def _config_line(config: ModelConfig) -> str:
    parts = []
    for f in fields(config):
        v = getattr(config, f.name)
        if f.name == "word_filters":
            v = ",".join(str(x) for x in v)
        parts.append(f"{f.name}={v}")
    return "config " + " ".join(parts)


def save_checkpoint(model: HierarchicalModel, path, variant: str = "hier") -> None:
    """Write magic "LWM1", a length-prefixed UTF-8 manifest (variant,
    config, ordered parameter names with shapes), then raw 64-bit
    little-endian parameter data in manifest order."""
    lines = [f"variant {variant}", _config_line(model.config)]
    params = model.parameters()
    for name, arr in params:
        lines.append("param " + name + " " + " ".join(str(d) for d in arr.shape))
    manifest = ("\n".join(lines) + "\n").encode("utf-8")
    blob = bytearray(CHECKPOINT_MAGIC)
    blob += struct.pack("<I", len(manifest))
    blob += manifest
    for _, arr in params:
        blob += arr.astype("<f8", copy=False).tobytes()
    with open(path, "wb") as fh:
        fh.write(blob)


def _parse_config_line(rest: str, path) -> ModelConfig:
    kv = {}
    for token in rest.split():
        key, _, value = token.partition("=")
        kv[key] = value
    try:
        return ModelConfig(
            channels=int(kv["channels"]), samples=int(kv["samples"]),
            trunk_filters=int(kv["trunk_filters"]),
            word_filters=tuple(int(x) for x in kv["word_filters"].split(",")),
            temporal_kernel=int(kv["temporal_kernel"]), word_kernel=int(kv["word_kernel"]),
            n_short=int(kv["n_short"]), n_long=int(kv["n_long"]))
    except (KeyError, ValueError) as err:
        raise FormatError(f"{path}: bad config line in checkpoint manifest ({err})")


def load_checkpoint(path):
    """Read a checkpoint back; returns (model, variant). Bitwise inverse
    of save_checkpoint."""
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic, not a checkpoint file")
    if len(raw) < 8:
        raise FormatError(f"{path}: truncated header")
    (manifest_len,) = struct.unpack("<I", raw[4:8])
    manifest_end = 8 + manifest_len
    if len(raw) < manifest_end:
        raise FormatError(f"{path}: truncated manifest")
    try:
        manifest = raw[8:manifest_end].decode("utf-8")
    except UnicodeDecodeError:
        raise FormatError(f"{path}: manifest is not valid UTF-8")
    variant = None
    config = None
    param_lines = []
    for line in manifest.splitlines():
        if not line.strip():
            continue
        tag, _, rest = line.partition(" ")
        if tag == "variant":
            variant = rest
        elif tag == "config":
            config = _parse_config_line(rest, path)
        elif tag == "param":
            parts = rest.split()
            if not parts:
                raise FormatError(f"{path}: malformed param line in manifest")
            param_lines.append((parts[0], tuple(int(d) for d in parts[1:])))
        else:
            raise FormatError(f"{path}: unknown manifest tag {tag!r}")
    if variant not in ("hier", "flat"):
        raise FormatError(f"{path}: missing or unknown variant {variant!r}")
    if config is None:
        raise FormatError(f"{path}: manifest has no config line")
    model = build_model(config, seed=0)
    registry = model.param_dict()
    if [n for n, _ in param_lines] != [n for n, _ in model.parameters()]:
        raise FormatError(f"{path}: manifest parameter list does not match the architecture")
    cursor = manifest_end
    for name, shape in param_lines:
        target = registry[name]
        if target.shape != shape:
            raise FormatError(
                f"{path}: parameter {name} has shape {shape}, architecture "
                f"expects {target.shape}")
        nbytes = target.size * 8
        chunk = raw[cursor:cursor + nbytes]
        if len(chunk) < nbytes:
            raise FormatError(f"{path}: truncated parameter data for {name}")
        target[...] = np.frombuffer(chunk, dtype="<f8").reshape(shape)
        cursor += nbytes
    if cursor != len(raw):
        raise FormatError(f"{path}: trailing data after parameters")
    return model, variant
