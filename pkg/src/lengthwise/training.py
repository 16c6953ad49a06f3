"""Joint training of the gate and branches with the confidence-weighted
loss, cropped decoding, stratified k-fold cross-validation, and the
determinism contract.

Per trial the loss is l_length + l_short + l_long: an unweighted
cross-entropy on the gate against the trial's true length group, plus
the true branch's cross-entropy scaled by the gate's probability for
that group. The scaling probability is a constant in the backward pass,
so the gate is supervised by l_length alone while the trunk still
receives branch gradients through the shared feature.

Batches run through a fused channels-first engine (one unfold for the
temporal conv, the spatial conv consuming a pure reshape view). The
per-window layer ops in the kernel module are the semantic reference;
tests pin the two paths together to 1e-12.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, replace

import numpy as np

from .data import (BRANCH_WORDS, HyperLabel, VOCABULARY, WordLabel,
                   branch_class_index, hyper_label)
from .errors import DimensionError
from .evaluate import ConfusionMatrix
from .kernel import PROB_FLOOR, AdamWState, adamw_step, elu, elu_backward, softmax
from .model import HierarchicalModel, LengthProbs, ModelConfig, build_model

# purpose tags mixed into the seed stream so each consumer draws independently
SEED_INIT = 1
SEED_SHUFFLE = 2
SEED_SPLIT = 3
SEED_FOLD = 4


def derive_seed(*parts) -> int:
    """Deterministic child seed from a master seed plus purpose tags."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 16
    seed: int = 0
    crop_samples: int | None = None   # None = whole trial
    crop_stride: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.01


@dataclass
class LengthwiseLoss:
    l_length: float
    l_short: float
    l_long: float
    total: float


@dataclass
class EpochStats:
    l_length: float
    l_short: float
    l_long: float
    total: float
    train_acc: float


@dataclass
class FoldSpec:
    fold_index: int
    train_ids: list
    val_ids: list


@dataclass
class FoldResult:
    fold_index: int
    accuracy: float                 # percent on the held-out fold
    confusion: ConfusionMatrix
    epoch_stats: list
    model: HierarchicalModel


def crop_trial(trial, crop_samples: int, stride: int):
    """Windows at offsets 0, stride, 2*stride, ...; count floor((T-C)/S)+1.

    Each window is a [channels, crop_samples] slice of the trial.
    """
    if stride < 1:
        raise ValueError("stride must be at least 1")
    if crop_samples < 1:
        raise ValueError("crop_samples must be at least 1")
    if crop_samples > trial.samples:
        raise ValueError(
            f"crop of {crop_samples} samples is longer than the "
            f"{trial.samples}-sample trial")
    count = (trial.samples - crop_samples) // stride + 1
    return [trial.data[:, k * stride:k * stride + crop_samples] for k in range(count)]


def lengthwise_loss_from_probs(length_probs: LengthProbs, short_probs,
                               long_probs, label: WordLabel) -> LengthwiseLoss:
    """Compose the three loss terms from already-computed distributions."""
    group = hyper_label(label)
    p = np.array([length_probs.p_short, length_probs.p_long])
    l_length = float(-np.log(max(p[group.value], PROB_FLOOR)))
    cls = branch_class_index(label)
    if group is HyperLabel.short:
        l_short = length_probs.p_short * float(-np.log(max(float(short_probs[cls]), PROB_FLOOR)))
        l_long = 0.0
    else:
        l_short = 0.0
        l_long = length_probs.p_long * float(-np.log(max(float(long_probs[cls]), PROB_FLOOR)))
    return LengthwiseLoss(l_length, l_short, l_long, l_length + l_short + l_long)


# ---------------------------------------------------------------------------
# fused batched engine
# ---------------------------------------------------------------------------

def _pool_fwd(z: np.ndarray, pool_w: int, stride: int) -> np.ndarray:
    """Pool [C, B, W] along W. pool_w is the build-time (possibly capped)
    window, so pool_w <= W always holds here."""
    c, b, w = z.shape
    out_w = (w - pool_w) // stride + 1
    if pool_w == stride:
        return z[:, :, :out_w * stride].reshape(c, b, out_w, stride).mean(axis=3)
    # capped tail window: a single output averaging the first pool_w samples
    return z[:, :, :pool_w].mean(axis=2, keepdims=True)


def _pool_bwd(dout: np.ndarray, pool_w: int, stride: int, in_shape) -> np.ndarray:
    dz = np.zeros(in_shape)
    out_w = dout.shape[2]
    if pool_w == stride:
        dz[:, :, :out_w * stride] = np.repeat(dout / pool_w, stride, axis=2)
    else:
        dz[:, :, :pool_w] = dout / pool_w
    return dz


def _head_conv_fwd(z: np.ndarray, conv):
    """Conv kernel (1, k) over [C, B, W] -> ([F, B, W-k+1], unfolded cols)."""
    c, b, w = z.shape
    k = conv.kernel_w
    out_w = w - k + 1
    cols = np.empty((c * k, b * out_w))
    c3 = cols.reshape(c, k, b, out_w)
    for dx in range(k):
        c3[:, dx] = z[:, :, dx:dx + out_w]
    flat = conv.weights.reshape(conv.out_filters, c * k) @ cols + conv.bias[:, None]
    return flat.reshape(conv.out_filters, b, out_w), cols


def _head_conv_bwd(dout: np.ndarray, cols: np.ndarray, conv, in_shape):
    c, b, w = in_shape
    k = conv.kernel_w
    out_w = w - k + 1
    g = dout.reshape(conv.out_filters, b * out_w)
    dw = (g @ cols.T).reshape(conv.weights.shape)
    db = g.sum(axis=1)
    dcols = conv.weights.reshape(conv.out_filters, c * k).T @ g
    d3 = dcols.reshape(c, k, b, out_w)
    dz = np.zeros(in_shape)
    for dx in range(k):
        dz[:, :, dx:dx + out_w] += d3[:, dx]
    return dz, dw, db


def _trunk_forward(model: HierarchicalModel, batch: np.ndarray, want_cache: bool):
    """Batch [B, channels, samples] -> feature [filters, B, width]."""
    cfg = model.config
    b, ch, s = batch.shape
    if ch != cfg.channels:
        raise DimensionError(f"batch channel axis is {ch}, model expects {cfg.channels}")
    if s != cfg.samples:
        raise DimensionError(f"batch width axis is {s}, model expects {cfg.samples}")
    tt, ts = model.trunk_temporal, model.trunk_spatial
    tk, ft = tt.kernel_w, tt.out_filters
    conv_w = s - tk + 1
    x_t = np.ascontiguousarray(batch.transpose(1, 0, 2))
    # unfold once; the trailing all-ones row folds the bias into the GEMM
    cols = np.empty((tk + 1, ch * b * conv_w))
    c3 = cols.reshape(tk + 1, ch, b, conv_w)
    for k in range(tk):
        c3[k] = x_t[:, :, k:k + conv_w]
    c3[tk] = 1.0
    w1 = np.empty((ft, tk + 1))
    w1[:, :tk] = tt.weights.reshape(ft, tk)
    w1[:, tk] = tt.bias
    a1 = w1 @ cols                                # [ft, ch*b*conv_w]
    # the spatial conv consumes a pure view: (f, c) rows over (b, x) columns
    a2 = (ts.weights.reshape(ft, ft * ch) @ a1.reshape(ft * ch, b * conv_w)
          + ts.bias[:, None])
    z2 = elu(a2)
    feature = _pool_fwd(z2.reshape(ft, b, conv_w), model.trunk_pool.pool_w,
                        model.trunk_pool.stride_w)
    cache = {"cols": cols, "a1": a1, "a2": a2, "bwc": (b, conv_w)} if want_cache else None
    return feature, cache


def _trunk_backward(model: HierarchicalModel, cache, dfeature: np.ndarray, grads: dict):
    tt, ts = model.trunk_temporal, model.trunk_spatial
    ft, ch = tt.out_filters, model.config.channels
    b, conv_w = cache["bwc"]
    tk = tt.kernel_w
    dz2 = _pool_bwd(dfeature, model.trunk_pool.pool_w, model.trunk_pool.stride_w,
                    (ft, b, conv_w)).reshape(ft, b * conv_w)
    da2 = elu_backward(cache["a2"], dz2)
    a1v = cache["a1"].reshape(ft * ch, b * conv_w)
    grads["trunk_spatial.weights"] = (da2 @ a1v.T).reshape(ts.weights.shape)
    grads["trunk_spatial.bias"] = da2.sum(axis=1)
    da1 = (ts.weights.reshape(ft, ft * ch).T @ da2).reshape(ft, ch * b * conv_w)
    dw1aug = da1 @ cache["cols"].T                # [ft, tk+1], bias row included
    grads["trunk_temporal.weights"] = np.ascontiguousarray(dw1aug[:, :tk]).reshape(tt.weights.shape)
    grads["trunk_temporal.bias"] = dw1aug[:, tk].copy()


def _head_forward(feature: np.ndarray, convs, pools, fc, want_cache: bool):
    z = feature
    stages = []
    for conv, pool in zip(convs, pools):
        out, cols = _head_conv_fwd(z, conv)
        act = elu(out)
        pooled = _pool_fwd(act, pool.pool_w, pool.stride_w)
        if want_cache:
            stages.append((z.shape, cols, out, act.shape))
        z = pooled
    b = z.shape[1]
    x2 = np.ascontiguousarray(z.transpose(1, 0, 2)).reshape(b, -1)
    probs = softmax(x2 @ fc.weights.T + fc.bias)
    cache = {"stages": stages, "x2": x2, "zshape": z.shape} if want_cache else None
    return probs, cache


def _head_backward(dlogits: np.ndarray, cache, convs, pools, fc, grads: dict, prefix: str):
    """Backprop one head; returns the gradient w.r.t. the shared feature."""
    grads[f"{prefix}_fc.weights"] = dlogits.T @ cache["x2"]
    grads[f"{prefix}_fc.bias"] = dlogits.sum(axis=0)
    f_last, _, w_last = cache["zshape"]
    dz = (dlogits @ fc.weights).reshape(-1, f_last, w_last).transpose(1, 0, 2)
    # single-conv heads register as "<prefix>_conv", multi-conv as "<prefix>_conv<i>"
    if len(convs) == 1:
        names = [f"{prefix}_conv"]
    else:
        names = [f"{prefix}_conv{i}" for i in range(1, len(convs) + 1)]
    for stage in range(len(convs) - 1, -1, -1):
        in_shape, cols, out, act_shape = cache["stages"][stage]
        pool = pools[stage]
        dact = _pool_bwd(dz, pool.pool_w, pool.stride_w, act_shape)
        dout = elu_backward(out, dact)
        dz, dw, db = _head_conv_bwd(dout, cols, convs[stage], in_shape)
        grads[f"{names[stage]}.weights"] = dw
        grads[f"{names[stage]}.bias"] = db
    return dz


@dataclass
class BatchOutputs:
    length_probs: np.ndarray   # [B, 2]
    short_probs: np.ndarray    # [B, n_short]
    long_probs: np.ndarray     # [B, n_long]
    flat_probs: np.ndarray | None


def _forward_batch(model: HierarchicalModel, batch: np.ndarray, variant: str,
                   want_cache: bool):
    feature, trunk_cache = _trunk_forward(model, batch, want_cache)
    caches = {"trunk": trunk_cache, "feature_shape": feature.shape}
    if variant == "flat":
        b = feature.shape[1]
        x2 = np.ascontiguousarray(feature.transpose(1, 0, 2)).reshape(b, -1)
        flat_probs = softmax(x2 @ model.flat_fc.weights.T + model.flat_fc.bias)
        caches["flat_x2"] = x2
        return BatchOutputs(None, None, None, flat_probs), caches
    length_probs, caches["length"] = _head_forward(
        feature, [model.length_conv], [model.length_pool], model.length_fc, want_cache)
    short_probs, caches["short"] = _head_forward(
        feature, model.short.convs, model.short.pools, model.short.fc, want_cache)
    long_probs, caches["long"] = _head_forward(
        feature, model.long.convs, model.long.pools, model.long.fc, want_cache)
    return BatchOutputs(length_probs, short_probs, long_probs, None), caches


def _hier_stats_and_seeds(outputs: BatchOutputs, labels):
    """Per-sample loss terms, batch means, accuracy hits, and the CE
    logit gradients for each head (weights detached)."""
    b = len(labels)
    length_probs = outputs.length_probs
    hyper_idx = np.array([hyper_label(l).value for l in labels])
    cls_idx = np.array([branch_class_index(l) for l in labels])
    is_short = hyper_idx == 0
    rows = np.arange(b)
    l_len = -np.log(np.maximum(length_probs[rows, hyper_idx], PROB_FLOOR))
    safe_short = np.where(is_short, cls_idx, 0)
    safe_long = np.where(is_short, 0, cls_idx)
    ce_short = -np.log(np.maximum(outputs.short_probs[rows, safe_short], PROB_FLOOR))
    ce_long = -np.log(np.maximum(outputs.long_probs[rows, safe_long], PROB_FLOOR))
    weight = np.where(is_short, length_probs[:, 0], length_probs[:, 1])
    l_short = np.where(is_short, weight * ce_short, 0.0)
    l_long = np.where(is_short, 0.0, weight * ce_long)

    dlen = length_probs.copy()
    dlen[rows, hyper_idx] -= 1.0
    dlen /= b
    dshort = outputs.short_probs.copy()
    dshort[rows, safe_short] -= 1.0
    dshort *= (np.where(is_short, weight, 0.0) / b)[:, None]
    dlong = outputs.long_probs.copy()
    dlong[rows, safe_long] -= 1.0
    dlong *= (np.where(is_short, 0.0, weight) / b)[:, None]

    route_short = length_probs[:, 0] >= length_probs[:, 1]
    pred = np.where(route_short,
                    np.argmax(outputs.short_probs, axis=1),
                    np.argmax(outputs.long_probs, axis=1))
    hits = 0
    for i, label in enumerate(labels):
        words = BRANCH_WORDS[HyperLabel.short if route_short[i] else HyperLabel.long]
        hits += words[int(pred[i])] is label
    stats = EpochStats(float(l_len.mean()), float(l_short.mean()),
                       float(l_long.mean()),
                       float((l_len + l_short + l_long).mean()), hits / b)
    return stats, hits, (dlen, dshort, dlong)


def _hier_batch(model: HierarchicalModel, batch: np.ndarray, labels, want_grads: bool):
    """Forward (and optionally backward) for one batch under the
    length-wise loss. Returns (stats, grads or None, outputs)."""
    outputs, caches = _forward_batch(model, batch, "hier", want_grads)
    if labels is None:
        return None, None, outputs
    stats, _, (dlen, dshort, dlong) = _hier_stats_and_seeds(outputs, labels)
    if not want_grads:
        return stats, None, outputs
    grads: dict = {}
    dfeature = _head_backward(dlen, caches["length"], [model.length_conv],
                              [model.length_pool], model.length_fc, grads, "length")
    dfeature += _head_backward(dshort, caches["short"], model.short.convs,
                               model.short.pools, model.short.fc, grads, "short")
    dfeature += _head_backward(dlong, caches["long"], model.long.convs,
                               model.long.pools, model.long.fc, grads, "long")
    _trunk_backward(model, caches["trunk"], dfeature, grads)
    return stats, grads, outputs


def _flat_batch(model: HierarchicalModel, batch: np.ndarray, labels, want_grads: bool):
    """Plain 5-way cross-entropy on the flat head; same return shape."""
    outputs, caches = _forward_batch(model, batch, "flat", want_grads)
    if labels is None:
        return None, None, outputs
    b = len(labels)
    rows = np.arange(b)
    word_idx = np.array([l.value for l in labels])
    ce = -np.log(np.maximum(outputs.flat_probs[rows, word_idx], PROB_FLOOR))
    hits = int((np.argmax(outputs.flat_probs, axis=1) == word_idx).sum())
    stats = EpochStats(0.0, 0.0, 0.0, float(ce.mean()), hits / b)
    if not want_grads:
        return stats, None, outputs
    dlogits = outputs.flat_probs.copy()
    dlogits[rows, word_idx] -= 1.0
    dlogits /= b
    grads = {"flat_fc.weights": dlogits.T @ caches["flat_x2"],
             "flat_fc.bias": dlogits.sum(axis=0)}
    dx2 = dlogits @ model.flat_fc.weights
    ft, b_, fw = caches["feature_shape"]
    dfeature = dx2.reshape(b_, ft, fw).transpose(1, 0, 2)
    _trunk_backward(model, caches["trunk"], dfeature, grads)
    return stats, grads, outputs


def compute_loss(model: HierarchicalModel, window: np.ndarray, true_label: WordLabel):
    """Length-wise loss and gradients for a single window.

    Returns (LengthwiseLoss, gradients keyed by parameter name). The
    gate probability weighting the branch term is a constant in the
    backward pass; the untouched branch's gradients are exactly zero.
    """
    if not isinstance(true_label, WordLabel):
        raise ValueError(f"unknown label {true_label!r}")
    w = window if window.ndim == 2 else window[0]
    stats, grads, _ = _hier_batch(model, w[None], [true_label], want_grads=True)
    loss = LengthwiseLoss(stats.l_length, stats.l_short, stats.l_long, stats.total)
    return loss, grads


def loss_only(model: HierarchicalModel, window: np.ndarray, true_label: WordLabel,
              frozen_weight: float | None = None) -> float:
    """Forward-only loss for one window. frozen_weight, when given,
    replaces the live gate probability as the branch-loss multiplier;
    this is the finite-difference oracle for the detached weighting."""
    w = window if window.ndim == 2 else window[0]
    _, _, outputs = _hier_batch(model, w[None], None, want_grads=False)
    gate = LengthProbs(float(outputs.length_probs[0, 0]), float(outputs.length_probs[0, 1]))
    loss = lengthwise_loss_from_probs(gate, outputs.short_probs[0],
                                      outputs.long_probs[0], true_label)
    if frozen_weight is None:
        return loss.total
    group = hyper_label(true_label)
    cls = branch_class_index(true_label)
    probs = outputs.short_probs[0] if group is HyperLabel.short else outputs.long_probs[0]
    ce = float(-np.log(max(float(probs[cls]), PROB_FLOOR)))
    return loss.l_length + frozen_weight * ce


def make_optimizer(model: HierarchicalModel, config: TrainConfig) -> dict:
    """One AdamW state per parameter, keyed like the gradient dicts."""
    return {name: AdamWState.for_param(p, lr=config.lr, beta1=config.beta1,
                                       beta2=config.beta2, epsilon=config.epsilon,
                                       weight_decay=config.weight_decay)
            for name, p in model.parameters()}


def _trials_of(train_set):
    return train_set.trials if hasattr(train_set, "trials") else list(train_set)


def train_epoch(model: HierarchicalModel, train_set, config: TrainConfig,
                optimizer_states: dict, epoch_index: int = 0,
                variant: str = "hier") -> EpochStats:
    """One pass of seeded-shuffled mini-batches with an AdamW step per
    batch. Every trial feeds the branch of its TRUE length group.
    Returns crop-weighted mean loss components and training accuracy."""
    trials = _trials_of(train_set)
    if not trials:
        raise ValueError("empty training set")
    crops = []
    for trial in trials:
        width = config.crop_samples or trial.samples
        for w in crop_trial(trial, width, config.crop_stride):
            crops.append((w, trial.label))
    rng = np.random.default_rng(derive_seed(config.seed, SEED_SHUFFLE, epoch_index))
    order = rng.permutation(len(crops))
    params = model.param_dict()
    step = _hier_batch if variant == "hier" else _flat_batch
    sums = np.zeros(4)
    hits = 0
    for start in range(0, len(order), config.batch_size):
        idx = order[start:start + config.batch_size]
        batch = np.stack([crops[i][0] for i in idx])
        labels = [crops[i][1] for i in idx]
        stats, grads, _ = step(model, batch, labels, want_grads=True)
        for name, g in grads.items():
            adamw_step(params[name], g, optimizer_states[name])
        n = len(idx)
        sums += n * np.array([stats.l_length, stats.l_short, stats.l_long, stats.total])
        hits += round(stats.train_acc * n)
    total = len(crops)
    means = sums / total
    return EpochStats(means[0], means[1], means[2], means[3], hits / total)


def evaluate_trials(model: HierarchicalModel, trials, crop_samples, crop_stride,
                    batch_size: int, variant: str = "hier"):
    """Predict every trial with cropped decoding via the batched engine.

    Returns (true_label, predicted_label) pairs. Matches the per-window
    predict path: distributions averaged over windows, gate ties to short.
    """
    jobs = []
    for ti, trial in enumerate(trials):
        width = crop_samples or trial.samples
        for w in crop_trial(trial, width, crop_stride):
            jobs.append((ti, w))
    n = len(trials)
    length_sums = np.zeros((n, 2))
    short_sums = np.zeros((n, model.config.n_short))
    long_sums = np.zeros((n, model.config.n_long))
    flat_sums = np.zeros((n, len(VOCABULARY)))
    for start in range(0, len(jobs), batch_size):
        chunk = jobs[start:start + batch_size]
        batch = np.stack([w for _, w in chunk])
        rows = [ti for ti, _ in chunk]
        if variant == "hier":
            _, _, outputs = _hier_batch(model, batch, None, want_grads=False)
            np.add.at(length_sums, rows, outputs.length_probs)
            np.add.at(short_sums, rows, outputs.short_probs)
            np.add.at(long_sums, rows, outputs.long_probs)
        else:
            _, _, outputs = _flat_batch(model, batch, None, want_grads=False)
            np.add.at(flat_sums, rows, outputs.flat_probs)
    pairs = []
    for ti, trial in enumerate(trials):
        if variant == "hier":
            if length_sums[ti, 0] >= length_sums[ti, 1]:
                pred = BRANCH_WORDS[HyperLabel.short][int(np.argmax(short_sums[ti]))]
            else:
                pred = BRANCH_WORDS[HyperLabel.long][int(np.argmax(long_sums[ti]))]
        else:
            pred = VOCABULARY[int(np.argmax(flat_sums[ti]))]
        pairs.append((trial.label, pred))
    return pairs


def kfold_split(trial_set, k: int, seed: int):
    """Stratified folds: per class, seeded shuffle then round-robin deal
    into k validation buckets. Folds are disjoint and exhaustive."""
    trials = _trials_of(trial_set)
    if k < 2:
        raise ValueError("k-fold needs k >= 2; k=1 leaves no validation data")
    rng = np.random.default_rng(derive_seed(seed, SEED_SPLIT))
    buckets = [set() for _ in range(k)]
    for label in VOCABULARY:
        ids = [t.id for t in trials if t.label is label]
        if len(ids) < k:
            raise ValueError(
                f"class {label.name} has {len(ids)} trials, fewer than k={k}")
        perm = rng.permutation(len(ids))
        for pos, j in enumerate(perm):
            buckets[pos % k].add(ids[j])
    all_ids = [t.id for t in trials]
    folds = []
    for f in range(k):
        val = [i for i in all_ids if i in buckets[f]]
        train = [i for i in all_ids if i not in buckets[f]]
        folds.append(FoldSpec(f, train, val))
    return folds


def _run_fold(packed):
    trial_set, model_config, train_config, fold, variant = packed
    by_id = {t.id: t for t in _trials_of(trial_set)}
    fold_seed = derive_seed(train_config.seed, SEED_FOLD, fold.fold_index)
    model = build_model(model_config, derive_seed(fold_seed, SEED_INIT))
    states = make_optimizer(model, train_config)
    fold_config = replace(train_config, seed=fold_seed)
    train_trials = [by_id[i] for i in fold.train_ids]
    val_trials = [by_id[i] for i in fold.val_ids]
    epoch_stats = []
    for epoch in range(train_config.epochs):
        epoch_stats.append(train_epoch(model, train_trials, fold_config, states,
                                       epoch_index=epoch, variant=variant))
    pairs = evaluate_trials(model, val_trials, train_config.crop_samples,
                            train_config.crop_stride, train_config.batch_size, variant)
    confusion = ConfusionMatrix.from_pairs(pairs)
    return FoldResult(fold.fold_index, confusion.accuracy_percent(), confusion,
                      epoch_stats, model)


def run_cross_validation(trial_set, model_config: ModelConfig,
                         train_config: TrainConfig, k: int,
                         variant: str = "hier", jobs: int = 1):
    """Train and evaluate one model per fold; deterministic for a given
    seed regardless of jobs. Returns FoldResults in fold order."""
    if variant not in ("hier", "flat"):
        raise ValueError(f"unknown variant {variant!r}")
    folds = kfold_split(trial_set, k, train_config.seed)
    packed = [(trial_set, model_config, train_config, fold, variant) for fold in folds]
    if jobs <= 1:
        return [_run_fold(p) for p in packed]
    with multiprocessing.get_context("fork").Pool(min(jobs, len(folds))) as pool:
        return pool.map(_run_fold, packed)
