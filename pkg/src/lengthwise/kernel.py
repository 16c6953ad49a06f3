"""Numerical layer library: forward and backward passes for valid 2-D
convolution, floor-mode average pooling, fully-connected layers, ELU,
softmax, cross-entropy, and the AdamW optimizer step.

All arithmetic is 64-bit. Tensors are numpy arrays; activations use the
[batch, channels, height, width] layout. Every operation is a pure
function of its arguments except adamw_step, which updates the
parameter and its optimizer state in place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

# clamp applied to probabilities before log, keeps early-training losses finite
PROB_FLOOR = 1e-12


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    """Uniform init on [-b, b] with b = sqrt(6 / (fan_in + fan_out))."""
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class ConvLayer:
    """Valid cross-correlation, stride 1, no padding.

    weights [out_filters, in_channels, kernel_h, kernel_w], bias [out_filters].
    """

    kernel_h: int
    kernel_w: int
    in_channels: int
    out_filters: int
    weights: np.ndarray
    bias: np.ndarray

    @classmethod
    def seeded(cls, rng: np.random.Generator, kernel_h: int, kernel_w: int,
               in_channels: int, out_filters: int) -> "ConvLayer":
        fan_in = in_channels * kernel_h * kernel_w
        fan_out = out_filters * kernel_h * kernel_w
        w = glorot_uniform(rng, (out_filters, in_channels, kernel_h, kernel_w), fan_in, fan_out)
        return cls(kernel_h, kernel_w, in_channels, out_filters, w, np.zeros(out_filters))


@dataclass
class AvgPoolLayer:
    """Floor-mode average pooling; trailing positions not covered by a
    full window are dropped."""

    pool_h: int
    pool_w: int
    stride_h: int
    stride_w: int


@dataclass
class FCLayer:
    """Affine map y = x @ weights.T + bias; weights [out_features, in_features]."""

    in_features: int
    out_features: int
    weights: np.ndarray
    bias: np.ndarray

    @classmethod
    def seeded(cls, rng: np.random.Generator, in_features: int, out_features: int) -> "FCLayer":
        w = glorot_uniform(rng, (out_features, in_features), in_features, out_features)
        return cls(in_features, out_features, w, np.zeros(out_features))


@dataclass
class AdamWState:
    """Per-parameter AdamW state with decoupled weight decay."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.01

    @classmethod
    def for_param(cls, param: np.ndarray, **hyper) -> "AdamWState":
        return cls(np.zeros_like(param), np.zeros_like(param), **hyper)


def _im2col(x: np.ndarray, kh: int, kw: int):
    """Unfold x [B,C,H,W] into cols [C*kh*kw, B*Ho*Wo] plus output extents."""
    b, c, h, w = x.shape
    ho, wo = h - kh + 1, w - kw + 1
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    # [B,C,Ho,Wo,kh,kw] -> [C,kh,kw,B,Ho,Wo]; copy once so the GEMM sees contiguous data
    cols = np.ascontiguousarray(win.transpose(1, 4, 5, 0, 2, 3))
    return cols.reshape(c * kh * kw, b * ho * wo), ho, wo


def conv2d_forward(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Valid convolution of x [B,C,H,W] -> [B,F,H-kh+1,W-kw+1]."""
    b, c, h, w = x.shape
    if c != layer.in_channels:
        raise DimensionError(
            f"conv2d: channel axis is {c}, layer expects {layer.in_channels}")
    if h < layer.kernel_h:
        raise DimensionError(
            f"conv2d: height axis is {h}, kernel needs at least {layer.kernel_h}")
    if w < layer.kernel_w:
        raise DimensionError(
            f"conv2d: width axis is {w}, kernel needs at least {layer.kernel_w}")
    cols, ho, wo = _im2col(x, layer.kernel_h, layer.kernel_w)
    wflat = layer.weights.reshape(layer.out_filters, -1)
    out = wflat @ cols + layer.bias[:, None]
    return np.ascontiguousarray(out.reshape(layer.out_filters, b, ho, wo).transpose(1, 0, 2, 3))


def conv2d_backward(x: np.ndarray, layer: ConvLayer, grad_out: np.ndarray):
    """Gradients of conv2d_forward: (grad_input, grad_weights, grad_bias)."""
    b, c, h, w = x.shape
    kh, kw = layer.kernel_h, layer.kernel_w
    ho, wo = h - kh + 1, w - kw + 1
    if grad_out.shape != (b, layer.out_filters, ho, wo):
        raise DimensionError(
            f"conv2d backward: grad shape {grad_out.shape} does not match "
            f"output shape {(b, layer.out_filters, ho, wo)}")
    cols, _, _ = _im2col(x, kh, kw)
    gflat = np.ascontiguousarray(grad_out.transpose(1, 0, 2, 3)).reshape(layer.out_filters, -1)
    grad_w = (gflat @ cols.T).reshape(layer.weights.shape)
    grad_b = gflat.sum(axis=1)
    dcols = (layer.weights.reshape(layer.out_filters, -1).T @ gflat)
    dcols = dcols.reshape(c, kh, kw, b, ho, wo)
    grad_x = np.zeros_like(x)
    # fold the unrolled gradient back: each kernel offset is one strided add
    for i in range(kh):
        for j in range(kw):
            grad_x[:, :, i:i + ho, j:j + wo] += dcols[:, i, j].transpose(1, 0, 2, 3)
    return grad_x, grad_w, grad_b


def avgpool_forward(x: np.ndarray, layer: AvgPoolLayer) -> np.ndarray:
    """Average pooling of x [B,C,H,W]; output extent = floor((in-pool)/stride)+1."""
    _, _, h, w = x.shape
    if h < layer.pool_h:
        raise DimensionError(
            f"avgpool: height axis is {h}, pool window needs at least {layer.pool_h}")
    if w < layer.pool_w:
        raise DimensionError(
            f"avgpool: width axis is {w}, pool window needs at least {layer.pool_w}")
    win = np.lib.stride_tricks.sliding_window_view(x, (layer.pool_h, layer.pool_w), axis=(2, 3))
    return win[:, :, ::layer.stride_h, ::layer.stride_w].mean(axis=(4, 5))


def avgpool_backward(input_shape, layer: AvgPoolLayer, grad_out: np.ndarray) -> np.ndarray:
    """Scatter grad/window_size back over every covering window."""
    b, c, h, w = input_shape
    ho = (h - layer.pool_h) // layer.stride_h + 1
    wo = (w - layer.pool_w) // layer.stride_w + 1
    if grad_out.shape != (b, c, ho, wo):
        raise DimensionError(
            f"avgpool backward: grad shape {grad_out.shape} does not match "
            f"output shape {(b, c, ho, wo)}")
    g = grad_out / (layer.pool_h * layer.pool_w)
    grad_x = np.zeros(input_shape)
    for i in range(layer.pool_h):
        for j in range(layer.pool_w):
            grad_x[:, :,
                   i:i + layer.stride_h * (ho - 1) + 1:layer.stride_h,
                   j:j + layer.stride_w * (wo - 1) + 1:layer.stride_w] += g
    return grad_x


def fc_forward(x: np.ndarray, layer: FCLayer) -> np.ndarray:
    """Affine map of x [B,n] -> [B,m]."""
    if x.ndim != 2 or x.shape[1] != layer.in_features:
        raise DimensionError(
            f"fc: input shape {x.shape}, layer expects [B, {layer.in_features}]")
    return x @ layer.weights.T + layer.bias


def fc_backward(x: np.ndarray, layer: FCLayer, grad_out: np.ndarray):
    """Gradients of fc_forward: (grad_input, grad_weights, grad_bias)."""
    if grad_out.shape != (x.shape[0], layer.out_features):
        raise DimensionError(
            f"fc backward: grad shape {grad_out.shape} does not match "
            f"output shape {(x.shape[0], layer.out_features)}")
    grad_x = grad_out @ layer.weights
    grad_w = grad_out.T @ x
    grad_b = grad_out.sum(axis=0)
    return grad_x, grad_w, grad_b


def elu(x: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    """Elementwise x if x > 0 else alpha*(e^x - 1)."""
    # expm1 is evaluated on min(x, 0) so large positives never overflow it
    return np.where(x > 0, x, alpha * np.expm1(np.minimum(x, 0.0)))


def elu_backward(x: np.ndarray, grad_out: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    """Gradient of elu: derivative 1 for x > 0, alpha*e^x otherwise."""
    return grad_out * np.where(x > 0, 1.0, alpha * np.exp(np.minimum(x, 0.0)))


def softmax(logits: np.ndarray) -> np.ndarray:
    """Rowwise softmax along the last axis, stabilized by max subtraction."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, true_class: int) -> float:
    """-log(probs[true_class]) with the probability clamped at 1e-12."""
    k = probs.shape[-1]
    if not 0 <= true_class < k:
        raise IndexError(f"cross_entropy: class {true_class} outside [0, {k})")
    return float(-np.log(max(float(probs[true_class]), PROB_FLOOR)))


def softmax_cross_entropy_grad(probs: np.ndarray, true_class: int) -> np.ndarray:
    """Gradient of cross_entropy(softmax(logits), true_class) w.r.t. logits."""
    grad = probs.copy()
    grad[true_class] -= 1.0
    return grad


def adamw_step(param: np.ndarray, grad: np.ndarray, state: AdamWState) -> None:
    """One AdamW update in place: bias-corrected adaptive step plus
    decoupled decay, both taken from the pre-step parameter value."""
    if param.shape != grad.shape or param.shape != state.first_moment.shape:
        raise DimensionError(
            f"adamw: param {param.shape}, grad {grad.shape}, "
            f"moments {state.first_moment.shape} must all match")
    state.step_count += 1
    t = state.step_count
    m, v = state.first_moment, state.second_moment
    m *= state.beta1
    m += (1.0 - state.beta1) * grad
    v *= state.beta2
    v += (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    param -= state.lr * (m_hat / (np.sqrt(v_hat) + state.epsilon)
                         + state.weight_decay * param)
