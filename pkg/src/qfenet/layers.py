"""Network layers operating on single samples.

Feature maps are ``(channels, height, width)`` float arrays.  Every layer has
a ``forward`` returning ``(output, cache)`` and a ``backward`` taking that
cache plus the upstream gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .circuits import AnsatzPreset, filter_circuit, weight_count
from .gradients import batch_gradients, batch_values
from .statevector import Observable

TWO_PI = 2.0 * np.pi


class ShapeError(ValueError):
    pass


class UnsupportedConfigurationError(ValueError):
    pass


class StateError(RuntimeError):
    pass


def scaled_sigmoid(p):
    """Logistic squashing onto (0, 2*pi)."""
    with np.errstate(over="ignore"):  # exp overflow -> inf -> exact 0 limit
        return TWO_PI / (1.0 + np.exp(-np.asarray(p, dtype=float)))


def scaled_sigmoid_grad(p):
    s = scaled_sigmoid(p)
    return s * (TWO_PI - s) / TWO_PI


def output_size(m, f, s=1):
    return (m - f) // s + 1


def extract_patches(x, f, s=1):
    """(c, m, m) -> (c, n, n, f*f); patch pixels flattened row-major."""
    win = sliding_window_view(x, (f, f), axis=(1, 2))[:, ::s, ::s]
    c, n1, n2 = win.shape[:3]
    return win.reshape(c, n1, n2, f * f)


@dataclass
class LayerCache:
    input_shape: tuple
    pre: np.ndarray
    d_inputs: np.ndarray | None
    d_weights: np.ndarray | None


class QfeLayer:
    """Convolution-style layer whose filters are parameterized circuits.

    Each (filter, input channel) pair owns an independent weight vector; the
    per-channel expectations are summed, the filter bias is added and the
    activation applied.  In the default mode every filter is measured with
    one observable.  With ``fanout=True`` every filter is measured with each
    of ``observables`` and each measurement becomes its own output channel.
    """

    def __init__(self, in_channels, out_filters, preset, kernel=3, stride=1,
                 observables=None, activation="sigmoid", fanout=False, input_grads=True,
                 weights=None, bias=None, name="qfe"):
        if activation not in ("sigmoid", "identity"):
            raise UnsupportedConfigurationError(f"unknown activation {activation!r}")
        self.name = name
        self.in_channels = int(in_channels)
        self.out_filters = int(out_filters)
        self.kernel = int(kernel)
        self.stride = int(stride)
        self.preset = preset if isinstance(preset, AnsatzPreset) else AnsatzPreset(*preset)
        self.activation = activation
        self.fanout = bool(fanout)
        self.input_grads = bool(input_grads)
        observables = list(observables or [Observable.z(0)])
        if not fanout and len(observables) not in (1, self.out_filters):
            raise UnsupportedConfigurationError(
                "need one observable, or one per filter, unless fanout is enabled"
            )
        if not fanout and len(observables) == 1:
            observables = observables * self.out_filters
        self.observables = observables
        self.circuit = filter_circuit(self.preset, self.n_qubits)
        self.n_weights = weight_count(self.preset, self.n_qubits)
        self.weights = (
            np.zeros((self.out_filters, self.in_channels, self.n_weights))
            if weights is None else np.array(weights, dtype=float)
        )
        self.bias = np.zeros(self.out_channels) if bias is None else np.array(bias, dtype=float)
        if self.weights.shape != (self.out_filters, self.in_channels, self.n_weights):
            raise ShapeError(f"weights shape {self.weights.shape} does not match layer")
        if self.bias.shape != (self.out_channels,):
            raise ShapeError(f"bias shape {self.bias.shape} does not match layer")

    @property
    def n_qubits(self):
        return self.kernel * self.kernel

    @property
    def obs_per_filter(self):
        return len(self.observables) if self.fanout else 1

    @property
    def out_channels(self):
        return self.out_filters * self.obs_per_filter

    def filter_observables(self, o):
        return self.observables if self.fanout else [self.observables[o]]

    def output_shape(self, input_shape):
        c, h, w = input_shape
        if c != self.in_channels:
            raise ShapeError(f"{self.name}: expected {self.in_channels} channels, got {c}")
        if h < self.kernel or w < self.kernel:
            raise ShapeError(f"{self.name}: input {h}x{w} smaller than kernel {self.kernel}")
        return (self.out_channels, output_size(h, self.kernel, self.stride),
                output_size(w, self.kernel, self.stride))

    def params(self):
        return {"theta": self.weights, "bias": self.bias}

    def sims_per_sample(self, input_shape, want_grads=True):
        """Circuit simulations one forward(+gradient) pass costs."""
        _, n1, n2 = self.output_shape(input_shape)
        per_patch = 1
        if want_grads:
            per_patch += 2 * len(self.circuit.parameterized_positions("weight"))
            if self.input_grads:
                per_patch += 2 * len(self.circuit.parameterized_positions("input"))
        return n1 * n2 * self.out_filters * self.in_channels * per_patch

    def forward(self, x, want_grads=False):
        return qfe_forward(self, x, want_grads)

    def backward(self, cache, upstream):
        dz, dtheta, dbias = qfe_backward(self, cache, upstream)
        return dz, {"theta": dtheta, "bias": dbias}


def qfe_forward(layer: QfeLayer, x, want_grads=False):
    x = np.asarray(x, dtype=float)
    if x.ndim != 3:
        raise ShapeError("QFE input must be (channels, height, width)")
    out_shape = layer.output_shape(x.shape)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{layer.name}: non-finite input")
    _, n1, n2 = out_shape
    k_obs = layer.obs_per_filter
    patches = extract_patches(x, layer.kernel, layer.stride).reshape(layer.in_channels, n1 * n2, -1)
    expect = np.zeros((layer.out_filters, k_obs, n1 * n2))
    d_in = d_w = None
    if want_grads:
        d_w = np.zeros((layer.out_filters, layer.in_channels, n1 * n2, k_obs, layer.n_weights))
        if layer.input_grads:
            d_in = np.zeros((layer.out_filters, layer.in_channels, n1 * n2, k_obs, layer.n_qubits))
    for o in range(layer.out_filters):
        obs = layer.filter_observables(o)
        for c in range(layer.in_channels):
            if want_grads:
                vals, di, dw = batch_gradients(
                    layer.circuit, patches[c], layer.weights[o, c], obs,
                    input_grads=layer.input_grads,
                )
                d_w[o, c] = dw
                if d_in is not None:
                    d_in[o, c] = di
            else:
                vals = batch_values(layer.circuit, patches[c], layer.weights[o, c], obs)
            expect[o] += vals.T
    pre = expect.reshape(layer.out_channels, n1, n2) + layer.bias[:, None, None]
    out = scaled_sigmoid(pre) if layer.activation == "sigmoid" else pre.copy()
    cache = LayerCache(x.shape, pre, d_in, d_w) if want_grads else None
    return out, cache


def qfe_backward(layer: QfeLayer, cache: LayerCache, upstream):
    """Gradients w.r.t. the layer input, weights and bias from cached shift-rule values.

    No circuit is simulated here.  Returns ``(d_input, d_theta, d_bias)``.
    """
    if layer.stride != 1:
        raise UnsupportedConfigurationError("QFE backward is only defined for stride 1")
    if cache is None or cache.d_weights is None:
        raise StateError(f"{layer.name}: forward was not run with want_grads=True")
    upstream = np.asarray(upstream, dtype=float)
    if upstream.shape != cache.pre.shape:
        raise ShapeError(f"upstream shape {upstream.shape} != output shape {cache.pre.shape}")
    if layer.activation == "sigmoid":
        g = upstream * scaled_sigmoid_grad(cache.pre)
    else:
        g = upstream
    n_out, n1, n2 = g.shape
    d_bias = np.array([g[ch].sum() for ch in range(n_out)])

    # g_f[o, k, p]: gradient at filter o, observable k, patch p
    g_f = g.reshape(layer.out_filters, layer.obs_per_filter, n1 * n2)
    d_theta = np.einsum("okp,ocpkw->ocw", g_f, cache.d_weights)

    d_input = None
    if cache.d_inputs is not None:
        f = layer.kernel
        # per-patch input gradient summed over filters and observables
        contrib = np.einsum("okp,ocpkq->cpq", g_f, cache.d_inputs)
        contrib = contrib.reshape(layer.in_channels, n1, n2, f, f)
        d_input = np.zeros(cache.input_shape)
        for di in range(f):
            for dj in range(f):
                d_input[:, di:di + n1, dj:dj + n2] += contrib[:, :, :, di, dj]
    return d_input, d_theta, d_bias


def maxpool_forward(x, window=2):
    """Non-overlapping max pooling; ties resolve to the first row-major position."""
    x = np.asarray(x, dtype=float)
    c, h, w = x.shape
    if h % window or w % window:
        raise ShapeError(f"pooling needs sides divisible by {window}, got {h}x{w}")
    blocks = x.reshape(c, h // window, window, w // window, window).transpose(0, 1, 3, 2, 4)
    flat = blocks.reshape(c, h // window, w // window, window * window)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return out, (x.shape, window, arg)


def maxpool_backward(cache, upstream):
    shape, window, arg = cache
    c, h, w = shape
    grad = np.zeros((c, h // window, w // window, window * window))
    np.put_along_axis(grad, arg[..., None], np.asarray(upstream, dtype=float)[..., None], axis=-1)
    grad = grad.reshape(c, h // window, w // window, window, window).transpose(0, 1, 3, 2, 4)
    return grad.reshape(shape)


def gap_forward(x):
    x = np.asarray(x, dtype=float)
    return x.mean(axis=(1, 2)), x.shape


def gap_backward(shape, upstream):
    c, h, w = shape
    upstream = np.asarray(upstream, dtype=float)
    return np.broadcast_to((upstream / (h * w))[:, None, None], shape).copy()


def fc_forward(x, W, B, activation="relu"):
    """``h(W @ x + B)`` with ``h`` ReLU or identity."""
    x = np.asarray(x, dtype=float).ravel()
    if W.shape != (B.shape[0], x.shape[0]):
        raise ShapeError(f"FC weight {W.shape} incompatible with input {x.shape} / bias {B.shape}")
    z = W @ x + B
    out = np.maximum(z, 0.0) if activation == "relu" else z
    return out, (x, W, z, activation)


def fc_backward(cache, upstream):
    x, W, z, activation = cache
    g = np.asarray(upstream, dtype=float)
    if activation == "relu":
        g = g * (z > 0)
    return W.T @ g, np.outer(g, x), g


def softmax_cross_entropy(logits, onehot):
    """Return ``(loss, d_loss/d_logits)`` using a stable log-sum-exp."""
    logits = np.asarray(logits, dtype=float)
    onehot = np.asarray(onehot, dtype=float)
    shifted = logits - logits.max()
    log_z = np.log(np.exp(shifted).sum())
    log_p = shifted - log_z
    loss = -float(onehot @ log_p)
    return loss, np.exp(log_p) - onehot


class MaxPool:
    def __init__(self, window=2, name="pool"):
        self.window = window
        self.name = name

    def output_shape(self, shape):
        c, h, w = shape
        if h % self.window or w % self.window:
            raise ShapeError(f"{self.name}: {h}x{w} not divisible by {self.window}")
        return (c, h // self.window, w // self.window)

    def params(self):
        return {}

    def forward(self, x, want_grads=False):
        return maxpool_forward(x, self.window)

    def backward(self, cache, upstream):
        return maxpool_backward(cache, upstream), {}


class GlobalAvgPool:
    name = "gap"

    def output_shape(self, shape):
        return (shape[0],)

    def params(self):
        return {}

    def forward(self, x, want_grads=False):
        return gap_forward(x)

    def backward(self, cache, upstream):
        return gap_backward(cache, upstream), {}


class Dense:
    def __init__(self, n_in, n_out, activation="relu", W=None, B=None, name="fc"):
        self.name = name
        self.activation = activation
        self.W = np.zeros((n_out, n_in)) if W is None else np.array(W, dtype=float)
        self.B = np.zeros(n_out) if B is None else np.array(B, dtype=float)

    def output_shape(self, shape):
        n_in = int(np.prod(shape))
        if n_in != self.W.shape[1]:
            raise ShapeError(f"{self.name}: expected {self.W.shape[1]} inputs, got {n_in}")
        return (self.W.shape[0],)

    def params(self):
        return {"W": self.W, "B": self.B}

    def forward(self, x, want_grads=False):
        x = np.asarray(x, dtype=float)
        out, cache = fc_forward(x, self.W, self.B, self.activation)
        return out, (cache, x.shape)

    def backward(self, cache, upstream):
        inner, shape = cache
        dx, dW, dB = fc_backward(inner, upstream)
        return dx.reshape(shape), {"W": dW, "B": dB}
