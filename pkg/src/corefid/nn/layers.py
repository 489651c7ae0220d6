"""Layers with explicit forward/backward passes over batched float64 arrays.

Every layer reads its weights from a ModelParams by name and accumulates
gradients into a plain dict keyed the same way, so a layer applied twice
(shared weights) simply sums its contributions.
"""

from __future__ import annotations

import numpy as np

from .params import ParamSpec

EPS = 1e-7
ACTIVATIONS = ("relu", "sigmoid", "identity")


def sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def relu(z):
    return np.maximum(z, 0.0)


def bce_loss(p, y) -> float:
    """Binary cross-entropy with the prediction clamped to [EPS, 1 - EPS]; averaged over a batch."""
    p = np.clip(np.asarray(p, dtype=np.float64), EPS, 1.0 - EPS)
    y = np.asarray(y, dtype=np.float64)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def _activate(pre, activation):
    if activation == "relu":
        return relu(pre)
    if activation == "sigmoid":
        return sigmoid(pre)
    if activation == "identity":
        return pre
    raise ValueError(f"unknown activation {activation!r}")


class Dense:
    def __init__(self, name: str, in_dim: int, out_dim: int, activation: str = "relu"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.name, self.in_dim, self.out_dim, self.activation = name, in_dim, out_dim, activation
        self.w, self.b = f"{name}.W", f"{name}.b"

    def param_specs(self):
        return [ParamSpec(self.w, (self.out_dim, self.in_dim), self.in_dim, self.out_dim),
                ParamSpec(self.b, (self.out_dim,))]

    def forward(self, params, x):
        if x.shape[-1] != self.in_dim:
            raise ValueError(f"{self.name}: expected input width {self.in_dim}, got {x.shape[-1]}")
        pre = x @ params[self.w].T + params[self.b]
        out = _activate(pre, self.activation)
        return out, (x, pre, out)

    def backward(self, params, cache, dout, grads):
        x, pre, out = cache
        if self.activation == "relu":
            dpre = dout * (pre > 0)
        elif self.activation == "sigmoid":
            dpre = dout * out * (1.0 - out)
        else:
            dpre = dout
        grads[self.w] += dpre.T @ x
        grads[self.b] += dpre.sum(axis=0)
        return dpre @ params[self.w]


class FCN:
    """A stack of ReLU dense layers; an empty `dims` is the identity."""

    def __init__(self, name: str, in_dim: int, dims):
        self.layers = []
        d = in_dim
        for k, out in enumerate(dims):
            self.layers.append(Dense(f"{name}.{k}", d, out, "relu"))
            d = out
        self.in_dim, self.out_dim = in_dim, d

    def param_specs(self):
        return [s for layer in self.layers for s in layer.param_specs()]

    def forward(self, params, x):
        caches = []
        for layer in self.layers:
            x, c = layer.forward(params, x)
            caches.append(c)
        return x, caches

    def backward(self, params, caches, dout, grads):
        for layer, c in zip(reversed(self.layers), reversed(caches)):
            dout = layer.backward(params, c, dout, grads)
        return dout


class Conv1D:
    """Valid 1-D convolution over (batch, length, dim) followed by ReLU.

    Filter f sees the window x[t:t+width] flattened row-major, so weights have
    shape (num_filters, width * in_dim).
    """

    def __init__(self, name: str, width: int, in_dim: int, num_filters: int):
        if width < 1:
            raise ValueError("filter width must be >= 1")
        self.name, self.width, self.in_dim, self.num_filters = name, width, in_dim, num_filters
        self.w, self.b = f"{name}.W", f"{name}.b"

    def param_specs(self):
        fan_in = self.width * self.in_dim
        return [ParamSpec(self.w, (self.num_filters, fan_in), fan_in, self.num_filters),
                ParamSpec(self.b, (self.num_filters,))]

    def forward(self, params, x):
        B, L, D = x.shape
        if D != self.in_dim:
            raise ValueError(f"{self.name}: expected embedding dim {self.in_dim}, got {D}")
        T = L - self.width + 1
        if T < 1:
            raise ValueError(f"{self.name}: sequence length {L} shorter than filter width {self.width}")
        win = np.concatenate([x[:, k:k + T, :] for k in range(self.width)], axis=2)
        pre = win @ params[self.w].T + params[self.b]
        return relu(pre), (win, pre, L)

    def backward(self, params, cache, dout, grads):
        win, pre, L = cache
        B, T, _ = pre.shape
        D = self.in_dim
        dpre = dout * (pre > 0)
        grads[self.w] += np.tensordot(dpre, win, axes=([0, 1], [0, 1]))
        grads[self.b] += dpre.sum(axis=(0, 1))
        dwin = dpre @ params[self.w]
        dx = np.zeros((B, L, D))
        for k in range(self.width):
            dx[:, k:k + T, :] += dwin[:, :, k * D:(k + 1) * D]
        return dx


class MaxPool:
    """Max over time, restricted per example to the first `valid[b]` positions.

    Gradient goes to the first maximal position.
    """

    @staticmethod
    def forward(x, valid=None):
        B, T, F = x.shape
        if T == 0:
            raise ValueError("max pool over an empty sequence")
        masked = x
        if valid is not None:
            valid = np.asarray(valid)
            if np.any(valid < 1):
                raise ValueError("max pool needs at least one valid position per example")
            pad = np.arange(T)[None, :] >= valid[:, None]
            if pad.any():
                masked = np.where(pad[:, :, None], -np.inf, x)
        idx = masked.argmax(axis=1)
        out = np.take_along_axis(x, idx[:, None, :], axis=1)[:, 0, :]
        return out, (idx, x.shape)

    @staticmethod
    def backward(cache, dout):
        idx, shape = cache
        dx = np.zeros(shape)
        np.put_along_axis(dx, idx[:, None, :], dout[:, None, :], axis=1)
        return dx


class CNNBlock:
    """Per filter width: `depth` stacked Conv1D layers, then max-over-time; outputs concatenated by width."""

    def __init__(self, name: str, in_dim: int, widths, num_filters: int, depth: int = 1):
        if depth < 1:
            raise ValueError("depth must be >= 1")
        self.widths = tuple(widths)
        self.stacks = []
        for w in self.widths:
            stack = [Conv1D(f"{name}.w{w}.{k}", w, in_dim if k == 0 else num_filters, num_filters)
                     for k in range(depth)]
            self.stacks.append(stack)
        self.in_dim = in_dim
        self.out_dim = num_filters * len(self.widths)
        self.min_len = max(depth * (w - 1) + 1 for w in self.widths)

    def param_specs(self):
        return [s for stack in self.stacks for conv in stack for s in conv.param_specs()]

    def forward(self, params, x, lengths=None):
        """x: (B, L, D); lengths: true sequence length per example (None = all L)."""
        B, L, _ = x.shape
        lengths = np.full(B, L) if lengths is None else np.asarray(lengths)
        if np.any(lengths < self.min_len):
            raise ValueError(f"sequence length below the block minimum {self.min_len}")
        pooled, caches = [], []
        for stack in self.stacks:
            h, valid, conv_caches = x, lengths, []
            for conv in stack:
                h, c = conv.forward(params, h)
                conv_caches.append(c)
                valid = valid - (conv.width - 1)
            out, pc = MaxPool.forward(h, valid)
            pooled.append(out)
            caches.append((conv_caches, pc))
        return np.concatenate(pooled, axis=1), caches

    def backward(self, params, caches, dout, grads):
        dx = None
        F = dout.shape[1] // len(self.stacks)
        for s, (stack, (conv_caches, pc)) in enumerate(zip(self.stacks, caches)):
            dh = MaxPool.backward(pc, dout[:, s * F:(s + 1) * F])
            for conv, c in zip(reversed(stack), reversed(conv_caches)):
                dh = conv.backward(params, c, dh, grads)
            dx = dh if dx is None else dx + dh
        return dx


# -- single-example functional forms ---------------------------------------

def conv_forward(weights, biases, x):
    """(L, D) input -> (L - w + 1, F) ReLU feature map; w inferred from weights."""
    x = np.asarray(x, dtype=np.float64)
    F, wD = weights.shape
    D = x.shape[1]
    if wD % D:
        raise ValueError("weight width is not a multiple of the input dimension")
    layer = Conv1D("conv", wD // D, D, F)
    out, _ = layer.forward({layer.w: weights, layer.b: biases}, x[None])
    return out[0]


def max_pool(h):
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] == 0:
        raise ValueError("max_pool needs a non-empty (T, F) input")
    return MaxPool.forward(h[None])[0][0]


def dense_forward(weights, biases, x, activation="identity"):
    x = np.asarray(x, dtype=np.float64)
    layer = Dense("dense", weights.shape[1], weights.shape[0], activation)
    out, _ = layer.forward({layer.w: weights, layer.b: biases}, x[None])
    return out[0]
