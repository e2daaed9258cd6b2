"""Network layers with explicit forward and backward passes.

Each layer owns its parameters and gradient buffers and caches whatever the
backward pass needs.  Convolution is implemented as grouped im2col + batched
matmul; the channel shuffle is a pure channel permutation; the group
recombination layer applies one 1x1 transform per channel group, rectifies
each branch, and sums the branches.

A layer is single-writer: forward/backward/update on one instance must not
run concurrently.  Distinct models are fully independent.
"""

from __future__ import annotations

import numpy as np

from .tensor import Rng, Tensor


def _uniform_fan_in(shape, fan_in: int, rng: Rng) -> Tensor:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, shape)


class Layer:
    """Base layer: parameter-free, shape-preserving by default."""

    kind = "base"

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.grads: dict[str, Tensor] = {}

    def forward(self, x: Tensor, train: bool = False) -> Tensor:
        raise NotImplementedError

    def backward(self, grad_out: Tensor) -> Tensor:
        raise NotImplementedError

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        return in_shape

    def mac_cost(self, in_shape: tuple[int, ...]) -> int:
        """Multiply-accumulates for one image of ``in_shape`` (no batch dim)."""
        return 0

    def _require_cache(self, cache, name: str):
        if cache is None:
            raise RuntimeError(f"{self.kind}: backward called before forward ({name})")

    def __repr__(self):
        return f"{type(self).__name__}()"


def conv_out_hw(h: int, w: int, kh: int, kw: int, stride: int, pad: int) -> tuple[int, int]:
    return (h + 2 * pad - kh) // stride + 1, (w + 2 * pad - kw) // stride + 1


class Conv2d(Layer):
    """Grouped 2-D convolution over NCHW tensors.

    ``groups == 1`` is a standard convolution, ``groups == in_channels`` a
    depthwise one, and a 1x1 kernel a pointwise channel mixer.  Weight shape
    is ``[out_channels, in_channels // groups, kh, kw]``.
    """

    kind = "conv"

    def __init__(self, in_channels, out_channels, kernel_size, stride=1, pad=0,
                 groups=1, bias=True, rng: Rng | None = None):
        super().__init__()
        if in_channels % groups or out_channels % groups:
            raise ValueError(
                f"conv channels must divide groups: in={in_channels}, "
                f"out={out_channels}, groups={groups}"
            )
        if stride < 1:
            raise ValueError(f"conv stride must be >= 1, got {stride}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kh = self.kw = int(kernel_size)
        self.stride = stride
        self.pad = pad
        self.groups = groups
        rng = rng or Rng(0, "init")
        fan_in = (in_channels // groups) * self.kh * self.kw
        self.params["weight"] = _uniform_fan_in(
            (out_channels, in_channels // groups, self.kh, self.kw), fan_in, rng)
        if bias:
            self.params["bias"] = np.zeros(out_channels)
        self._cache = None

    def out_shape(self, in_shape):
        c, h, w = in_shape
        ho, wo = conv_out_hw(h, w, self.kh, self.kw, self.stride, self.pad)
        return (self.out_channels, ho, wo)

    def mac_cost(self, in_shape):
        _, ho, wo = self.out_shape(in_shape)
        return (self.out_channels * (self.in_channels // self.groups)
                * self.kh * self.kw * ho * wo)

    @property
    def _is_depthwise(self) -> bool:
        return self.groups == self.in_channels == self.out_channels

    @property
    def _is_pointwise(self) -> bool:
        return self.kh == 1 and self.stride == 1 and self.pad == 0

    def forward(self, x, train=False):
        n, c, h, w = x.shape
        if c != self.in_channels:
            raise ValueError(f"conv expects {self.in_channels} channels, got {c}")
        if h + 2 * self.pad < self.kh or w + 2 * self.pad < self.kw:
            raise ValueError(
                f"kernel {self.kh}x{self.kw} larger than padded input "
                f"{h + 2 * self.pad}x{w + 2 * self.pad}"
            )
        ho, wo = conv_out_hw(h, w, self.kh, self.kw, self.stride, self.pad)
        if self.pad:
            xp = np.pad(x, ((0, 0), (0, 0), (self.pad, self.pad), (self.pad, self.pad)))
        else:
            xp = x
        if self._is_depthwise:
            out = self._forward_depthwise(xp, ho, wo)
        elif self._is_pointwise:
            out = self._forward_pointwise(x)
        else:
            out = self._forward_im2col(xp, n, ho, wo)
        if "bias" in self.params:
            out += self.params["bias"][None, :, None, None]
        return out

    def backward(self, grad_out, need_input_grad=True):
        self._require_cache(self._cache, "conv")
        if "bias" in self.params:
            self.grads["bias"] = grad_out.sum(axis=(0, 2, 3))
        mode = self._cache[0]
        if mode == "dw":
            return self._backward_depthwise(grad_out, need_input_grad)
        if mode == "pw":
            return self._backward_pointwise(grad_out)
        return self._backward_im2col(grad_out, need_input_grad)

    # -- depthwise: per-channel correlation over a strided window view

    def _forward_depthwise(self, xp, ho, wo):
        s = self.stride
        win = np.lib.stride_tricks.sliding_window_view(
            xp, (self.kh, self.kw), axis=(2, 3))[:, :, ::s, ::s]
        out = np.einsum("nchwij,cij->nchw", win, self.params["weight"][:, 0])
        self._cache = ("dw", xp, win, ho, wo)
        return out

    def _backward_depthwise(self, grad_out, need_input_grad=True):
        _, xp, win, ho, wo = self._cache
        s, p = self.stride, self.pad
        gw = np.einsum("nchw,nchwij->cij", grad_out, win)
        self.grads["weight"] = gw[:, None]
        if not need_input_grad:
            return None
        weight = self.params["weight"]
        dxp = np.zeros_like(xp)
        for i in range(self.kh):
            for j in range(self.kw):
                dxp[:, :, i:i + s * ho:s, j:j + s * wo:s] += \
                    weight[None, :, 0, i, j, None, None] * grad_out
        if p:
            hp, wp = xp.shape[2:]
            return dxp[:, :, p:hp - p, p:wp - p]
        return dxp

    # -- pointwise: grouped channel mixing as batched matmul on views

    def _forward_pointwise(self, x):
        n, c, h, w = x.shape
        g = self.groups
        xg = x.reshape(n, g, c // g, h * w)
        wmat = self.params["weight"].reshape(g, self.out_channels // g, c // g)
        out = np.matmul(wmat[None], xg)
        self._cache = ("pw", xg, (n, c, h, w))
        return out.reshape(n, self.out_channels, h, w)

    def _backward_pointwise(self, grad_out):
        _, xg, (n, c, h, w) = self._cache
        g = self.groups
        cog = self.out_channels // g
        go = grad_out.reshape(n, g, cog, h * w)
        wmat = self.params["weight"].reshape(g, cog, c // g)
        gw = np.matmul(go, xg.transpose(0, 1, 3, 2)).sum(axis=0)
        self.grads["weight"] = gw.reshape(self.out_channels, c // g, 1, 1)
        dx = np.matmul(wmat.transpose(0, 2, 1)[None], go)
        return dx.reshape(n, c, h, w)

    # -- generic grouped path: im2col + batched matmul

    def _forward_im2col(self, xp, n, ho, wo):
        g = self.groups
        cg = self.in_channels // g
        cog = self.out_channels // g
        k = cg * self.kh * self.kw
        s = self.stride

        cols = np.empty((n, self.in_channels, self.kh, self.kw, ho, wo))
        for i in range(self.kh):
            for j in range(self.kw):
                cols[:, :, i, j] = xp[:, :, i:i + s * ho:s, j:j + s * wo:s]
        # (N, G, cg, kh, kw, ho, wo) -> (G, N*ho*wo, cg*kh*kw)
        cols = cols.reshape(n, g, cg, self.kh, self.kw, ho, wo)
        cols = np.ascontiguousarray(cols.transpose(1, 0, 5, 6, 2, 3, 4))
        cols = cols.reshape(g, n * ho * wo, k)
        wmat = self.params["weight"].reshape(g, cog, k)

        out = np.matmul(cols, wmat.transpose(0, 2, 1))       # (G, N*ho*wo, cog)
        out = out.reshape(g, n, ho, wo, cog).transpose(1, 0, 4, 2, 3)
        self._cache = ("gen", (n,) + xp.shape[1:], cols, ho, wo)
        return np.ascontiguousarray(out.reshape(n, self.out_channels, ho, wo))

    def _backward_im2col(self, grad_out, need_input_grad=True):
        _, (n, _, hp, wp), cols, ho, wo = self._cache
        g = self.groups
        cg = self.in_channels // g
        cog = self.out_channels // g
        k = cg * self.kh * self.kw
        s, p = self.stride, self.pad

        # (N, C_out, ho, wo) -> (G, N*ho*wo, cog)
        go = grad_out.reshape(n, g, cog, ho, wo).transpose(1, 0, 3, 4, 2)
        go = np.ascontiguousarray(go).reshape(g, n * ho * wo, cog)

        gw = np.matmul(go.transpose(0, 2, 1), cols)          # (G, cog, k)
        self.grads["weight"] = gw.reshape(self.out_channels, cg, self.kh, self.kw)
        if not need_input_grad:
            return None

        dcols = np.matmul(go, self.params["weight"].reshape(g, cog, k))
        dcols = dcols.reshape(g, n, ho, wo, cg, self.kh, self.kw)
        dcols = dcols.transpose(1, 0, 4, 5, 6, 2, 3).reshape(
            n, self.in_channels, self.kh, self.kw, ho, wo)

        dxp = np.zeros((n, self.in_channels, hp, wp))
        for i in range(self.kh):
            for j in range(self.kw):
                dxp[:, :, i:i + s * ho:s, j:j + s * wo:s] += dcols[:, :, i, j]
        if p:
            return dxp[:, :, p:hp - p, p:wp - p]
        return dxp

    def __repr__(self):
        bias = "bias" in self.params
        return (f"Conv2d({self.in_channels}, {self.out_channels}, k={self.kh}, "
                f"stride={self.stride}, pad={self.pad}, groups={self.groups}, bias={bias})")


def shuffle_permutation(channels: int, groups: int) -> np.ndarray:
    """Destination order of the group-interleaving channel permutation.

    Input channel ``c`` moves to position ``(c % (C/g)) * g + c // (C/g)``;
    the returned index array ``perm`` satisfies ``out = x[:, perm]``.
    """
    if channels % groups:
        raise ValueError(f"channels {channels} not divisible by groups {groups}")
    per = channels // groups
    dest = np.empty(channels, dtype=np.intp)
    for c in range(channels):
        dest[(c % per) * groups + c // per] = c
    return dest


def channel_shuffle(x: Tensor, groups: int) -> Tensor:
    """Interleave channel planes across ``groups``; pixel data untouched."""
    return x[:, shuffle_permutation(x.shape[1], groups)]


class ChannelShuffle(Layer):
    kind = "shuffle"

    def __init__(self, groups: int):
        super().__init__()
        self.groups = groups
        self._channels = None

    def forward(self, x, train=False):
        self._channels = x.shape[1]
        return channel_shuffle(x, self.groups)

    def backward(self, grad_out):
        self._require_cache(self._channels, "shuffle")
        perm = shuffle_permutation(self._channels, self.groups)
        inverse = np.argsort(perm)
        return grad_out[:, inverse]

    def __repr__(self):
        return f"ChannelShuffle(groups={self.groups})"


class GroupRecombine(Layer):
    """Per-group 1x1 transform, rectified per branch, summed across branches.

    With input channels split into ``groups`` slices, each slice is mapped by
    its own ``[out_channels, C/groups]`` matrix to the common output width;
    the rectifier is applied to every branch and the branches are added.
    """

    kind = "recombine"

    def __init__(self, in_channels, out_channels, groups, rng: Rng | None = None):
        super().__init__()
        if in_channels % groups:
            raise ValueError(
                f"recombine channels {in_channels} not divisible by groups {groups}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.groups = groups
        cg = in_channels // groups
        rng = rng or Rng(0, "init")
        self.params["weight"] = _uniform_fan_in((groups, out_channels, cg), cg, rng)
        self._cache = None

    def out_shape(self, in_shape):
        _, h, w = in_shape
        return (self.out_channels, h, w)

    def mac_cost(self, in_shape):
        _, h, w = in_shape
        cg = self.in_channels // self.groups
        return self.groups * self.out_channels * cg * h * w

    def forward(self, x, train=False):
        n, c, h, w = x.shape
        if c != self.in_channels:
            raise ValueError(f"recombine expects {self.in_channels} channels, got {c}")
        cg = c // self.groups
        xg = x.reshape(n, self.groups, cg, h * w)
        # (1, G, C_r, cg) @ (N, G, cg, P) -> (N, G, C_r, P)
        pre = np.matmul(self.params["weight"][None], xg)
        out = np.maximum(pre, 0.0).sum(axis=1).reshape(n, self.out_channels, h, w)
        self._cache = (xg, pre, (n, c, h, w))
        return out

    def backward(self, grad_out):
        self._require_cache(self._cache, "recombine")
        xg, pre, (n, c, h, w) = self._cache
        go = grad_out.reshape(n, 1, self.out_channels, h * w)
        dpre = go * (pre > 0.0)
        gw = np.matmul(dpre, xg.transpose(0, 1, 3, 2)).sum(axis=0)
        self.grads["weight"] = gw
        dxg = np.matmul(self.params["weight"].transpose(0, 2, 1)[None], dpre)
        return dxg.reshape(n, c, h, w)

    def __repr__(self):
        return (f"GroupRecombine({self.in_channels}, {self.out_channels}, "
                f"groups={self.groups})")


class BatchNorm(Layer):
    """Per-channel batch normalization with running statistics.

    Train mode normalizes with the batch mean/variance over (N, H, W) and
    folds them into the running stats; eval mode is a pure function of the
    input and the stored stats.
    """

    kind = "batchnorm"

    def __init__(self, channels, momentum=0.1, eps=1e-5):
        super().__init__()
        if not 0 < momentum <= 1:
            raise ValueError(f"momentum must be in (0, 1], got {momentum}")
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.params["gamma"] = np.ones(channels)
        self.params["beta"] = np.zeros(channels)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self._cache = None

    def mac_cost(self, in_shape):
        c, h, w = in_shape
        return 2 * c * h * w

    def forward(self, x, train=False):
        if x.shape[1] != self.channels:
            raise ValueError(f"batchnorm expects {self.channels} channels, got {x.shape[1]}")
        m = x.shape[0] * x.shape[2] * x.shape[3]
        if train:
            mean = np.einsum("nchw->c", x) / m
            sq = np.einsum("nchw,nchw->c", x, x) / m
            var = np.maximum(sq - mean * mean, 0.0)
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * var
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = x - mean[None, :, None, None]
        xhat *= inv_std[None, :, None, None]
        self._cache = (xhat, inv_std, train, m)
        out = xhat * self.params["gamma"][None, :, None, None]
        out += self.params["beta"][None, :, None, None]
        return out

    def backward(self, grad_out):
        self._require_cache(self._cache, "batchnorm")
        xhat, inv_std, train, m = self._cache
        self.grads["gamma"] = np.einsum("nchw,nchw->c", grad_out, xhat)
        self.grads["beta"] = np.einsum("nchw->c", grad_out)
        gamma = self.params["gamma"][None, :, None, None]
        if not train:
            return grad_out * gamma * inv_std[None, :, None, None]
        # batch statistics enter the forward, so their gradients feed back
        dxhat = grad_out * gamma
        dx = dxhat
        dx -= (np.einsum("nchw->c", dxhat) / m)[None, :, None, None]
        dx -= xhat * ((self.grads["gamma"] * self.params["gamma"] / m)[None, :, None, None])
        dx *= inv_std[None, :, None, None]
        return dx

    def __repr__(self):
        return f"BatchNorm({self.channels}, momentum={self.momentum}, eps={self.eps})"


class Relu(Layer):
    kind = "relu"

    def __init__(self):
        super().__init__()
        self._mask = None

    def forward(self, x, train=False):
        self._mask = x > 0.0
        return np.maximum(x, 0.0)

    def backward(self, grad_out):
        self._require_cache(self._mask, "relu")
        return grad_out * self._mask


class Relu6(Layer):
    """Rectifier clamped at 6, the usual companion of mobile conv blocks."""

    kind = "relu6"

    def __init__(self):
        super().__init__()
        self._mask = None

    def forward(self, x, train=False):
        self._mask = (x > 0.0) & (x < 6.0)
        return np.clip(x, 0.0, 6.0)

    def backward(self, grad_out):
        self._require_cache(self._mask, "relu6")
        return grad_out * self._mask


def activation_forward(x: Tensor, kind: str) -> Tensor:
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "relu6":
        return np.clip(x, 0.0, 6.0)
    raise ValueError(f"unknown activation kind {kind!r}")


class MaxPool2x2(Layer):
    """2x2/stride-2 max pooling; ties break to the first row-major entry."""

    kind = "maxpool"

    def __init__(self):
        super().__init__()
        self._cache = None

    def out_shape(self, in_shape):
        c, h, w = in_shape
        if h % 2 or w % 2:
            raise ValueError(f"maxpool needs even extents, got {h}x{w}")
        return (c, h // 2, w // 2)

    def forward(self, x, train=False):
        n, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ValueError(f"maxpool needs even extents, got {h}x{w}")
        ho, wo = h // 2, w // 2
        windows = x.reshape(n, c, ho, 2, wo, 2).transpose(0, 1, 2, 4, 3, 5)
        windows = windows.reshape(n, c, ho, wo, 4)
        argmax = windows.argmax(axis=-1)          # first occurrence on ties
        out = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
        self._cache = (argmax, (n, c, h, w))
        return out

    def backward(self, grad_out):
        self._require_cache(self._cache, "maxpool")
        argmax, (n, c, h, w) = self._cache
        ho, wo = h // 2, w // 2
        dwin = np.zeros((n, c, ho, wo, 4))
        np.put_along_axis(dwin, argmax[..., None], grad_out[..., None], axis=-1)
        dwin = dwin.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return np.ascontiguousarray(dwin.reshape(n, c, h, w))


class GlobalAvgPool(Layer):
    """Spatial mean per channel; collapses NCHW to NC."""

    kind = "gap"

    def __init__(self):
        super().__init__()
        self._shape = None

    def out_shape(self, in_shape):
        return (in_shape[0],)

    def forward(self, x, train=False):
        self._shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, grad_out):
        self._require_cache(self._shape, "gap")
        n, c, h, w = self._shape
        return np.broadcast_to(grad_out[:, :, None, None] / (h * w), self._shape).copy()


class Linear(Layer):
    kind = "linear"

    def __init__(self, in_features, out_features, rng: Rng | None = None):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        rng = rng or Rng(0, "init")
        self.params["weight"] = _uniform_fan_in((out_features, in_features), in_features, rng)
        self.params["bias"] = np.zeros(out_features)
        self._x = None

    def out_shape(self, in_shape):
        return (self.out_features,)

    def mac_cost(self, in_shape):
        return self.in_features * self.out_features

    def forward(self, x, train=False):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ValueError(
                f"linear expects (N, {self.in_features}), got {x.shape}")
        self._x = x
        return x @ self.params["weight"].T + self.params["bias"]

    def backward(self, grad_out):
        self._require_cache(self._x, "linear")
        self.grads["weight"] = grad_out.T @ self._x
        self.grads["bias"] = grad_out.sum(axis=0)
        return grad_out @ self.params["weight"]

    def __repr__(self):
        return f"Linear({self.in_features}, {self.out_features})"
