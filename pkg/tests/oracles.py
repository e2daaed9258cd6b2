"""Independent reference implementations the test suite checks against.

Everything here is deliberately dumb and loop-based so it shares no code
path with the package: a six-nested-loop convolution, central finite
differences, and a direct per-window pooling reference.
"""

from __future__ import annotations

import numpy as np


def conv2d_reference(x, weight, bias=None, stride=1, pad=0, groups=1):
    """Direct-summation grouped convolution over NCHW input."""
    n, c_in, h, w = x.shape
    c_out, cg, kh, kw = weight.shape
    assert c_in % groups == 0 and c_out % groups == 0 and cg == c_in // groups
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    cpg_out = c_out // groups
    out = np.zeros((n, c_out, ho, wo))
    for b in range(n):
        for co in range(c_out):
            g = co // cpg_out
            for oy in range(ho):
                for ox in range(wo):
                    acc = 0.0
                    for ci in range(cg):
                        for i in range(kh):
                            for j in range(kw):
                                iy = oy * stride + i - pad
                                ix = ox * stride + j - pad
                                if 0 <= iy < h and 0 <= ix < w:
                                    acc += x[b, g * cg + ci, iy, ix] * weight[co, ci, i, j]
                    if bias is not None:
                        acc += bias[co]
                    out[b, co, oy, ox] = acc
    return out


def maxpool2x2_reference(x):
    n, c, h, w = x.shape
    out = np.zeros((n, c, h // 2, w // 2))
    for b in range(n):
        for ch in range(c):
            for oy in range(h // 2):
                for ox in range(w // 2):
                    best = -np.inf
                    for i in range(2):
                        for j in range(2):
                            v = x[b, ch, 2 * oy + i, 2 * ox + j]
                            if v > best:
                                best = v
                    out[b, ch, oy, ox] = best
    return out


def global_avg_pool_reference(x):
    n, c, h, w = x.shape
    out = np.zeros((n, c))
    for b in range(n):
        for ch in range(c):
            acc = 0.0
            for iy in range(h):
                for ix in range(w):
                    acc += x[b, ch, iy, ix]
            out[b, ch] = acc / (h * w)
    return out


def linear_reference(x, weight, bias):
    n, f = x.shape
    k = weight.shape[0]
    out = np.zeros((n, k))
    for b in range(n):
        for o in range(k):
            acc = 0.0
            for i in range(f):
                acc += x[b, i] * weight[o, i]
            out[b, o] = acc + bias[o]
    return out


def group_recombine_reference(x, weight):
    """Slice channels, 1x1-transform each slice, clamp negatives, sum."""
    n, c, h, w = x.shape
    groups, c_out, cg = weight.shape
    assert cg == c // groups
    out = np.zeros((n, c_out, h, w))
    for g in range(groups):
        branch = np.zeros((n, c_out, h, w))
        for b in range(n):
            for co in range(c_out):
                for ci in range(cg):
                    branch[b, co] += weight[g, co, ci] * x[b, g * cg + ci]
        out += np.maximum(branch, 0.0)
    return out


def batchnorm_train_reference(x, gamma, beta, eps):
    """Hand-arithmetic batch normalization over (N, H, W) per channel."""
    n, c, h, w = x.shape
    out = np.zeros_like(x)
    for ch in range(c):
        vals = [x[b, ch, iy, ix] for b in range(n) for iy in range(h) for ix in range(w)]
        mean = sum(vals) / len(vals)
        var = sum((v - mean) ** 2 for v in vals) / len(vals)
        inv = 1.0 / np.sqrt(var + eps)
        out[:, ch] = gamma[ch] * (x[:, ch] - mean) * inv + beta[ch]
    return out


def numerical_gradient(f, x, h=1e-5):
    """Central finite differences of a scalar function of an array."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp = x.copy()
        xp[idx] += h
        xm = x.copy()
        xm[idx] -= h
        grad[idx] = (f(xp) - f(xm)) / (2 * h)
        it.iternext()
    return grad


def max_rel_error(analytic, numeric, floor=1e-4):
    """Worst-case elementwise relative disagreement, floored for near-zeros."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))
