"""Convolutional building blocks on the autodiff engine.

conv2d runs through the kernel backend (im2col + BLAS matmul, col2im for
the input gradient). Upsampling layers are nearest-neighbour doubling
followed by a 3x3 convolution, which avoids checkerboard artifacts.
"""
from dataclasses import dataclass

import numpy as np

from mvsweep import kernels
from mvsweep.neural.tensor import (
    Tensor,
    accumulate_grad,
    _make,
    leaky_relu,
    relu,
    sigmoid,
    upsample_nearest2,
)

LAYER_KINDS = (
    "conv",
    "deconv",
    "batchnorm",
    "relu",
    "leaky_relu",
    "sigmoid",
    "avgpool",
    "concat_skip",
)


@dataclass(frozen=True)
class LayerSpec:
    """Declarative description of one network layer."""

    kind: str
    kernel: int = 0
    stride: int = 1
    in_channels: int = 0
    out_channels: int = 0

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind in ("conv", "deconv"):
            if self.kernel % 2 != 1:
                raise ValueError(f"conv kernels must be odd-sized, got {self.kernel}")
            if self.stride not in (1, 2):
                raise ValueError(f"stride must be 1 or 2, got {self.stride}")


def conv2d(x, weight, bias=None, stride=1, padding=0):
    """2-d convolution with zero padding; weight is (cout, cin, kh, kw)."""
    n, cin, h, w = x.data.shape
    cout, cin_w, kh, kw = weight.data.shape
    if cin != cin_w:
        raise ValueError(f"conv input has {cin} channels, weight expects {cin_w}")
    cols = kernels.im2col(x.data, kh, kw, stride, padding, padding)
    wmat = weight.data.reshape(cout, cin * kh * kw)
    out = np.matmul(wmat, cols)
    oh = kernels.conv_out_size(h, kh, stride, padding)
    ow = kernels.conv_out_size(w, kw, stride, padding)
    out = out.reshape(n, cout, oh, ow)
    if bias is not None:
        out += bias.data.reshape(1, cout, 1, 1)

    def backward(g):
        gm = g.reshape(n, cout, oh * ow)
        if weight.requires_grad:
            gw = np.tensordot(gm, cols, axes=([0, 2], [0, 2]))
            accumulate_grad(weight, gw.reshape(weight.data.shape))
        if bias is not None and bias.requires_grad:
            accumulate_grad(bias, gm.sum(axis=(0, 2)))
        if x.requires_grad:
            dcols = np.matmul(wmat.T, gm)
            accumulate_grad(x, kernels.col2im(dcols, h, w, kh, kw, stride, padding, padding))

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _make(out, parents, backward)


def batchnorm2d(x, gamma, beta, running_mean, running_var, training,
                momentum=0.1, eps=1e-5):
    """Per-channel batch normalization over (batch, height, width).

    Training mode normalizes with batch statistics and updates the running
    buffers in place; eval mode applies the running statistics as a fixed
    per-channel affine map.
    """
    axes = (0, 2, 3)
    dtype = x.dtype
    if training:
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mu = running_mean.astype(dtype)
        var = running_var.astype(dtype)
    inv_std = 1.0 / np.sqrt(var + dtype.type(eps))
    xhat = (x.data - mu.reshape(1, -1, 1, 1)) * inv_std.reshape(1, -1, 1, 1)
    out = gamma.data.reshape(1, -1, 1, 1) * xhat + beta.data.reshape(1, -1, 1, 1)

    def backward(g):
        if gamma.requires_grad:
            accumulate_grad(gamma, (g * xhat).sum(axis=axes))
        if beta.requires_grad:
            accumulate_grad(beta, g.sum(axis=axes))
        if x.requires_grad:
            scale = (gamma.data * inv_std).reshape(1, -1, 1, 1)
            if training:
                g_mean = g.mean(axis=axes).reshape(1, -1, 1, 1)
                gx_mean = (g * xhat).mean(axis=axes).reshape(1, -1, 1, 1)
                accumulate_grad(x, scale * (g - g_mean - xhat * gx_mean))
            else:
                accumulate_grad(x, scale * g)

    return _make(out, (x, gamma, beta), backward)


class Conv2d:
    """Conv layer with fan-in-scaled uniform init and same-style padding."""

    def __init__(self, in_channels, out_channels, kernel, stride=1, rng=None,
                 dtype=np.float32, zero_init=False, bias_fill=0.0):
        self.spec = LayerSpec("conv", kernel, stride, in_channels, out_channels)
        self.stride = stride
        self.padding = kernel // 2
        shape = (out_channels, in_channels, kernel, kernel)
        if zero_init:
            weight = np.zeros(shape, dtype=dtype)
        else:
            fan_in = in_channels * kernel * kernel
            bound = 1.0 / np.sqrt(fan_in)
            weight = rng.uniform(-bound, bound, size=shape).astype(dtype)
        self.weight = Tensor(weight, requires_grad=True)
        self.bias = Tensor(np.full(out_channels, bias_fill, dtype=dtype), requires_grad=True)

    def __call__(self, x):
        return conv2d(x, self.weight, self.bias, self.stride, self.padding)

    def parameters(self):
        return {"weight": self.weight, "bias": self.bias}

    def buffers(self):
        return {}


class BatchNorm2d:
    def __init__(self, channels, dtype=np.float32, momentum=0.1, eps=1e-5):
        self.gamma = Tensor(np.ones(channels, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
        # running stats share the parameter dtype so checkpoints round-trip exactly
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x, training):
        return batchnorm2d(
            x, self.gamma, self.beta, self.running_mean, self.running_var,
            training, self.momentum, self.eps,
        )

    def parameters(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}


class ConvBlock:
    """Conv followed by batchnorm and ReLU or LeakyReLU."""

    def __init__(self, in_channels, out_channels, kernel, stride, rng,
                 activation="relu", batchnorm=True, dtype=np.float32):
        self.conv = Conv2d(in_channels, out_channels, kernel, stride, rng, dtype)
        self.bn = BatchNorm2d(out_channels, dtype) if batchnorm else None
        self.activation = activation

    def __call__(self, x, training):
        out = self.conv(x)
        if self.bn is not None:
            out = self.bn(out, training)
        if self.activation == "relu":
            return relu(out)
        if self.activation == "leaky_relu":
            return leaky_relu(out)
        if self.activation == "sigmoid":
            return sigmoid(out)
        raise ValueError(f"unknown activation {self.activation!r}")

    def parameters(self):
        named = {f"conv.{k}": v for k, v in self.conv.parameters().items()}
        if self.bn is not None:
            named.update({f"bn.{k}": v for k, v in self.bn.parameters().items()})
        return named

    def buffers(self):
        if self.bn is None:
            return {}
        return {f"bn.{k}": v for k, v in self.bn.buffers().items()}


class UpBlock:
    """Nearest-neighbour 2x upsampling followed by a 3x3 ConvBlock."""

    def __init__(self, in_channels, out_channels, rng, activation="relu",
                 batchnorm=True, dtype=np.float32):
        self.spec = LayerSpec("deconv", 3, 1, in_channels, out_channels)
        self.block = ConvBlock(in_channels, out_channels, 3, 1, rng,
                               activation, batchnorm, dtype)

    def __call__(self, x, training):
        return self.block(upsample_nearest2(x), training)

    def parameters(self):
        return self.block.parameters()

    def buffers(self):
        return self.block.buffers()
