"""Differentiable layers on numpy arrays, channels-first, double precision.

Every layer caches what its backward pass needs during forward and exposes
its trainable parameters as Param objects.  Convolutions are evaluated by
unrolling input windows into a matrix and multiplying (im2col), which turns
both passes into BLAS calls; the gradient with respect to the input of a
stride-1 same-padded convolution is again a same-padded convolution, with
the kernel flipped spatially and transposed in its channel axes.

Batch layout: (batch, channels, length) in 1D, (batch, channels, height,
width) in 2D.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DataError

__all__ = [
    "Param",
    "Layer",
    "Conv1d",
    "Conv2d",
    "BatchNorm",
    "ReLU",
    "GlobalAvgPool",
    "Dense",
]


class Param:
    """One trainable array with its gradient accumulator."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self):
        self.grad[...] = 0.0


class Layer:
    """Base class; stateless layers keep the default empty parameter list."""

    def params(self) -> list[Param]:
        return []

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Non-trainable state that checkpoints must carry (running stats)."""
        return {}

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _he_scale(fan_in: int) -> float:
    return np.sqrt(2.0 / fan_in)


class Conv1d(Layer):
    """Stride-1 same-padded 1D convolution; odd kernel size.

    Pass bias=False when the convolution feeds a BatchNorm: the mean
    subtraction cancels any per-channel constant, so a bias there is a
    dead parameter whose true gradient is identically zero.
    """

    def __init__(self, c_in: int, c_out: int, kernel: int = 3, rng=None, bias: bool = True):
        if kernel < 1 or kernel % 2 == 0:
            raise ValueError(f"kernel size must be odd and >= 1, got {kernel}")
        rng = np.random.default_rng(rng)
        self.c_in, self.c_out, self.kernel = c_in, c_out, kernel
        scale = _he_scale(c_in * kernel)
        self.weight = Param("weight", scale * rng.standard_normal((c_out, c_in, kernel)))
        self.bias = Param("bias", np.zeros(c_out)) if bias else None
        self._cols = None
        self._x_shape = None

    def params(self):
        return [self.weight] if self.bias is None else [self.weight, self.bias]

    def _im2col(self, x: np.ndarray) -> np.ndarray:
        pad = self.kernel // 2
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
        # windows: (B, C, L, k) -> (B*L, C*k)
        win = sliding_window_view(xp, self.kernel, axis=2)
        b, c, length, k = win.shape
        return win.transpose(0, 2, 1, 3).reshape(b * length, c * k)

    def forward(self, x, train):
        if x.ndim != 3 or x.shape[1] != self.c_in:
            raise DataError(f"conv1d expects (B, {self.c_in}, L), got {x.shape}")
        b, _, length = x.shape
        cols = self._im2col(x)
        w = self.weight.value.reshape(self.c_out, -1)
        y = cols @ w.T
        if self.bias is not None:
            y += self.bias.value
        if train:
            self._cols, self._x_shape = cols, x.shape
        return y.reshape(b, length, self.c_out).transpose(0, 2, 1)

    def backward(self, dy):
        b, _, length = self._x_shape
        dy_r = dy.transpose(0, 2, 1).reshape(b * length, self.c_out)
        if self.bias is not None:
            self.bias.grad += dy_r.sum(axis=0)
        self.weight.grad += (dy_r.T @ self._cols).reshape(self.weight.value.shape)
        # dx: convolve dy with the flipped, channel-transposed kernel
        wt = self.weight.value[:, :, ::-1].transpose(1, 0, 2)  # (c_in, c_out, k)
        pad = self.kernel // 2
        dyp = np.pad(dy, ((0, 0), (0, 0), (pad, pad)))
        win = sliding_window_view(dyp, self.kernel, axis=2)
        cols = win.transpose(0, 2, 1, 3).reshape(b * length, self.c_out * self.kernel)
        dx = cols @ wt.reshape(self.c_in, -1).T
        self._cols = None
        return dx.reshape(b, length, self.c_in).transpose(0, 2, 1)


class Conv2d(Layer):
    """Stride-1 same-padded 2D convolution; odd square kernel.

    Same bias convention as Conv1d: disable it under a BatchNorm.
    """

    def __init__(self, c_in: int, c_out: int, kernel: int = 3, rng=None, bias: bool = True):
        if kernel < 1 or kernel % 2 == 0:
            raise ValueError(f"kernel size must be odd and >= 1, got {kernel}")
        rng = np.random.default_rng(rng)
        self.c_in, self.c_out, self.kernel = c_in, c_out, kernel
        scale = _he_scale(c_in * kernel * kernel)
        self.weight = Param("weight", scale * rng.standard_normal((c_out, c_in, kernel, kernel)))
        self.bias = Param("bias", np.zeros(c_out)) if bias else None
        self._cols = None
        self._x_shape = None

    def params(self):
        return [self.weight] if self.bias is None else [self.weight, self.bias]

    @staticmethod
    def _im2col(x: np.ndarray, kernel: int) -> np.ndarray:
        pad = kernel // 2
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        win = sliding_window_view(xp, (kernel, kernel), axis=(2, 3))
        b, c, h, w, kh, kw = win.shape
        return win.transpose(0, 2, 3, 1, 4, 5).reshape(b * h * w, c * kh * kw)

    def forward(self, x, train):
        if x.ndim != 4 or x.shape[1] != self.c_in:
            raise DataError(f"conv2d expects (B, {self.c_in}, H, W), got {x.shape}")
        b, _, h, w = x.shape
        cols = self._im2col(x, self.kernel)
        wmat = self.weight.value.reshape(self.c_out, -1)
        y = cols @ wmat.T
        if self.bias is not None:
            y += self.bias.value
        if train:
            self._cols, self._x_shape = cols, x.shape
        return y.reshape(b, h, w, self.c_out).transpose(0, 3, 1, 2)

    def backward(self, dy):
        b, _, h, w = self._x_shape
        dy_r = dy.transpose(0, 2, 3, 1).reshape(b * h * w, self.c_out)
        if self.bias is not None:
            self.bias.grad += dy_r.sum(axis=0)
        self.weight.grad += (dy_r.T @ self._cols).reshape(self.weight.value.shape)
        wt = self.weight.value[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
        cols = self._im2col(dy, self.kernel)
        dx = cols @ wt.reshape(self.c_in, -1).T
        self._cols = None
        return dx.reshape(b, h, w, self.c_in).transpose(0, 3, 1, 2)


class BatchNorm(Layer):
    """Per-channel batch normalization over batch and spatial axes.

    Training uses batch statistics (biased variance, eps 1e-5) and updates
    the running statistics with momentum (running variance kept unbiased);
    inference standardizes with the running statistics.
    """

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1):
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.gamma = Param("gamma", np.ones(channels))
        self.beta = Param("beta", np.zeros(channels))
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self._cache = None

    def params(self):
        return [self.gamma, self.beta]

    def state_arrays(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def _axes_and_shape(self, x):
        axes = (0,) + tuple(range(2, x.ndim))
        shape = (1, self.channels) + (1,) * (x.ndim - 2)
        return axes, shape

    def forward(self, x, train):
        if x.shape[1] != self.channels:
            raise DataError(f"batchnorm expects {self.channels} channels, got {x.shape}")
        axes, shape = self._axes_and_shape(x)
        if train:
            if x.shape[0] < 2:
                raise DataError("batch normalization needs batch size >= 2 in train mode")
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            count = x.size // self.channels
            self.running_mean += self.momentum * (mean - self.running_mean)
            unbiased = var * count / (count - 1)
            self.running_var += self.momentum * (unbiased - self.running_var)
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean.reshape(shape)) * inv_std.reshape(shape)
        if train:
            self._cache = (xhat, inv_std)
        return self.gamma.value.reshape(shape) * xhat + self.beta.value.reshape(shape)

    def backward(self, dy):
        xhat, inv_std = self._cache
        self._cache = None
        axes, shape = self._axes_and_shape(dy)
        count = dy.size // self.channels
        self.gamma.grad += np.sum(dy * xhat, axis=axes)
        self.beta.grad += np.sum(dy, axis=axes)
        g = self.gamma.value.reshape(shape)
        dxhat = dy * g
        mean_dxhat = dxhat.mean(axis=axes).reshape(shape)
        mean_dxhat_xhat = (dxhat * xhat).mean(axis=axes).reshape(shape)
        return inv_std.reshape(shape) * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)


class ReLU(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x, train):
        if train:
            self._mask = x > 0
            return np.where(self._mask, x, 0.0)
        return np.maximum(x, 0.0)

    def backward(self, dy):
        dx = np.where(self._mask, dy, 0.0)
        self._mask = None
        return dx


class GlobalAvgPool(Layer):
    """Mean over all spatial axes: (B, C, ...) -> (B, C)."""

    def __init__(self):
        self._x_shape = None

    def forward(self, x, train):
        if train:
            self._x_shape = x.shape
        return x.mean(axis=tuple(range(2, x.ndim)))

    def backward(self, dy):
        shape = self._x_shape
        self._x_shape = None
        spatial = int(np.prod(shape[2:]))
        expanded = dy.reshape(dy.shape + (1,) * (len(shape) - 2))
        return np.broadcast_to(expanded / spatial, shape).copy()


class Dense(Layer):
    def __init__(self, c_in: int, c_out: int, rng=None):
        rng = np.random.default_rng(rng)
        self.c_in, self.c_out = c_in, c_out
        self.weight = Param("weight", _he_scale(c_in) * rng.standard_normal((c_out, c_in)))
        self.bias = Param("bias", np.zeros(c_out))
        self._x = None

    def params(self):
        return [self.weight, self.bias]

    def forward(self, x, train):
        if x.ndim != 2 or x.shape[1] != self.c_in:
            raise DataError(f"dense expects (B, {self.c_in}), got {x.shape}")
        if train:
            self._x = x
        return x @ self.weight.value.T + self.bias.value

    def backward(self, dy):
        self.weight.grad += dy.T @ self._x
        self.bias.grad += dy.sum(axis=0)
        self._x = None
        return dy @ self.weight.value
