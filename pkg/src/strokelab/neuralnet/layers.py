"""From-scratch differentiable layers over float64 numpy arrays.

Every layer caches whatever its backward pass needs during forward, exposes
its learnable arrays through parameters()/gradients() under stable names,
and treats train/eval as an explicit argument rather than hidden state.
Weight matrices draw from a shared per-network generator in layer order, so
a seed fixes the whole initialization.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def he_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """He-style uniform draw on [-sqrt(6/fan_in), +sqrt(6/fan_in)]."""
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base: stateless pass-through with no parameters."""

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def parameters(self) -> dict[str, np.ndarray]:
        return {}

    def gradients(self) -> dict[str, np.ndarray]:
        return {}

    def buffers(self) -> dict[str, np.ndarray]:
        return {}

    def describe(self) -> str:
        return type(self).__name__


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        self.n_in = n_in
        self.n_out = n_out
        self.weight = he_uniform(rng, (n_in, n_out), fan_in=n_in)
        self.bias = np.zeros(n_out)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._x: np.ndarray | None = None

    def forward(self, x, train):
        self._x = x
        return x @ self.weight + self.bias

    def backward(self, dout):
        if self._x is None:
            raise RuntimeError("backward called before forward")
        self.grad_weight = self._x.T @ dout
        self.grad_bias = dout.sum(axis=0)
        return dout @ self.weight.T

    def parameters(self):
        return {"weight": self.weight, "bias": self.bias}

    def gradients(self):
        return {"weight": self.grad_weight, "bias": self.grad_bias}

    def describe(self):
        return f"Dense({self.n_in} -> {self.n_out})"


class ReLU(Layer):
    def __init__(self):
        self._x: np.ndarray | None = None

    def forward(self, x, train):
        self._x = x
        return np.maximum(x, 0.0)

    def backward(self, dout):
        return dout * (self._x > 0)


class Dropout(Layer):
    """Inverted dropout: train-time activations are scaled by 1/(1-rate).

    Masks can be frozen so repeated forward passes see identical noise; the
    finite-difference check relies on that.
    """

    def __init__(self, rate: float, rng: np.random.Generator):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng
        self.frozen = False
        self._mask: np.ndarray | None = None

    def forward(self, x, train):
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        if not (self.frozen and self._mask is not None and self._mask.shape == x.shape):
            self._mask = self.rng.random(x.shape) >= self.rate
        return x * self._mask / (1.0 - self.rate)

    def backward(self, dout):
        if self._mask is None:
            return dout
        return dout * self._mask / (1.0 - self.rate)

    def describe(self):
        return f"Dropout({self.rate})"


class BatchNorm(Layer):
    """Batch normalization of (batch, features) activations.

    Statistics come from the batch while training and from the running
    buffers in eval. Running updates follow new = (1 - m) * old + m * batch,
    with the running variance stored in unbiased form.
    """

    def __init__(self, n_features: int, momentum: float = BN_MOMENTUM, eps: float = BN_EPS):
        self.n_features = n_features
        self.momentum = momentum
        self.eps = eps
        self.gamma = np.ones(n_features)
        self.beta = np.zeros(n_features)
        self.running_mean = np.zeros(n_features)
        self.running_var = np.ones(n_features)
        self.grad_gamma = np.zeros_like(self.gamma)
        self.grad_beta = np.zeros_like(self.beta)
        self._cache: tuple | None = None

    def forward(self, x, train):
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[1]}")
        if train:
            n = x.shape[0]
            if n < 2:
                raise ValueError("batch normalization needs at least 2 samples per training batch")
            mean = x.mean(axis=0)
            var = x.var(axis=0)  # biased, used for the normalization itself
            inv_std = 1.0 / np.sqrt(var + self.eps)
            x_hat = (x - mean) * inv_std
            self.running_mean = (1.0 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_var = (
                (1.0 - self.momentum) * self.running_var
                + self.momentum * var * n / (n - 1)
            )
            self._cache = (x_hat, inv_std, n)
            return self.gamma * x_hat + self.beta
        self._cache = None
        x_hat = (x - self.running_mean) / np.sqrt(self.running_var + self.eps)
        return self.gamma * x_hat + self.beta

    def backward(self, dout):
        if self._cache is None:
            raise RuntimeError("backward requires a preceding train-mode forward")
        x_hat, inv_std, n = self._cache
        self.grad_gamma = (dout * x_hat).sum(axis=0)
        self.grad_beta = dout.sum(axis=0)
        dx_hat = dout * self.gamma
        # Standard closed form folding the mean and variance paths together.
        return (inv_std / n) * (
            n * dx_hat
            - dx_hat.sum(axis=0)
            - x_hat * (dx_hat * x_hat).sum(axis=0)
        )

    def parameters(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def gradients(self):
        return {"gamma": self.grad_gamma, "beta": self.grad_beta}

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def describe(self):
        return f"BatchNorm({self.n_features})"


class Reshape1d(Layer):
    """(batch, features) -> (batch, channels, length) and back."""

    def __init__(self, channels: int, length: int):
        self.channels = channels
        self.length = length

    def forward(self, x, train):
        if x.shape[1] != self.channels * self.length:
            raise ValueError(
                f"cannot view {x.shape[1]} features as {self.channels}x{self.length}"
            )
        return x.reshape(x.shape[0], self.channels, self.length)

    def backward(self, dout):
        return dout.reshape(dout.shape[0], self.channels * self.length)

    def describe(self):
        return f"Reshape1d({self.channels}x{self.length})"


class Conv1d(Layer):
    """1-D cross-correlation with symmetric zero padding and unit stride."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 padding: int, rng: np.random.Generator):
        if kernel_size < 1 or padding < 0:
            raise ValueError("kernel_size must be >= 1 and padding >= 0")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.padding = padding
        fan_in = in_channels * kernel_size
        self.weight = he_uniform(rng, (out_channels, in_channels, kernel_size), fan_in=fan_in)
        self.bias = np.zeros(out_channels)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._cache: tuple | None = None

    def output_length(self, length: int) -> int:
        return length + 2 * self.padding - self.kernel_size + 1

    def forward(self, x, train):
        batch, channels, length = x.shape
        if channels != self.in_channels:
            raise ValueError(f"expected {self.in_channels} channels, got {channels}")
        out_length = self.output_length(length)
        if out_length < 1:
            raise ValueError(
                f"input length {length} too short for kernel {self.kernel_size} "
                f"with padding {self.padding}"
            )
        padded = np.pad(x, ((0, 0), (0, 0), (self.padding, self.padding)))
        windows = sliding_window_view(padded, self.kernel_size, axis=2)
        out = np.einsum("bclk,ock->bol", windows, self.weight) + self.bias[:, None]
        self._cache = (windows, padded.shape, length)
        return out

    def backward(self, dout):
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        windows, padded_shape, length = self._cache
        out_length = dout.shape[2]
        self.grad_weight = np.einsum("bol,bclk->ock", dout, windows)
        self.grad_bias = dout.sum(axis=(0, 2))
        dpadded = np.zeros(padded_shape)
        for k in range(self.kernel_size):
            dpadded[:, :, k:k + out_length] += np.einsum("bol,oc->bcl", dout, self.weight[:, :, k])
        if self.padding:
            return dpadded[:, :, self.padding:self.padding + length]
        return dpadded

    def parameters(self):
        return {"weight": self.weight, "bias": self.bias}

    def gradients(self):
        return {"weight": self.grad_weight, "bias": self.grad_bias}

    def describe(self):
        return (f"Conv1d({self.in_channels} -> {self.out_channels}, "
                f"k={self.kernel_size}, pad={self.padding})")


class MaxPool1d(Layer):
    """Non-overlapping max pooling; a trailing remainder window is dropped."""

    def __init__(self, window: int = 2):
        if window < 1:
            raise ValueError(f"pool window must be >= 1, got {window}")
        self.window = window
        self._cache: tuple | None = None

    def output_length(self, length: int) -> int:
        return length // self.window

    def forward(self, x, train):
        batch, channels, length = x.shape
        out_length = self.output_length(length)
        if out_length < 1:
            raise ValueError(f"input length {length} shorter than pool window {self.window}")
        trimmed = x[:, :, : out_length * self.window]
        tiles = trimmed.reshape(batch, channels, out_length, self.window)
        argmax = tiles.argmax(axis=3)
        self._cache = (argmax, x.shape, out_length)
        return np.take_along_axis(tiles, argmax[..., None], axis=3)[..., 0]

    def backward(self, dout):
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        argmax, in_shape, out_length = self._cache
        batch, channels, _ = in_shape
        dtiles = np.zeros((batch, channels, out_length, self.window))
        np.put_along_axis(dtiles, argmax[..., None], dout[..., None], axis=3)
        dx = np.zeros(in_shape)
        dx[:, :, : out_length * self.window] = dtiles.reshape(batch, channels, -1)
        return dx

    def describe(self):
        return f"MaxPool1d({self.window})"


class Flatten(Layer):
    def __init__(self):
        self._shape: tuple | None = None

    def forward(self, x, train):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        if self._shape is None:
            raise RuntimeError("backward called before forward")
        return dout.reshape(self._shape)
