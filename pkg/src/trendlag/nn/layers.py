"""Layer stack and reverse-mode gradients for the forecasting network.

Shapes follow (batch, length, channels) for convolutional inputs. Every
array is float64; a non-finite value surfacing anywhere aborts the run
rather than propagating silently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from trendlag.nn.kernels import (
    conv1d_kernel_backward,
    conv1d_kernel_forward,
    dense_kernel_backward,
    dense_kernel_forward,
)

ACTIVATIONS = ("relu", "linear")


class NonFiniteError(RuntimeError):
    """A tensor picked up a NaN or Inf; computation must not continue."""


def check_finite(name: str, array: np.ndarray) -> None:
    if not np.isfinite(array).all():
        raise NonFiniteError(f"non-finite values in {name}")


@dataclass
class Parameter:
    """A learnable tensor with its gradient buffer and a stable name."""

    name: str
    value: np.ndarray
    grad: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.value = np.asarray(self.value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)


def glorot_normal(
    shape: tuple[int, ...],
    rng: np.random.Generator,
    fan_in: int | None = None,
    fan_out: int | None = None,
) -> np.ndarray:
    """Draw Normal(0, sigma^2) with sigma = sqrt(2 / (fan_in + fan_out)).

    Default fans: a (d_in, d_out) matrix uses its two axes; a (k, c_in, c_out)
    convolution kernel uses k*c_in / k*c_out (receptive-field convention).
    """
    if fan_in is None or fan_out is None:
        if len(shape) == 2:
            fan_in, fan_out = shape
        elif len(shape) == 3:
            k, c_in, c_out = shape
            fan_in, fan_out = k * c_in, k * c_out
        else:
            raise ValueError(
                f"cannot infer fans from shape {shape}; pass fan_in and fan_out"
            )
    sigma = np.sqrt(2.0 / (fan_in + fan_out))
    return sigma * rng.standard_normal(shape)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def conv1d_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Same-padded 1-D convolution; accepts (L, Cin) or (B, L, Cin) input."""
    single = x.ndim == 2
    xb = x[None] if single else x
    if xb.ndim != 3 or weights.ndim != 3 or xb.shape[2] != weights.shape[1]:
        raise ValueError(
            f"conv1d shape mismatch: input {x.shape}, weights {weights.shape}"
        )
    if bias.shape != (weights.shape[2],):
        raise ValueError(f"conv1d bias shape {bias.shape} != ({weights.shape[2]},)")
    out = conv1d_kernel_forward(xb, weights, bias)
    return out[0] if single else out


def dense_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map; accepts (Din,) or (B, Din) input."""
    single = x.ndim == 1
    xb = x[None] if single else x
    if xb.shape[1] != weights.shape[0]:
        raise ValueError(
            f"dense shape mismatch: input {x.shape}, weights {weights.shape}"
        )
    if bias.shape != (weights.shape[1],):
        raise ValueError(f"dense bias shape {bias.shape} != ({weights.shape[1]},)")
    out = dense_kernel_forward(xb, weights, bias)
    return out[0] if single else out


def dropout_forward(
    x: np.ndarray, p: float = 0.30, train: bool = False, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Inverted dropout: train mode zeroes units w.p. p and rescales survivors."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must lie in [0, 1), got {p}")
    if not train or p == 0.0:
        return x.copy()
    if rng is None:
        raise ValueError("dropout in train mode needs an rng")
    mask = (rng.random(x.shape) >= p).astype(np.float64)
    return x * mask / (1.0 - p)


class Conv1D:
    def __init__(self, in_channels: int, filters: int, kernel_size: int, name: str):
        self.name = name
        self.activation = "relu"
        self.weight = Parameter(f"{name}.weight", np.zeros((kernel_size, in_channels, filters)))
        self.bias = Parameter(f"{name}.bias", np.zeros(filters))
        self._x: np.ndarray | None = None
        self._z: np.ndarray | None = None

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def forward(self, x, train=False, rng=None):
        if x.shape[2] != self.weight.value.shape[1]:
            raise ValueError(
                f"{self.name}: input has {x.shape[2]} channels, "
                f"layer expects {self.weight.value.shape[1]}"
            )
        self._x = x
        self._z = conv1d_kernel_forward(x, self.weight.value, self.bias.value)
        return relu(self._z)

    def backward(self, grad):
        grad_z = grad * (self._z > 0)
        grad_x, grad_w, grad_b = conv1d_kernel_backward(self._x, self.weight.value, grad_z)
        self.weight.grad += grad_w
        self.bias.grad += grad_b
        return grad_x


class Flatten:
    name = "flatten"

    def __init__(self):
        self._shape: tuple[int, ...] | None = None

    def parameters(self) -> list[Parameter]:
        return []

    def forward(self, x, train=False, rng=None):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)


class Dense:
    def __init__(self, in_features: int, units: int, activation: str, name: str):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.name = name
        self.activation = activation
        self.weight = Parameter(f"{name}.weight", np.zeros((in_features, units)))
        self.bias = Parameter(f"{name}.bias", np.zeros(units))
        self._x: np.ndarray | None = None
        self._z: np.ndarray | None = None

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def forward(self, x, train=False, rng=None):
        if x.shape[1] != self.weight.value.shape[0]:
            raise ValueError(
                f"{self.name}: input width {x.shape[1]} != "
                f"expected {self.weight.value.shape[0]}"
            )
        self._x = x
        self._z = dense_kernel_forward(x, self.weight.value, self.bias.value)
        return relu(self._z) if self.activation == "relu" else self._z

    def backward(self, grad):
        grad_z = grad * (self._z > 0) if self.activation == "relu" else grad
        grad_x, grad_w, grad_b = dense_kernel_backward(self._x, self.weight.value, grad_z)
        self.weight.grad += grad_w
        self.bias.grad += grad_b
        return grad_x


class Dropout:
    def __init__(self, p: float, name: str = "dropout"):
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout probability must lie in [0, 1), got {p}")
        self.name = name
        self.p = p
        self._scaled_mask: np.ndarray | float = 1.0

    def parameters(self) -> list[Parameter]:
        return []

    def forward(self, x, train=False, rng=None):
        if not train or self.p == 0.0:
            self._scaled_mask = 1.0
            return x
        if rng is None:
            raise ValueError(f"{self.name}: train-mode forward needs an rng")
        mask = (rng.random(x.shape) >= self.p).astype(np.float64)
        self._scaled_mask = mask / (1.0 - self.p)
        return x * self._scaled_mask

    def backward(self, grad):
        return grad * self._scaled_mask


@dataclass(frozen=True)
class NetworkSpec:
    """The fixed forecaster stack: three widening conv blocks, one wide
    hidden dense layer, dropout, and a linear head of `horizon` units."""

    conv_filters: tuple[int, ...] = (32, 64, 128)
    kernel_size: int = 3
    dense_units: int = 1024
    dropout_p: float = 0.30
    horizon: int = 4

    def __post_init__(self) -> None:
        if self.kernel_size < 1:
            raise ValueError("kernel size must be >= 1")
        if not self.conv_filters:
            raise ValueError("need at least one convolutional layer")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout probability must lie in [0, 1)")


class Network:
    """A sequential stack with cached activations for one backward pass."""

    def __init__(self, layers: list):
        self.layers = layers
        self._ready_for_backward = False

    def parameters(self) -> list[Parameter]:
        return [p for layer in self.layers for p in layer.parameters()]

    def initialize(self, init_stream_for) -> None:
        """Glorot-normal weights, zero biases; one named stream per tensor."""
        for param in self.parameters():
            if param.name.endswith(".weight"):
                param.value = glorot_normal(param.value.shape, init_stream_for(param.name))
            else:
                param.value = np.zeros_like(param.value)
            param.grad = np.zeros_like(param.value)

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        out = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            out = layer.forward(out, train=train, rng=rng)
        check_finite("network output", out)
        self._ready_for_backward = True
        return out

    def backward(self, grad_out: np.ndarray) -> None:
        """Populate parameter gradients for the most recent forward pass."""
        if not self._ready_for_backward:
            raise RuntimeError("backward() called without a preceding forward pass")
        grad = grad_out
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        self._ready_for_backward = False

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.grad[...] = 0.0

    def detached_parameters(self) -> list[str]:
        """Names of parameters whose gradient is identically zero."""
        return [p.name for p in self.parameters() if not np.any(p.grad)]

    def snapshot(self) -> list[np.ndarray]:
        return [p.value.copy() for p in self.parameters()]

    def restore(self, snapshot: list[np.ndarray]) -> None:
        for param, saved in zip(self.parameters(), snapshot, strict=True):
            param.value = saved.copy()


def build_network(spec: NetworkSpec, in_len: int, in_channels: int) -> Network:
    """Materialize the layer stack for a given input window shape.

    Weights start at zero; call Network.initialize with labeled streams.
    """
    layers: list = []
    channels = in_channels
    for i, filters in enumerate(spec.conv_filters):
        layers.append(Conv1D(channels, filters, spec.kernel_size, name=f"conv{i}"))
        channels = filters
    layers.append(Flatten())
    layers.append(Dense(in_len * channels, spec.dense_units, "relu", name="dense0"))
    layers.append(Dropout(spec.dropout_p))
    layers.append(Dense(spec.dense_units, spec.horizon, "linear", name="dense1"))
    return Network(layers)
