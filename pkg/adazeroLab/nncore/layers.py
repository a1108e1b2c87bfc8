"""
Layer menu for the lab's networks: dense, 2D convolution (NHWC), ReLU,
tanh, sigmoid, plus the parameter-free Flatten / Reshape / Upsample2D adapters.

Every layer works on a batch: inputs carry a leading batch axis and the
declared ``input_shape`` / ``output_shape`` exclude it. ``forward`` caches
what ``backward`` needs; ``backward`` returns the gradient with respect to
the layer input together with a dict of parameter gradients.
"""

from __future__ import annotations

import math
from typing import Any, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from adazeroLab.exceptions import ContractViolation

Shape = tuple[int, ...]


def glorot_uniform(rng: np.random.Generator, shape: Shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(np.float64)


class Layer:
    kind = 'layer'
    param_names: tuple[str, ...] = ()

    def __init__(self, input_shape: Shape) -> None:
        self.input_shape = tuple(int(d) for d in input_shape)
        self.output_shape = self.input_shape
        self.params: dict[str, np.ndarray] = {}
        self._cache: Any = None

    def config(self) -> dict[str, Any]:
        return {}

    def describe(self) -> dict[str, Any]:
        return {
            'kind': self.kind,
            'input_shape': list(self.input_shape),
            'output_shape': list(self.output_shape),
            'config': self.config(),
        }

    def check_input(self, x: np.ndarray) -> None:
        if x.ndim != len(self.input_shape) + 1 or tuple(x.shape[1:]) != self.input_shape:
            raise ContractViolation(
                f"{self.kind} expects input (N, {', '.join(map(str, self.input_shape))}), got {x.shape}"
            )

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        raise NotImplementedError

    def _cached(self) -> Any:
        if self._cache is None:
            raise ContractViolation(f"{self.kind}.backward called without a cached forward pass")
        return self._cache


class Dense(Layer):
    kind = 'dense'
    param_names = ('weight', 'bias')

    def __init__(self, input_shape: Shape, units: int, rng: Optional[np.random.Generator] = None) -> None:
        super().__init__(input_shape)
        if len(self.input_shape) != 1:
            raise ContractViolation(f"dense layer needs a flat input, got {self.input_shape}")
        self.units = int(units)
        self.output_shape = (self.units,)
        fan_in = self.input_shape[0]
        if rng is None:
            weight = np.zeros((fan_in, self.units))
        else:
            weight = glorot_uniform(rng, (fan_in, self.units), fan_in, self.units)
        self.params = {'weight': weight, 'bias': np.zeros(self.units)}

    def config(self) -> dict[str, Any]:
        return {'units': self.units}

    def forward(self, x):
        self.check_input(x)
        self._cache = x
        return x @ self.params['weight'] + self.params['bias']

    def backward(self, grad):
        x = self._cached()
        grads = {'weight': x.T @ grad, 'bias': grad.sum(axis=0)}
        return grad @ self.params['weight'].T, grads


class Conv2D(Layer):
    """Square-kernel convolution over NHWC batches; weight layout (k, k, C_in, C_out)."""

    kind = 'conv2d'
    param_names = ('weight', 'bias')

    def __init__(
        self,
        input_shape: Shape,
        filters: int,
        kernel: int = 3,
        stride: int = 1,
        padding: int = 0,
        rng: Optional[np.random.Generator] = None,
    ) -> None:
        super().__init__(input_shape)
        if len(self.input_shape) != 3:
            raise ContractViolation(f"conv2d needs an (H, W, C) input, got {self.input_shape}")
        self.filters, self.kernel, self.stride, self.padding = int(filters), int(kernel), int(stride), int(padding)
        height, width, channels = self.input_shape
        out_h = (height + 2 * self.padding - self.kernel) // self.stride + 1
        out_w = (width + 2 * self.padding - self.kernel) // self.stride + 1
        if out_h < 1 or out_w < 1:
            raise ContractViolation(f"kernel {self.kernel} does not fit input {self.input_shape}")
        self.output_shape = (out_h, out_w, self.filters)
        shape = (self.kernel, self.kernel, channels, self.filters)
        if rng is None:
            weight = np.zeros(shape)
        else:
            area = self.kernel * self.kernel
            weight = glorot_uniform(rng, shape, area * channels, area * self.filters)
        self.params = {'weight': weight, 'bias': np.zeros(self.filters)}

    def config(self) -> dict[str, Any]:
        return {'filters': self.filters, 'kernel': self.kernel, 'stride': self.stride, 'padding': self.padding}

    def _pad(self, x: np.ndarray) -> np.ndarray:
        p = self.padding
        if p == 0:
            return x
        return np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))

    def forward(self, x):
        self.check_input(x)
        padded = self._pad(x)
        s = self.stride
        # (N, H_out, W_out, C_in, k, k)
        windows = sliding_window_view(padded, (self.kernel, self.kernel), axis=(1, 2))[:, ::s, ::s]
        self._cache = (padded.shape, windows)
        out = np.tensordot(windows, self.params['weight'], axes=([3, 4, 5], [2, 0, 1]))
        return out + self.params['bias']

    def backward(self, grad):
        padded_shape, windows = self._cached()
        weight = self.params['weight']
        grads = {
            'weight': np.tensordot(windows, grad, axes=([0, 1, 2], [0, 1, 2])).transpose(1, 2, 0, 3),
            'bias': grad.sum(axis=(0, 1, 2)),
        }
        out_h, out_w = grad.shape[1], grad.shape[2]
        s = self.stride
        grad_padded = np.zeros(padded_shape)
        for i in range(self.kernel):
            for j in range(self.kernel):
                grad_padded[:, i:i + s * out_h:s, j:j + s * out_w:s, :] += grad @ weight[i, j].T
        p = self.padding
        height, width = self.input_shape[0], self.input_shape[1]
        return grad_padded[:, p:p + height, p:p + width, :], grads


class ReLU(Layer):
    kind = 'relu'

    def forward(self, x):
        self.check_input(x)
        mask = x > 0
        self._cache = mask
        return np.where(mask, x, 0.0)

    def backward(self, grad):
        return grad * self._cached(), {}


class Tanh(Layer):
    kind = 'tanh'

    def forward(self, x):
        self.check_input(x)
        out = np.tanh(x)
        self._cache = out
        return out

    def backward(self, grad):
        out = self._cached()
        return grad * (1.0 - out ** 2), {}


class Sigmoid(Layer):
    kind = 'sigmoid'

    def forward(self, x):
        self.check_input(x)
        out = expit(x)
        self._cache = out
        return out

    def backward(self, grad):
        out = self._cached()
        return grad * out * (1.0 - out), {}


class Flatten(Layer):
    kind = 'flatten'

    def __init__(self, input_shape: Shape) -> None:
        super().__init__(input_shape)
        self.output_shape = (int(np.prod(self.input_shape)),)

    def forward(self, x):
        self.check_input(x)
        self._cache = True
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        self._cached()
        return grad.reshape((grad.shape[0],) + self.input_shape), {}


class Reshape(Layer):
    kind = 'reshape'

    def __init__(self, input_shape: Shape, target_shape: Shape) -> None:
        super().__init__(input_shape)
        target = tuple(int(d) for d in target_shape)
        if int(np.prod(target)) != int(np.prod(self.input_shape)):
            raise ContractViolation(f"cannot reshape {self.input_shape} into {target}")
        self.output_shape = target

    def config(self) -> dict[str, Any]:
        return {'target_shape': list(self.output_shape)}

    def forward(self, x):
        self.check_input(x)
        self._cache = True
        return x.reshape((x.shape[0],) + self.output_shape)

    def backward(self, grad):
        self._cached()
        return grad.reshape((grad.shape[0],) + self.input_shape), {}


class Upsample2D(Layer):
    """Nearest-neighbour resize of an (H, W, C) map to a target height and width."""

    kind = 'upsample2d'

    def __init__(self, input_shape: Shape, size: Shape) -> None:
        super().__init__(input_shape)
        if len(self.input_shape) != 3:
            raise ContractViolation(f"upsample2d needs an (H, W, C) input, got {self.input_shape}")
        out_h, out_w = (int(d) for d in size)
        height, width, channels = self.input_shape
        if out_h < height or out_w < width:
            raise ContractViolation(f"upsample2d cannot shrink {self.input_shape[:2]} to {(out_h, out_w)}")
        self.output_shape = (out_h, out_w, channels)
        self._rows = np.arange(out_h) * height // out_h
        self._cols = np.arange(out_w) * width // out_w

    def config(self) -> dict[str, Any]:
        return {'size': list(self.output_shape[:2])}

    def forward(self, x):
        self.check_input(x)
        self._cache = True
        return x[:, self._rows][:, :, self._cols]

    def backward(self, grad):
        self._cached()
        grad_in = np.zeros((grad.shape[0],) + self.input_shape)
        np.add.at(grad_in, (slice(None), self._rows[:, None], self._cols[None, :]), grad)
        return grad_in, {}


LAYER_KINDS = {cls.kind: cls for cls in (Dense, Conv2D, Upsample2D, ReLU, Tanh, Sigmoid, Flatten, Reshape)}


def layer_from_descriptor(descriptor: dict[str, Any]) -> Layer:
    """Rebuild a zero-initialized layer from ``Layer.describe()`` output."""
    kind = descriptor['kind']
    try:
        cls = LAYER_KINDS[kind]
    except KeyError as exc:
        raise ContractViolation(f"unknown layer kind {kind!r}") from exc
    layer = cls(tuple(descriptor['input_shape']), **descriptor.get('config', {}))
    if list(layer.output_shape) != list(descriptor['output_shape']):
        raise ContractViolation(f"descriptor for {kind} has inconsistent output shape")
    return layer
