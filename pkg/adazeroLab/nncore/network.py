from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from adazeroLab.exceptions import ContractViolation

from .layers import Layer


@dataclass
class Gradients:
    """Parameter gradients shaped like a ParamSet, plus the gradient w.r.t. its input."""

    blocks: list[dict[str, np.ndarray]]
    input_grad: Optional[np.ndarray] = None

    def items(self) -> Iterator[tuple[int, str, np.ndarray]]:
        for index, block in enumerate(self.blocks):
            for name, value in block.items():
                yield index, name, value

    def scaled(self, factor: float) -> 'Gradients':
        return Gradients([{k: v * factor for k, v in block.items()} for block in self.blocks], self.input_grad)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(value)) for _, _, value in self.items())


@dataclass
class AdamState:
    t: int = 0
    m: list[dict[str, np.ndarray]] = field(default_factory=list)
    v: list[dict[str, np.ndarray]] = field(default_factory=list)


class ParamSet:
    """
    An ordered stack of layers together with its Adam moment state.

    A ParamSet has a single writer (the training loop that owns it);
    ``snapshot()`` produces an independent copy for inference elsewhere.
    """

    def __init__(self, layers: Sequence[Layer]) -> None:
        self.layers = list(layers)
        for upstream, downstream in zip(self.layers, self.layers[1:]):
            if upstream.output_shape != downstream.input_shape:
                raise ContractViolation(
                    f"{upstream.kind} outputs {upstream.output_shape} but {downstream.kind} "
                    f"expects {downstream.input_shape}"
                )
        self.adam = AdamState(
            m=[{k: np.zeros_like(v) for k, v in layer.params.items()} for layer in self.layers],
            v=[{k: np.zeros_like(v) for k, v in layer.params.items()} for layer in self.layers],
        )
        self._forward_done = False

    def __repr__(self) -> str:
        kinds = ' -> '.join(layer.kind for layer in self.layers)
        return f"ParamSet({kinds}; {self.n_params} params)"

    @property
    def input_shape(self) -> tuple[int, ...]:
        return self.layers[0].input_shape

    @property
    def output_shape(self) -> tuple[int, ...]:
        return self.layers[-1].output_shape

    @property
    def n_params(self) -> int:
        return sum(value.size for layer in self.layers for value in layer.params.values())

    def parameters(self) -> Iterator[tuple[int, str, np.ndarray]]:
        for index, layer in enumerate(self.layers):
            for name, value in layer.params.items():
                yield index, name, value

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != self.input_shape:
            raise ContractViolation(f"input shape {x.shape[1:]} does not match network input {self.input_shape}")
        for layer in self.layers:
            x = layer.forward(x)
        self._forward_done = True
        return x

    def backward(self, loss_grad: np.ndarray) -> Gradients:
        if not self._forward_done:
            raise ContractViolation("backward called before forward")
        grad = np.asarray(loss_grad, dtype=np.float64)
        blocks: list[dict[str, np.ndarray]] = [{} for _ in self.layers]
        for index in range(len(self.layers) - 1, -1, -1):
            grad, blocks[index] = self.layers[index].backward(grad)
        return Gradients(blocks, input_grad=grad)

    def zero_gradients(self) -> Gradients:
        return Gradients([{k: np.zeros_like(v) for k, v in layer.params.items()} for layer in self.layers])

    def snapshot(self) -> 'ParamSet':
        """Independent copy of the parameters with fresh (unused) optimizer state."""
        clone = ParamSet([copy.deepcopy(layer) for layer in self.layers])
        for layer in clone.layers:
            layer._cache = None
        return clone

    def assert_finite(self) -> None:
        for index, name, value in self.parameters():
            if not np.all(np.isfinite(value)):
                raise ContractViolation(f"non-finite values in layer {index} {name}")


def forward(params: ParamSet, x: np.ndarray) -> np.ndarray:
    return params.forward(x)


def backward(params: ParamSet, loss_grad: np.ndarray) -> Gradients:
    return params.backward(loss_grad)
