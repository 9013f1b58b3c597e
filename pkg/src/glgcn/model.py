"""Multi-layer graph convolution forward pass.

Each hidden layer computes relu(A_hat @ (input @ W)); the final layer
swaps relu for a row softmax. The forward returns a trace holding every
intermediate needed to backpropagate by hand, including dropout masks so
the backward pass replays them exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import CsrMatrix, glorot_init, matmul_dense, relu, softmax_rows, spmm

__all__ = ["ModelParams", "ForwardTrace", "gcn_forward", "predict"]


@dataclass
class ModelParams:
    """Ordered stack of weight matrices, input layer first.

    Biases are optional (default absent, matching the propagation rule).
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray] | None = None

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        for prev, nxt in zip(self.weights, self.weights[1:]):
            if prev.shape[1] != nxt.shape[0]:
                raise ValueError("adjacent weight shapes do not chain")
        if self.biases is not None:
            self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
            if len(self.biases) != len(self.weights) or any(
                b.shape != (w.shape[1],) for b, w in zip(self.biases, self.weights)
            ):
                raise ValueError("bias shapes do not match weight output widths")

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def arrays(self) -> list[np.ndarray]:
        """All trainable arrays, weights first; views, not copies."""
        return list(self.weights) + (list(self.biases) if self.biases is not None else [])

    @classmethod
    def init(cls, layer_dims: list[int], seed, use_bias: bool = False) -> "ModelParams":
        seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        children = seq.spawn(len(layer_dims) - 1)
        weights = [
            glorot_init(layer_dims[k], layer_dims[k + 1], children[k])
            for k in range(len(layer_dims) - 1)
        ]
        biases = [np.zeros(d) for d in layer_dims[1:]] if use_bias else None
        return cls(weights, biases)

    def copy(self) -> "ModelParams":
        return ModelParams(
            [w.copy() for w in self.weights],
            None if self.biases is None else [b.copy() for b in self.biases],
        )


@dataclass
class ForwardTrace:
    """Every intermediate of one forward pass, immutable by convention.

    inputs[k] is layer k's input after dropout, preacts[k] the propagated
    pre-activation, hiddens[k] the relu output of hidden layer k, and
    dropout_masks[k] the scaled keep mask (None when dropout was off).
    probs holds the final row-softmax output.
    """

    inputs: list[np.ndarray]
    preacts: list[np.ndarray]
    relu_masks: list[np.ndarray]
    hiddens: list[np.ndarray]
    dropout_masks: list
    probs: np.ndarray

    @property
    def logits(self) -> np.ndarray:
        return self.preacts[-1]

    @property
    def num_layers(self) -> int:
        return len(self.preacts)


def gcn_forward(
    a_hat: CsrMatrix,
    x: np.ndarray,
    params: ModelParams,
    dropout_rate: float = 0.0,
    rng=None,
) -> ForwardTrace:
    """Run the layer stack on the whole graph.

    Dropout is applied to every layer's input, but only when an rng is
    supplied and the rate is positive; without an rng the pass is a
    deterministic function of its inputs.
    """
    x = np.asarray(x, dtype=np.float64)
    if a_hat.dim != x.shape[0]:
        raise ValueError("propagation matrix does not match node count")
    if x.shape[1] != params.weights[0].shape[0]:
        raise ValueError("feature width does not match first weight matrix")
    if not 0.0 <= dropout_rate < 1.0:
        raise ValueError("dropout_rate must be in [0, 1)")
    apply_dropout = rng is not None and dropout_rate > 0.0
    keep = 1.0 - dropout_rate

    inputs, preacts, relu_masks, hiddens, dropout_masks = [], [], [], [], []
    current = x
    for k, w in enumerate(params.weights):
        if apply_dropout:
            mask = (rng.random(current.shape) < keep) / keep
            layer_in = current * mask
        else:
            mask = None
            layer_in = current
        dropout_masks.append(mask)
        inputs.append(layer_in)
        pre = spmm(a_hat, matmul_dense(layer_in, w))
        if params.biases is not None:
            pre = pre + params.biases[k]
        preacts.append(pre)
        if k < len(params.weights) - 1:
            current, pos = relu(pre)
            relu_masks.append(pos)
            hiddens.append(current)
    probs = softmax_rows(preacts[-1])
    return ForwardTrace(inputs, preacts, relu_masks, hiddens, dropout_masks, probs)


def predict(z: np.ndarray) -> np.ndarray:
    """Row argmax; ties resolve to the lowest class id."""
    return np.argmax(np.asarray(z), axis=1)
