"""Feedforward control policies (ReLU/identity layers) and their JSON weight files."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionChainError,
    DimensionMismatchError,
    EmptyNetworkError,
    NetworkFormatError,
    NonFiniteWeightError,
)

RELU = "relu"
IDENTITY = "identity"
_ACTIVATIONS = (RELU, IDENTITY)


@dataclass(frozen=True, eq=False)
class Layer:
    """One affine layer plus its componentwise activation."""

    weights: np.ndarray
    bias: np.ndarray
    activation: str

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.weights, dtype=float))
        b = np.atleast_1d(np.asarray(self.bias, dtype=float))
        if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.size:
            raise NetworkFormatError(
                f"weights {w.shape} and bias {b.shape} are inconsistent"
            )
        if self.activation not in _ACTIVATIONS:
            raise NetworkFormatError(f"unknown activation {self.activation!r}")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise NonFiniteWeightError("weights and biases must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True, eq=False)
class FeedforwardNetwork:
    """Fully connected policy network; the output layer is affine (identity activation)."""

    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise EmptyNetworkError("network needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if nxt.in_dim != prev.out_dim:
                raise DimensionChainError(
                    f"layer output {prev.out_dim} feeds layer input {nxt.in_dim}"
                )
        if layers[-1].activation != IDENTITY:
            raise NetworkFormatError("final layer activation must be identity")
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim


def evaluate(net: FeedforwardNetwork, x) -> np.ndarray:
    """Exact forward pass at a single state."""
    v = np.asarray(x, dtype=float)
    if v.shape != (net.input_dim,):
        raise DimensionMismatchError(
            f"input has shape {v.shape}, network expects ({net.input_dim},)"
        )
    for layer in net.layers:
        v = layer.weights @ v + layer.bias
        if layer.activation == RELU:
            v = np.maximum(v, 0.0)
    return v


def evaluate_batch(net: FeedforwardNetwork, xs) -> np.ndarray:
    """Forward pass over rows of `xs`, shape (m, input_dim) -> (m, output_dim)."""
    v = np.asarray(xs, dtype=float)
    if v.ndim != 2 or v.shape[1] != net.input_dim:
        raise DimensionMismatchError(
            f"batch has shape {v.shape}, network expects (m, {net.input_dim})"
        )
    for layer in net.layers:
        v = v @ layer.weights.T + layer.bias
        if layer.activation == RELU:
            v = np.maximum(v, 0.0)
    return v


def load_network(path) -> FeedforwardNetwork:
    """Read a network from its JSON weight file and validate all invariants."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise NetworkFormatError(f"cannot parse weight file {path}: {exc}") from exc
    if not isinstance(doc, dict) or "layers" not in doc:
        raise NetworkFormatError(f"weight file {path} lacks a 'layers' field")
    raw_layers = doc["layers"]
    if not isinstance(raw_layers, list) or not raw_layers:
        raise EmptyNetworkError(f"weight file {path} declares no layers")
    layers = []
    for i, entry in enumerate(raw_layers):
        try:
            layers.append(
                Layer(
                    weights=np.array(entry["weights"], dtype=float),
                    bias=np.array(entry["bias"], dtype=float),
                    activation=str(entry["activation"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, NetworkFormatError):
                raise
            raise NetworkFormatError(f"layer {i} in {path} is malformed: {exc}") from exc
    net = FeedforwardNetwork(tuple(layers))
    declared = doc.get("input_dim")
    if declared is not None and int(declared) != net.input_dim:
        raise DimensionChainError(
            f"declared input_dim {declared} does not match first layer ({net.input_dim})"
        )
    return net


def save_network(net: FeedforwardNetwork, path) -> None:
    """Write the JSON weight file; doubles round-trip bit-exactly through load."""
    doc = {
        "input_dim": net.input_dim,
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation,
            }
            for layer in net.layers
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
