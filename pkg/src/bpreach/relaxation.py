"""Certified affine envelopes of policy networks over boxes.

The main entry point is `crown_bounds`, which backward-propagates linear
coefficients from the output layer to the input, replacing each ReLU with a
line pair chosen by coefficient sign. Pre-activation intervals for the line
pairs are obtained by running the same backward pass on each truncated
subnetwork (one pass per layer), so `interval_propagate` only serves as a
coarse cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError
from .geometry import HyperRect
from .network import FeedforwardNetwork, RELU


@dataclass(frozen=True, eq=False)
class AffineBounds:
    """Affine sandwich on the network output over `domain`.

    For every x in domain: Phi x + beta <= pi(x) <= Psi x + alpha componentwise.
    """

    Psi: np.ndarray
    alpha: np.ndarray
    Phi: np.ndarray
    beta: np.ndarray
    domain: HyperRect

    def upper_at(self, x) -> np.ndarray:
        return self.Psi @ np.asarray(x, dtype=float) + self.alpha

    def lower_at(self, x) -> np.ndarray:
        return self.Phi @ np.asarray(x, dtype=float) + self.beta

    def concretize(self) -> tuple[np.ndarray, np.ndarray]:
        """Extreme values of the affine envelopes over the domain box."""
        lo, hi = self.domain.lower, self.domain.upper
        upper = np.clip(self.Psi, 0, None) @ hi + np.clip(self.Psi, None, 0) @ lo + self.alpha
        lower = np.clip(self.Phi, 0, None) @ lo + np.clip(self.Phi, None, 0) @ hi + self.beta
        return lower, upper


@dataclass(frozen=True, eq=False)
class PreActBounds:
    """Per-layer intervals on pre-activation values."""

    lower: tuple[np.ndarray, ...]
    upper: tuple[np.ndarray, ...]


def _check_domain(net: FeedforwardNetwork, domain: HyperRect) -> None:
    if domain.dim != net.input_dim:
        raise DimensionMismatchError(
            f"domain dimension {domain.dim} does not match network input {net.input_dim}"
        )


def interval_propagate(net: FeedforwardNetwork, domain: HyperRect) -> PreActBounds:
    """Interval arithmetic through every layer (positive/negative weight split)."""
    _check_domain(net, domain)
    lo, hi = domain.lower, domain.upper
    lowers, uppers = [], []
    for layer in net.layers:
        w_pos = np.clip(layer.weights, 0, None)
        w_neg = np.clip(layer.weights, None, 0)
        z_lo = w_pos @ lo + w_neg @ hi + layer.bias
        z_hi = w_pos @ hi + w_neg @ lo + layer.bias
        lowers.append(z_lo)
        uppers.append(z_hi)
        if layer.activation == RELU:
            lo, hi = np.maximum(z_lo, 0.0), np.maximum(z_hi, 0.0)
        else:
            lo, hi = z_lo, z_hi
    return PreActBounds(tuple(lowers), tuple(uppers))


def relu_relaxation(l: float, u: float) -> tuple[float, float, float, float]:
    """Line pair bounding ReLU on [l, u]: (upper_slope, upper_intercept, lower_slope, lower_intercept).

    Unstable neurons get the chord as upper line and a zero-intercept lower
    line with slope 1 if u >= |l| else 0 (area-minimizing, ties to 1).
    """
    if l > u:
        raise ValueError(f"need l <= u, got l={l}, u={u}")
    if l >= 0.0:
        return 1.0, 0.0, 1.0, 0.0
    if u <= 0.0:
        return 0.0, 0.0, 0.0, 0.0
    s_up = u / (u - l)
    return s_up, -l * s_up, 1.0 if u >= -l else 0.0, 0.0


def _relu_lines(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, ...]:
    """Vectorized `relu_relaxation` over pre-activation intervals."""
    active = lo >= 0.0
    inactive = hi <= 0.0
    unstable = ~(active | inactive)
    denom = np.where(unstable, hi - lo, 1.0)
    us = np.where(active, 1.0, np.where(unstable, hi / denom, 0.0))
    ui = np.where(unstable, -lo * hi / denom, 0.0)
    ls = np.where(active, 1.0, np.where(unstable & (hi >= -lo), 1.0, 0.0))
    li = np.zeros_like(lo)
    return us, ui, ls, li


def _backward_affine(layers, lines) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Affine bounds on the pre-activation of layers[-1] in terms of the input.

    `lines[j]` holds the activation line pair of layers[j] (None for identity);
    only indices below len(layers) - 1 are consulted.
    """
    last = layers[-1]
    c_up, d_up = last.weights.copy(), last.bias.copy()
    c_lo, d_lo = last.weights.copy(), last.bias.copy()
    for j in range(len(layers) - 2, -1, -1):
        pair = lines[j]
        if pair is not None:
            us, ui, ls, li = pair
            take_up = c_up >= 0
            d_up = d_up + np.sum(c_up * np.where(take_up, ui, li), axis=1)
            c_up = c_up * np.where(take_up, us, ls)
            take_lo = c_lo >= 0
            d_lo = d_lo + np.sum(c_lo * np.where(take_lo, li, ui), axis=1)
            c_lo = c_lo * np.where(take_lo, ls, us)
        d_up = d_up + c_up @ layers[j].bias
        c_up = c_up @ layers[j].weights
        d_lo = d_lo + c_lo @ layers[j].bias
        c_lo = c_lo @ layers[j].weights
    return c_up, d_up, c_lo, d_lo


def crown_bounds(net: FeedforwardNetwork, domain: HyperRect) -> AffineBounds:
    """Affine sandwich on the network output, valid over the whole domain box."""
    _check_domain(net, domain)
    lo, hi = domain.lower, domain.upper
    lines: list = []
    Psi = alpha = Phi = beta = None
    for k, layer in enumerate(net.layers):
        Psi, alpha, Phi, beta = _backward_affine(net.layers[: k + 1], lines)
        if k == len(net.layers) - 1:
            break
        if layer.activation == RELU:
            z_hi = np.clip(Psi, 0, None) @ hi + np.clip(Psi, None, 0) @ lo + alpha
            z_lo = np.clip(Phi, 0, None) @ lo + np.clip(Phi, None, 0) @ hi + beta
            lines.append(_relu_lines(z_lo, z_hi))
        else:
            lines.append(None)
    return AffineBounds(Psi, alpha, Phi, beta, domain)


def output_interval(net: FeedforwardNetwork, domain: HyperRect) -> tuple[np.ndarray, np.ndarray]:
    """Concrete output interval: tightest of the affine concretization and interval arithmetic."""
    c_lo, c_hi = crown_bounds(net, domain).concretize()
    ibp = interval_propagate(net, domain)
    return np.maximum(c_lo, ibp.lower[-1]), np.minimum(c_hi, ibp.upper[-1])
