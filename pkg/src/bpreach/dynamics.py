"""Discrete-time LTI plant, closed-loop composition with a policy, and rollouts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError
from .geometry import HyperRect
from .network import FeedforwardNetwork, evaluate, evaluate_batch


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """x' = A x + B u + c with operating region X and control limits U.

    X and U must be bounded boxes; this keeps every reachability LP bounded.
    """

    A: np.ndarray
    B: np.ndarray
    X: HyperRect
    U: HyperRect
    c: np.ndarray | None = None
    dt: float = 1.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)  # flat vector means a single-input column
        c = np.zeros(A.shape[0]) if self.c is None else np.atleast_1d(np.asarray(self.c, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatchError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise DimensionMismatchError(f"B has {B.shape[0]} rows, A has {A.shape[0]}")
        if c.shape != (A.shape[0],):
            raise DimensionMismatchError(f"c has shape {c.shape}, expected ({A.shape[0]},)")
        if not (np.isfinite(A).all() and np.isfinite(B).all() and np.isfinite(c).all()):
            raise ValueError("A, B, c must be finite")
        if self.X.dim != A.shape[0]:
            raise DimensionMismatchError("operating region X must match the state dimension")
        if self.U.dim != B.shape[1]:
            raise DimensionMismatchError("control set U must match the input dimension")
        for arr in (A, B, c):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "c", c)

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]


def step(sys: LtiSystem, x, u) -> np.ndarray:
    """One open-loop step A x + B u + c."""
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if x.shape != (sys.n_x,) or u.shape != (sys.n_u,):
        raise DimensionMismatchError(
            f"state {x.shape} / control {u.shape} do not match ({sys.n_x},)/({sys.n_u},)"
        )
    return sys.A @ x + sys.B @ u + sys.c


def closed_loop_step(sys: LtiSystem, net: FeedforwardNetwork, x) -> np.ndarray:
    """One closed-loop step with the policy in the loop."""
    return step(sys, x, evaluate(net, np.asarray(x, dtype=float)))


def rollout(sys: LtiSystem, net: FeedforwardNetwork, x0, n: int) -> np.ndarray:
    """Closed-loop trajectory [x0, p(x0), ..., p^n(x0)], shape (n + 1, n_x)."""
    if n < 0:
        raise ValueError("rollout length must be nonnegative")
    out = np.empty((n + 1, sys.n_x))
    out[0] = np.asarray(x0, dtype=float)
    for k in range(n):
        out[k + 1] = closed_loop_step(sys, net, out[k])
    return out


def rollout_batch(sys: LtiSystem, net: FeedforwardNetwork, x0s, n: int) -> np.ndarray:
    """Vectorized rollouts over rows of x0s, shape (n + 1, m, n_x)."""
    if n < 0:
        raise ValueError("rollout length must be nonnegative")
    xs = np.asarray(x0s, dtype=float)
    out = np.empty((n + 1, xs.shape[0], sys.n_x))
    out[0] = xs
    for k in range(n):
        us = evaluate_batch(net, out[k])
        out[k + 1] = out[k] @ sys.A.T + us @ sys.B.T + sys.c
    return out
