"""Reference system and controller fixtures.

The shipped `double_integrator_policy.json` is a [5, 5] ReLU network generated
by `random_clipped_policy(seed=POLICY_SEED)`: random Gaussian layers whose
output layer is rescaled, using certified output intervals over the operating
region, so that every control it can emit lies strictly inside the control
limits. It is a stand-in controller for qualitative experiments, not a trained
policy.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from ..dynamics import LtiSystem
from ..geometry import HyperRect
from ..network import FeedforwardNetwork, IDENTITY, Layer, RELU, load_network
from ..relaxation import output_interval

POLICY_SEED = 39
POLICY_HIDDEN = (5, 5)
POLICY_GAIN = 2.0
POLICY_MARGIN = 0.02


def double_integrator(
    x_limit: float = 10.0, u_limit: float = 1.0, dt: float = 1.0
) -> LtiSystem:
    """Discrete double integrator with documented operating region and control limits."""
    return LtiSystem(
        A=np.array([[1.0, dt], [0.0, 1.0]]),
        B=np.array([0.5 * dt * dt, dt]),
        X=HyperRect([-x_limit, -x_limit], [x_limit, x_limit]),
        U=HyperRect([-u_limit], [u_limit]),
        dt=dt,
    )


def zero_policy(n_x: int = 2, n_u: int = 1) -> FeedforwardNetwork:
    """Always outputs zero control; its affine relaxation is exact."""
    return FeedforwardNetwork((Layer(np.zeros((n_u, n_x)), np.zeros(n_u), IDENTITY),))


def affine_policy(gain, bias=None) -> FeedforwardNetwork:
    """Exact linear state feedback u = K x + b as a single-layer network."""
    K = np.atleast_2d(np.asarray(gain, dtype=float))
    b = np.zeros(K.shape[0]) if bias is None else np.asarray(bias, dtype=float)
    return FeedforwardNetwork((Layer(K, b, IDENTITY),))


def random_clipped_policy(
    seed: int,
    hidden: tuple[int, ...] = POLICY_HIDDEN,
    system: LtiSystem | None = None,
    gain: float = POLICY_GAIN,
    margin: float = POLICY_MARGIN,
) -> FeedforwardNetwork:
    """Seeded random ReLU policy whose outputs always lie inside the control limits.

    The last layer is rescaled so the certified output interval over the
    operating region maps into the control box shrunk by `margin` on each side,
    which makes every closed-loop trajectory admissible by construction.
    """
    sys = system if system is not None else double_integrator()
    rng = np.random.default_rng(seed)
    widths = (sys.n_x, *hidden, sys.n_u)
    layers = []
    for i in range(len(widths) - 1):
        fan_in, fan_out = widths[i], widths[i + 1]
        w = rng.normal(0.0, gain / np.sqrt(fan_in), size=(fan_out, fan_in))
        b = rng.normal(0.0, 0.1, size=fan_out)
        act = RELU if i < len(widths) - 2 else IDENTITY
        layers.append(Layer(w, b, act))
    net = FeedforwardNetwork(tuple(layers))

    lo, hi = output_interval(net, sys.X)
    u_lo = sys.U.lower + margin * sys.U.widths
    u_hi = sys.U.upper - margin * sys.U.widths
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    scale = (u_hi - u_lo) / span
    shift = 0.5 * (u_lo + u_hi) - scale * 0.5 * (lo + hi)
    last = net.layers[-1]
    rescaled = Layer(scale[:, None] * last.weights, scale * last.bias + shift, IDENTITY)
    return FeedforwardNetwork((*net.layers[:-1], rescaled))


def double_integrator_policy() -> FeedforwardNetwork:
    """The committed [5, 5] ReLU fixture controller."""
    ref = resources.files(__package__) / "double_integrator_policy.json"
    with resources.as_file(ref) as path:
        return load_network(path)
