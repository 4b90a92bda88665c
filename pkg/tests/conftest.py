import pytest

import bpreach as bp
from bpreach import fixtures


@pytest.fixture(scope="session")
def double_int():
    return fixtures.double_integrator()


@pytest.fixture(scope="session")
def zero_net():
    return fixtures.zero_policy()


@pytest.fixture(scope="session")
def affine_net():
    # mild velocity feedback: keeps the 5-step chain control-feasible and inside X
    return fixtures.affine_policy([[0.0, -0.2]])


@pytest.fixture(scope="session")
def fixture_net():
    return fixtures.double_integrator_policy()


@pytest.fixture(scope="session")
def target_box():
    return bp.HyperRect([4.0, -0.25], [5.0, 0.25])


def random_relu_net(rng, max_hidden_layers=2, max_width=8, n_in=None, n_out=None):
    """Small random ReLU network for fuzzing."""
    n_in = int(rng.integers(1, 5)) if n_in is None else n_in
    n_out = int(rng.integers(1, 4)) if n_out is None else n_out
    widths = [n_in]
    for _ in range(int(rng.integers(0, max_hidden_layers + 1))):
        widths.append(int(rng.integers(1, max_width + 1)))
    widths.append(n_out)
    layers = []
    for i in range(len(widths) - 1):
        act = bp.network.RELU if i < len(widths) - 2 else bp.network.IDENTITY
        w = rng.normal(size=(widths[i + 1], widths[i]))
        b = 0.3 * rng.normal(size=widths[i + 1])
        layers.append(bp.Layer(w, b, act))
    return bp.FeedforwardNetwork(tuple(layers))


def random_box(rng, dim, low=-2.0, span=2.0):
    lo = rng.uniform(low, low + span, dim)
    hi = lo + rng.uniform(0.2, span, dim)
    return bp.HyperRect(lo, hi)
