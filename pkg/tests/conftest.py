"""Shared fixtures: the frozen arm model and small helper states."""

import numpy as np
import pytest

from derarm import fixtures
from derarm.geometry import build_state


@pytest.fixture(scope="session")
def params():
    return fixtures.default_params()


@pytest.fixture(scope="session")
def actuation():
    return fixtures.default_actuation()


@pytest.fixture
def straight_state(params):
    n = params.n_nodes
    x = params.rest_edge_length * np.arange(n)
    nodes = np.column_stack([x, np.zeros(n), np.zeros(n)])
    return build_state(nodes, np.zeros(n - 1))


def random_state(n_nodes, edge_length, rng, wobble=0.05, twist=0.2,
                 planar=False):
    """Perturbed chain for gradient and invariant tests."""
    x = edge_length * np.arange(n_nodes)
    nodes = np.column_stack([x, np.zeros(n_nodes), np.zeros(n_nodes)])
    nodes += rng.uniform(-wobble, wobble, nodes.shape) * edge_length
    if planar:
        nodes[:, 2] = 0.0
    twists = rng.uniform(-twist, twist, n_nodes - 1)
    return build_state(nodes, twists)
