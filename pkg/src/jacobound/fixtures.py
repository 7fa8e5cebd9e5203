"""Shipped fixture networks."""

from __future__ import annotations

from importlib import resources

import numpy as np

from .model import ActivationKind, Layer, Network, load_network


def fixture_path(name: str):
    return resources.files("jacobound") / "data" / name


def trained_fixture():
    """The small trained 4-class classifier and its ten labelled test inputs."""
    from .cli import read_inputs

    net = load_network(fixture_path("fixture_model.json"))
    return net, read_inputs(fixture_path("fixture_inputs.json"))


def sign_fixed_leaky(alpha: float = 0.1) -> Network:
    """Two-layer leaky-relu net whose first input column has a sign-fixed gradient everywhere.

    Every path from input 0 to the output has positive weight and every
    derivative is at least ``alpha`` > 0, so ``d f / d x_0 > 0`` on the whole domain.
    """
    act = ActivationKind("leaky_relu", alpha)
    w1 = np.array([[1.0, -2.0, 0.5], [0.5, 1.0, -1.0], [2.0, 0.3, 1.5]])
    w2 = np.array([[1.0, 0.7, 0.2]])
    return Network([Layer(w1, np.array([0.1, -0.2, 0.3]), act), Layer(w2, np.zeros(1), None)])
