"""Random networks for tests, benchmarks and sweeps."""

from __future__ import annotations

import numpy as np

from .model import ActivationKind, Layer, Network


def random_network(widths, activation="relu", alpha=0.0, seed=0, bias_scale=0.1) -> Network:
    """Gaussian weights scaled by ``1/sqrt(fan_in)``; ``widths`` runs from input to output."""
    rng = np.random.default_rng(seed)
    if isinstance(activation, str):
        if activation in ("leaky_relu", "elu"):
            activation = ActivationKind(activation, alpha)
        else:
            activation = ActivationKind(activation)
    layers = []
    for i, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:])):
        w = rng.standard_normal((n_out, n_in)) * np.sqrt(2.0 / n_in)
        b = rng.standard_normal(n_out) * bias_scale
        last = i == len(widths) - 2
        layers.append(Layer(w, b, None if last else activation))
    return Network(layers)
