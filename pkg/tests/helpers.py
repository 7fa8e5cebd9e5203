"""Shared helpers for the test modules."""

import numpy as np

from jacobound import Layer, Network, RELU, forward
from jacobound.oracle import sample_ball


def tiny_relu():
    """{W1 = I, relu; W2 = [[1, 1]]}"""
    return Network([Layer(np.eye(2), np.zeros(2), RELU), Layer([[1.0, 1.0]], [0.0])])


def partial_jacobians(net, xs):
    """Chain-rule ``d f / d h_t`` for t = 0..H-1 at each sample (list indexed by t)."""
    from jacobound.actbounds import derivative_at

    _, pre = forward(net, xs)
    ws = net.weights
    Y = np.broadcast_to(ws[-1], xs.shape[:-1] + ws[-1].shape)
    out = [None] * net.depth
    out[-1] = np.array(Y)
    for t in range(net.depth - 2, -1, -1):
        d = derivative_at(net.layers[t].activation, pre[t])
        Y = (Y * d[..., None, :]) @ ws[t]
        out[t] = np.array(Y)
    return out


def samples_in(ball, n=1000, seed=0):
    return np.vstack([ball.center[None, :], sample_ball(ball, n - 1, np.random.default_rng(seed))])


# (number, PASS/FAIL, detail) rows from the acceptance suite, echoed by conftest at session end
ACCEPTANCE = []
