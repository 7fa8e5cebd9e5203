import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jacobound import ActivationKind, derivative_at, derivative_range, derivative_ranges, global_range

KINDS = [
    ActivationKind("relu"),
    ActivationKind("leaky_relu", 0.3),
    ActivationKind("sigmoid"),
    ActivationKind("tanh"),
    ActivationKind("arctan"),
    ActivationKind("elu", 0.7),
]


def test_derivative_hand_values():
    assert derivative_at(ActivationKind("sigmoid"), 0.0) == pytest.approx(0.25)
    assert derivative_at(ActivationKind("leaky_relu", 0.3), -1.0) == pytest.approx(0.3)
    assert derivative_at(ActivationKind("tanh"), 1.0) == pytest.approx(0.4199743, abs=1e-7)
    assert derivative_at(ActivationKind("arctan"), 2.0) == pytest.approx(0.2)
    assert derivative_at(ActivationKind("elu", 0.5), -1.0) == pytest.approx(0.5 * math.exp(-1.0))


def sig_prime(x):
    s = 1.0 / (1.0 + math.exp(-x))
    return s * (1.0 - s)


def test_sigmoid_straddling_range():
    g = derivative_range(ActivationKind("sigmoid"), -1.0, 2.0)
    assert g.lower == pytest.approx(sig_prime(2.0)) and g.lower == pytest.approx(0.1049936, abs=1e-7)
    assert g.upper == pytest.approx(0.25)


@pytest.mark.parametrize(
    "l, u, expected",
    [(-1.0, 2.0, (0.3, 1.0)), (1.0, 2.0, (1.0, 1.0)), (-2.0, -1.0, (0.3, 0.3))],
)
def test_leaky_relu_case_table(l, u, expected):
    g = derivative_range(ActivationKind("leaky_relu", 0.3), l, u)
    assert (g.lower, g.upper) == pytest.approx(expected)


def test_relu_straddling_range():
    g = derivative_range(ActivationKind("relu"), -1.0, 2.0)
    assert (g.lower, g.upper) == (0.0, 1.0)


def test_relu_interval_ending_at_kink_covers_right_derivative():
    g = derivative_range(ActivationKind("relu"), -1.0, 0.0)
    assert g.lower <= derivative_at(ActivationKind("relu"), 0.0) <= g.upper


def test_sigmoid_family_one_sided():
    tanh = ActivationKind("tanh")
    g = derivative_range(tanh, 0.5, 2.0)
    assert (g.lower, g.upper) == pytest.approx((1 - math.tanh(2.0) ** 2, 1 - math.tanh(0.5) ** 2))
    g = derivative_range(tanh, -2.0, -0.5)
    assert (g.lower, g.upper) == pytest.approx((1 - math.tanh(2.0) ** 2, 1 - math.tanh(0.5) ** 2))


def test_elu_uses_monotone_endpoints():
    elu = ActivationKind("elu", 1.0)
    g = derivative_range(elu, -2.0, -1.0)
    assert (g.lower, g.upper) == pytest.approx((math.exp(-2.0), math.exp(-1.0)))
    g = derivative_range(elu, -1.0, 3.0)
    assert (g.lower, g.upper) == pytest.approx((math.exp(-1.0), 1.0))


def test_errors():
    with pytest.raises(ValueError):
        derivative_range(ActivationKind("tanh"), 1.0, 0.0)
    with pytest.raises(ValueError):
        derivative_range(ActivationKind("tanh"), -np.inf, 0.0)


def test_global_ranges():
    g = global_range(ActivationKind("leaky_relu", 0.2))
    assert (g.lower, g.upper) == (0.2, 1.0)
    assert global_range(ActivationKind("sigmoid")).upper == 0.25
    assert global_range(ActivationKind("relu")).lower == 0.0


interval = st.tuples(
    st.floats(-8, 8, allow_nan=False), st.floats(0, 8, allow_nan=False)
).map(lambda t: (t[0], t[0] + t[1]))


@settings(max_examples=60, deadline=None)
@given(kind=st.sampled_from(KINDS), lu=interval, seed=st.integers(0, 2**31))
def test_range_contains_sampled_derivatives(kind, lu, seed):
    l, u = lu
    g = derivative_range(kind, l, u)
    assert 0.0 <= g.lower <= g.upper <= kind.derivative_sup
    xs = np.random.default_rng(seed).uniform(l, u, 10_000)
    xs = np.concatenate([xs, [l, u]])
    d = derivative_at(kind, xs)
    assert np.all(d >= g.lower - 1e-12) and np.all(d <= g.upper + 1e-12)


@settings(max_examples=60, deadline=None)
@given(kind=st.sampled_from(KINDS), x=st.floats(-6, 6, allow_nan=False))
def test_degenerate_interval_is_a_point(kind, x):
    g = derivative_range(kind, x, x)
    if kind.piecewise_linear and x == 0.0:
        assert g.lower <= derivative_at(kind, 0.0) <= g.upper
    else:
        assert g.lower == pytest.approx(g.upper) and g.lower == pytest.approx(float(derivative_at(kind, x)))


@settings(max_examples=80, deadline=None)
@given(kind=st.sampled_from(KINDS), inner=interval, pad=st.tuples(st.floats(0, 3), st.floats(0, 3)))
def test_range_monotone_under_containment(kind, inner, pad):
    l1, u1 = inner
    l2, u2 = l1 - pad[0], u1 + pad[1]
    a, b = derivative_range(kind, l1, u1), derivative_range(kind, l2, u2)
    assert b.lower <= a.lower and a.upper <= b.upper


def test_vectorised_matches_scalar(rng):
    l = rng.uniform(-3, 3, 50)
    u = l + rng.uniform(0, 3, 50)
    for kind in KINDS:
        lo, hi = derivative_ranges(kind, l, u)
        for i in range(50):
            g = derivative_range(kind, l[i], u[i])
            assert (lo[i], hi[i]) == (g.lower, g.upper)
