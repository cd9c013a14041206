import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lfslab import ad_core as ad
from lfslab.errors import ConfigurationError

finite = st.floats(-2.0, 2.0, allow_nan=False)


def _partial(jet, **powers):
    key = {}
    for name, p in powers.items():
        key[(name[0], int(name[1:]))] = p
    return float(jet.partial(key))


class TestJetPartials:
    def test_mixed_second_order_of_product(self):
        jet = ad.lift(lambda xs, vs: vs[0] * vs[1], np.zeros(2), np.array([0.3, -0.7]), 2, 0)
        assert _partial(jet, v0=1, v1=1) == pytest.approx(1.0, abs=1e-15)
        assert _partial(jet, v0=2) == pytest.approx(0.0, abs=1e-15)

    def test_fourth_order(self):
        jet = ad.lift(lambda xs, vs: vs[0] ** 4, np.zeros(2), np.array([0.5, 0.0]), 4, 0)
        assert _partial(jet, v0=4) == pytest.approx(24.0, rel=1e-14)
        assert _partial(jet, v0=3) == pytest.approx(24.0 * 0.5, rel=1e-14)

    def test_mixed_x_v(self):
        jet = ad.lift(lambda xs, vs: xs[1] * vs[0] ** 2, np.array([0.0, 0.4]), np.array([1.3, 0.0]), 2, 1)
        assert _partial(jet, x1=1, v0=2) == pytest.approx(2.0, rel=1e-14)

    def test_cap_exceeded_raises(self):
        jet = ad.lift(lambda xs, vs: vs[0] ** 3, np.zeros(2), np.ones(2), 2, 0)
        with pytest.raises(ConfigurationError, match="order cap"):
            jet.partial({("v", 0): 3})

    @pytest.mark.parametrize("v_order, x_order", [(5, 0), (0, 3), (-1, 0)])
    def test_lift_rejects_orders_beyond_caps(self, v_order, x_order):
        with pytest.raises(ConfigurationError):
            ad.lift(lambda xs, vs: vs[0], np.zeros(2), np.ones(2), v_order, x_order)

    def test_batch_axes(self):
        v = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        jet = ad.lift(lambda xs, vs: vs[0] * vs[0] * vs[1], np.zeros_like(v), v, 2, 0)
        np.testing.assert_allclose(jet.partial({("v", 0): 1, ("v", 1): 1}), 2 * v[:, 0], rtol=1e-14)


class TestElementaryFunctions:
    """Derivatives of transcendental functions against closed forms."""

    @pytest.mark.parametrize(
        "fn, d1, d2",
        [
            (ad.exp, math.exp, math.exp),
            (ad.sin, math.cos, lambda t: -math.sin(t)),
            (ad.cos, lambda t: -math.sin(t), lambda t: -math.cos(t)),
            (ad.log, lambda t: 1 / t, lambda t: -1 / t**2),
            (ad.sqrt, lambda t: 0.5 / math.sqrt(t), lambda t: -0.25 * t**-1.5),
            (ad.reciprocal, lambda t: -1 / t**2, lambda t: 2 / t**3),
        ],
    )
    def test_first_and_second_derivative(self, fn, d1, d2):
        t0 = 0.7
        jet = ad.lift(lambda xs, vs: fn(xs[0]), np.array([t0]), np.array([1.0]), 0, 2)
        assert float(jet.partial({("x", 0): 1})) == pytest.approx(d1(t0), rel=1e-13)
        assert float(jet.partial({("x", 0): 2})) == pytest.approx(d2(t0), rel=1e-13)

    def test_plain_values_dispatch(self):
        assert ad.exp(0.0) == pytest.approx(1.0)
        np.testing.assert_allclose(ad.sqrt(np.array([4.0, 9.0])), [2.0, 3.0])


class TestMatrixOperations:
    def test_inverse_matches_numpy_and_derivative(self):
        space = ad.jet_space(1, 1, 0)
        t = space.variable("x", 0, 0.3)
        m = ad.stack([ad.stack([2.0 + t, t * t], axis=0), ad.stack([0.5 + 0 * t, 1.0 + 0 * t], axis=0)], axis=0)
        inv = ad.inverse(m)
        np.testing.assert_allclose(inv.value, np.linalg.inv(m.value), rtol=1e-13)
        h = 1e-6
        def num(tt):
            return np.linalg.inv(np.array([[2 + tt, tt * tt], [0.5, 1.0]]))
        fd = (num(0.3 + h) - num(0.3 - h)) / (2 * h)
        np.testing.assert_allclose(inv.partial({("x", 0): 1}), fd, rtol=1e-7)


@given(a=finite, b=finite, c=finite)
def test_product_rule_property(a, b, c):
    jet = ad.lift(lambda xs, vs: (xs[0] + 2 * vs[1]) * ad.sin(vs[0]), np.array([a, 0.0]), np.array([b, c]), 2, 0)
    expected = 2 * math.cos(b)
    assert float(jet.partial({("v", 0): 1, ("v", 1): 1})) == pytest.approx(expected, abs=1e-12)


@given(v0=st.floats(0.5, 2.0), v1=st.floats(-0.3, 0.3))
def test_fd_lift_agrees_with_jets(v0, v1):
    f = lambda xs, vs: -0.5 * vs[0] ** 2 + 0.5 * vs[1] ** 2 + 0.1 * vs[1] ** 4 / (vs[0] ** 2 - vs[1] ** 2)
    x = np.zeros(2)
    v = np.array([v0, v1])
    exact = ad.lift(f, x, v, 2, 0)
    approx = ad.lift_fd(f, x, v, 2, 0)
    for key in ({("v", 0): 2}, {("v", 0): 1, ("v", 1): 1}, {("v", 1): 2}):
        assert float(approx.partial(key)) == pytest.approx(float(exact.partial(key)), rel=1e-5, abs=1e-6)
