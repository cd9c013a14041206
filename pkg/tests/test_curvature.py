import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lfslab import curvature as K
from lfslab import structure as S
from lfslab.errors import ParameterError
from oracles import flrw_symbols

INF = math.inf


def range_oracle(N, eps, n):
    """Admissibility written out directly from the definition of the range."""
    if N == 0:
        return eps == 0
    if N == n:
        return True
    if N == INF:
        return abs(eps) < 1
    return eps * eps < N / (N - n)


class TestEpsilonRange:
    @pytest.mark.parametrize("n", [1, 2, 3])
    @pytest.mark.parametrize("N_factor", [0, 1, 2, INF])
    @pytest.mark.parametrize("eps", [0.0, 0.5, -0.5, 1.0, -1.0, 1.5, -1.5])
    def test_table(self, n, N_factor, eps):
        N = INF if N_factor == INF else N_factor * n
        assert K.epsilon_admissible(N, eps, n).admissible == range_oracle(N, eps, n)

    @pytest.mark.parametrize("n", [1, 2, 5])
    def test_c_at_origin(self, n):
        assert K.epsilon_admissible(0, 0, n).c == pytest.approx(1 / n, rel=1e-15)

    def test_epsilon_one_needs_N_at_least_n(self):
        n = 3
        assert K.epsilon_admissible(n, 1.0, n).admissible
        assert K.epsilon_admissible(2 * n, 1.0, n).admissible
        assert not K.epsilon_admissible(INF, 1.0, n).admissible
        assert not K.epsilon_admissible(0, 1.0, n).admissible
        assert not K.epsilon_admissible(-1, 1.0, n).admissible

    @pytest.mark.parametrize("N", [0.5, 1.5, float("nan"), -INF])
    def test_forbidden_N(self, N):
        with pytest.raises(ParameterError):
            K.epsilon_admissible(N, 0.0, 2)

    def test_require_raises_for_inadmissible(self):
        with pytest.raises(ParameterError):
            K.epsilon_admissible(INF, 1.5, 2).require()

    @given(N=st.floats(-50, -0.01) | st.floats(2.0, 50.0), eps=st.floats(-3, 3))
    def test_c_formula_and_positivity(self, N, eps):
        n = 2
        r = K.epsilon_admissible(N, eps, n)
        if r.admissible:
            assert r.c == pytest.approx((1 - eps * eps * (N - n) / N) / n, rel=1e-12)
            assert r.c > 0


class TestFLRWCurvature:
    @pytest.mark.parametrize("dim, H", [(2, 1.0), (3, 1.0), (4, 0.7)])
    def test_ricci_matches_sympy(self, dim, H, rng):
        m = S.make_model("flrw", dim=dim, H=H)
        _, ric = flrw_symbols(dim, H)
        x = S.sample_points(m, rng, 6, radius=0.4)
        v = S.sample_timelike(m, rng, x)
        got = K.ricci(m, x, v)
        for k in range(len(x)):
            expected = v[k] @ ric(x[k]) @ v[k]
            assert got[k] == pytest.approx(expected, rel=1e-10, abs=1e-10)

    def test_axis_direction(self):
        H = 1.3
        m = S.make_model("flrw", dim=4, H=H)
        assert K.ricci(m, np.zeros(4), np.array([1.0, 0, 0, 0])) == pytest.approx(-3 * H * H, rel=1e-12)


class TestCurvatureIdentities:
    @pytest.mark.parametrize("name", ["flat-quartic", "nonberwald-quartic", "product-berwald", "flrw"])
    def test_R_annihilates_v(self, name, rng):
        m = S.make_model(name)
        x = S.sample_points(m, rng, 5, radius=0.5)
        v = S.sample_timelike(m, rng, x)
        R = K.curvature_endomorphism(m, x, v)
        scale = np.abs(R).max() + 1.0
        assert np.abs(np.einsum("...ab,...b->...a", R, v)).max() <= 1e-10 * scale

    @pytest.mark.parametrize("name", ["minkowski", "flat-quartic"])
    def test_flat_models(self, name, rng):
        m = S.make_model(name)
        x = S.sample_points(m, rng, 5)
        v = S.sample_timelike(m, rng, x)
        assert np.abs(K.ricci(m, x, v)).max() <= 1e-12


class TestWeightedRicci:
    a = -0.5
    m = S.make_model("weighted-minkowski", a=-0.5)
    x = np.array([0.3, 0.1, 0.0])
    v = np.array([1.0, 0.0, 0.0])

    @pytest.mark.parametrize("N", [4.0, 10.0, -1.0, -5.0])
    def test_finite_N(self, N):
        expected = -self.a ** 2 / (N - self.m.n)
        assert K.weighted_ricci(self.m, self.x, self.v, N) == pytest.approx(expected, rel=1e-12)

    def test_infinite_N(self):
        assert K.weighted_ricci(self.m, self.x, self.v, INF) == pytest.approx(0.0, abs=1e-14)

    def test_N_equal_n_needs_limit_flag(self):
        with pytest.raises(ParameterError):
            K.weighted_ricci(self.m, self.x, self.v, 2)
        assert K.weighted_ricci(self.m, self.x, self.v, 2, n_limit=True) == -INF

    def test_weight_along_uses_geodesic_equation(self):
        m = S.apply_weight(S.make_model("flrw"), "time-linear", a=0.0)
        m = m.with_weight(lambda xs: xs[1] * xs[1], "Psi = (x^1)^2")
        x = np.array([0.2, 0.1, 0.0])
        v = np.array([1.0, 0.3, 0.0])
        psi, d1, d2 = K.weight_along(m, x, v)
        # ddot x^1 = -2 H v^0 v^1 on FLRW with H = 1
        acc = -2.0 * v[0] * v[1]
        assert psi == pytest.approx(0.01)
        assert d1 == pytest.approx(2 * x[1] * v[1])
        assert d2 == pytest.approx(2 * v[1] ** 2 + 2 * x[1] * acc, rel=1e-12)
