import math

import numpy as np
import pytest

from lfslab import congruence as Cg
from lfslab import structure as S
from lfslab.errors import DomainError, ParameterError

INF = math.inf
T_GRID = np.linspace(0.1, 5.0, 25)


def axis_state(m, t_max=5.2):
    x = np.zeros(m.dim)
    v = Cg.unit_timelike(m, x, m.X(x))
    return Cg.evolve_lagrange(m, x, v, (0.0, t_max))


class TestFrames:
    @pytest.mark.parametrize("name", ["flat-quartic", "flrw", "nonberwald-quartic"])
    def test_orthonormal(self, name):
        m = S.make_model(name)
        x = np.array([0.1, 0.0, 0.05])
        u = Cg.unit_timelike(m, x, np.array([1.0, 0.2, 0.0]))
        E = Cg.orthonormal_frame(m, x, u)
        g = S.fundamental_tensor(m, x, u)
        np.testing.assert_allclose(E.T @ g @ E, np.eye(m.n), atol=1e-12)
        np.testing.assert_allclose(E.T @ g @ u, 0.0, atol=1e-12)

    def test_unit_speed_required(self):
        m = S.make_model("minkowski")
        with pytest.raises(DomainError):
            Cg.evolve_lagrange(m, np.zeros(3), np.array([2.0, 0.0, 0.0]), (0.0, 1.0))


class TestLagrangeTensorClosedForms:
    @pytest.mark.parametrize("dim", [2, 3, 4])
    def test_minkowski_expansion(self, dim):
        m = S.make_model("minkowski", dim=dim)
        st = axis_state(m)
        np.testing.assert_allclose(st.theta(T_GRID), (dim - 1) / T_GRID, rtol=1e-9)

    @pytest.mark.parametrize("H", [0.5, 1.0])
    def test_flrw_shape_operator(self, H):
        """Spatial sectional curvature -H^2 along the axis gives B = H coth(H t)."""
        m = S.make_model("flrw", H=H)
        st = axis_state(m)
        B = st.B(T_GRID)
        expected = H / np.tanh(H * T_GRID)
        for k, t in enumerate(T_GRID):
            np.testing.assert_allclose(B[k], expected[k] * np.eye(2), rtol=1e-8, atol=1e-10)

    def test_riccati_and_frame(self):
        st = axis_state(S.make_model("flrw"))
        assert np.max(st.riccati_residual(T_GRID)) <= 1e-6
        assert st.frame_defect(T_GRID) <= 1e-9


RAYCHAUDHURI_CASES = [
    (name, N_kind, eps)
    for name in ("minkowski", "weighted-minkowski", "flrw")
    for N_kind in ("n", "2n", "inf", "-1")
    for eps in (0.0, 0.5, 1.0)
]


def resolve_N(kind, n):
    return {"n": n, "2n": 2 * n, "inf": INF, "-1": -1.0}[kind]


class TestRaychaudhuri:
    @pytest.mark.parametrize("name, N_kind, eps", RAYCHAUDHURI_CASES)
    def test_identity_or_rejection(self, name, N_kind, eps):
        m = S.make_model(name)
        N = resolve_N(N_kind, m.n)
        st = axis_state(m)
        if not Cg.epsilon_admissible(N, eps, m.n).admissible:
            with pytest.raises(ParameterError):
                Cg.raychaudhuri_residual(m, st, N, eps, T_GRID)
            return
        res = Cg.raychaudhuri_residual(m, st, N, eps, T_GRID)
        assert res.max_residual <= 1e-6

    def test_N_equal_n_with_weight_uses_limit(self):
        m = S.make_model("weighted-minkowski")
        res = Cg.raychaudhuri_residual(m, axis_state(m), m.n, 0.0, T_GRID)
        assert res.skipped and res.limit_residual is not None
        assert np.all(np.isnan(res.residual))

    def test_N_zero_rejected(self):
        m = S.make_model("minkowski")
        with pytest.raises(ParameterError):
            Cg.raychaudhuri_residual(m, axis_state(m), 0.0, 0.0, T_GRID)

    def test_weighted_minkowski_terms(self):
        """On the axis: theta_eps = e^k (n/t - a/n * n) with k = 2 (1 - eps) a t / n."""
        a, n, eps = -0.5, 2, 0.5
        m = S.make_model("weighted-minkowski", a=a)
        wq = Cg.weighted_quantities(m, axis_state(m), 2 * n, eps, T_GRID)
        k = 2 * (1 - eps) * a * T_GRID / n
        np.testing.assert_allclose(wq.theta_eps, np.exp(k) * (n / T_GRID - a), rtol=1e-9)
        np.testing.assert_allclose(wq.phi, (np.exp(-k) - 1) / (-2 * (1 - eps) * a / n), rtol=1e-12)


class TestHessianMonotonicity:
    @pytest.mark.parametrize("name", ["minkowski", "flrw"])
    def test_non_increasing(self, name):
        m = S.make_model(name)
        rep = Cg.hessian_monotonicity(m, np.zeros(3), np.array([1.0, 0.0, 0.0]), s_values=(0.5, 1.0, 2.0))
        assert rep.passed

    def test_minkowski_forms_are_one_over_s(self):
        m = S.make_model("minkowski")
        rep = Cg.hessian_monotonicity(m, np.zeros(3), np.array([1.0, 0.0, 0.0]), s_values=(1.0, 2.0, 4.0), w_count=3)
        forms = rep.data["forms"]
        np.testing.assert_allclose(forms[0] / forms[1], 2.0, rtol=1e-8)


class TestCompletenessProbe:
    def test_weighted_minkowski_closed_form(self):
        a, eps, T = -0.5, 0.5, 10.0
        m = S.make_model("weighted-minkowski", a=a)
        t, phi, monotone, exceeded = Cg.epsilon_completeness_probe(m, np.zeros(3), np.array([1.0, 0, 0]), eps, T=T)
        rate = 2 * (eps - 1) * a / m.n
        np.testing.assert_allclose(phi, np.expm1(rate * t) / rate, rtol=1e-12)
        assert monotone and exceeded


class TestWeightedDefinitions:
    def test_trace_free_shear_and_symmetry(self):
        m = S.make_model("flrw")
        st = axis_state(m)
        wq = Cg.weighted_quantities(m, st, INF, 0.5, T_GRID)
        assert np.abs(np.trace(wq.sigma_eps, axis1=1, axis2=2)).max() <= 1e-12
        Bm = st.B(T_GRID)
        assert np.abs(Bm - np.swapaxes(Bm, 1, 2)).max() <= 1e-8

    def test_unweighted_eps_one(self):
        m = S.make_model("minkowski")
        st = axis_state(m)
        wq = Cg.weighted_quantities(m, st, m.n, 1.0, T_GRID)
        np.testing.assert_allclose(wq.B_eps, st.B(T_GRID), atol=1e-15)
        np.testing.assert_allclose(wq.phi, T_GRID, rtol=1e-14)

    def test_trace_matches_distance_laplacian(self):
        """tr B(t) at the point (t, 0, 0) equals the Laplacian of the distance from the vertex."""
        from lfslab import legendre as Lg
        from test_legendre import lorentz_distance

        m = S.make_model("minkowski")
        st = axis_state(m)
        for t in (0.5, 1.0, 3.0):
            assert st.theta(np.array([t]))[0] == pytest.approx(Lg.laplacian(m, lorentz_distance, np.array([t, 0.0, 0.0])), rel=1e-7)
