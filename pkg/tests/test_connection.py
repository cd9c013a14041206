import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lfslab import connection as C
from lfslab import structure as S
from oracles import flrw_symbols

# Frozen from a run of the chern routine (non-Berwald quartic, c0=0, c1=1, c2=0,
# x=(0.1, 0.2, -0.1), directions (1, 0, 0) and (1, 0.3, 0)).
NONBERWALD_CHERN_SPREAD = 0.03331697628145942


class TestMinkowski:
    @pytest.mark.parametrize("dim", [2, 3, 4])
    def test_all_symbols_vanish(self, dim, rng):
        m = S.make_model("minkowski", dim=dim)
        x = S.sample_points(m, rng, 20)
        v = S.sample_timelike(m, rng, x)
        cd = C.connection_at(m, x, v)
        assert np.abs(cd.gamma).max() <= 1e-10
        assert np.abs(cd.chern).max() <= 1e-10
        assert np.abs(cd.spray).max() <= 1e-10


class TestFLRWAgainstSymbolicOracle:
    """Christoffel symbols of the FLRW-like metric computed by sympy."""

    @pytest.mark.parametrize("dim, H", [(2, 1.0), (3, 1.0), (3, 0.5), (4, 2.0)])
    def test_gamma_and_chern(self, dim, H, rng):
        m = S.make_model("flrw", dim=dim, H=H)
        gam, _ = flrw_symbols(dim, H)
        x = S.sample_points(m, rng, 10, radius=0.5)
        v = S.sample_timelike(m, rng, x)
        cd = C.connection_at(m, x, v)
        for k in range(len(x)):
            expected = gam(x[k])
            scale = max(1.0, np.abs(expected).max())
            assert np.abs(cd.gamma[k] - expected).max() <= 1e-10 * scale
            assert np.abs(cd.chern[k] - expected).max() <= 1e-10 * scale

    def test_closed_form_entries(self):
        H = 1.0
        m = S.make_model("flrw", dim=3, H=H)
        x = np.array([0.3, 0.1, -0.2])
        cd = C.connection_at(m, x, np.array([1.0, 0.1, 0.0]))
        assert cd.gamma[0, 1, 1] == pytest.approx(H * np.exp(2 * H * 0.3), rel=1e-12)
        assert cd.gamma[1, 0, 1] == pytest.approx(H, rel=1e-12)
        assert cd.gamma[1, 1, 0] == pytest.approx(H, rel=1e-12)

    def test_spray_is_half_gamma_vv(self, rng):
        m = S.make_model("flrw", dim=3)
        gam, _ = flrw_symbols(3, 1.0)
        x = np.array([0.2, 0.0, 0.1])
        v = np.array([1.0, 0.2, -0.1])
        np.testing.assert_allclose(C.spray(m, x, v), 0.5 * np.einsum("abc,b,c->a", gam(x), v, v), rtol=1e-12)


class TestChernIdentities:
    """Identities every Chern connection satisfies, on non-Lorentzian models."""

    @pytest.mark.parametrize("name", ["flat-quartic", "nonberwald-quartic", "product-berwald"])
    def test_contractions(self, name, rng):
        m = S.make_model(name)
        x = S.sample_points(m, rng, 8, radius=0.5)
        v = S.sample_timelike(m, rng, x)
        cd = C.connection_at(m, x, v)
        scale = np.abs(cd.chern).max() + 1.0
        np.testing.assert_allclose(np.einsum("...abc,...b,...c->...a", cd.chern, v, v), 2 * cd.spray, atol=1e-11 * scale)
        np.testing.assert_allclose(np.einsum("...abc,...c->...ab", cd.chern, v), cd.nonlinear, atol=1e-11 * scale)
        np.testing.assert_allclose(cd.chern, np.swapaxes(cd.chern, -1, -2), atol=1e-12 * scale)

    def test_nonlinear_connection_matches_finite_differences(self):
        m = S.make_model("nonberwald-quartic")
        x = np.array([0.1, -0.2, 0.05])
        v = np.array([1.0, 0.25, -0.1])
        N = C.connection_at(m, x, v).nonlinear
        h = 1e-6
        fd = np.stack([(C.spray(m, x, v + h * e) - C.spray(m, x, v - h * e)) / (2 * h) for e in np.eye(3)], axis=-1)
        np.testing.assert_allclose(N, fd, atol=1e-7)

    def test_nonberwald_regression(self):
        m = S.make_model("nonberwald-quartic", c0=0.0, c1=1.0, c2=0.0)
        x = np.array([0.1, 0.2, -0.1])
        spread = np.abs(C.chern(m, x, np.array([1.0, 0.0, 0.0])) - C.chern(m, x, np.array([1.0, 0.3, 0.0]))).max()
        assert spread == pytest.approx(NONBERWALD_CHERN_SPREAD, rel=1e-10)


class TestBerwaldAudit:
    @pytest.mark.parametrize("name", S.list_models())
    def test_classification_matches_claim(self, name):
        m = S.make_model(name)
        rep = C.berwald_audit(m)
        assert rep.data["berwald"] == m.berwald
        assert rep.passed

    def test_expected_claims(self):
        assert C.is_berwald(S.make_model("flat-quartic"))
        assert C.is_berwald(S.make_model("flrw"))
        assert not C.is_berwald(S.make_model("nonberwald-quartic"))


class TestCovariantDerivative:
    def test_constant_field_on_flrw(self):
        H = 1.0
        m = S.make_model("flrw", H=H)
        x = np.array([0.2, 0.0, 0.0])
        w = np.array([1.0, 0.0, 0.0])
        field = lambda xs: [1.0 + 0 * xs[0], 0 * xs[0] + 1.0, 0 * xs[0]]
        # D_v V = dV(v) + gamma(v, V) = gamma^a_{b d} v^b V^d with V = (1, 1, 0)
        v = np.array([0.0, 1.0, 0.0])
        out = C.covariant_derivative(m, x, field, v, w)
        expected = np.array([H * np.exp(2 * H * 0.2), H, 0.0])
        np.testing.assert_allclose(out, expected, rtol=1e-12)


@given(s=st.floats(-0.6, 0.6), t=st.floats(-0.6, 0.6), c=st.floats(0.1, 10.0))
def test_spray_is_two_homogeneous(s, t, c):
    m = S.make_model("nonberwald-quartic")
    x = np.array([0.1, 0.0, -0.1])
    v = np.array([1.0, s * m.sample_speed, t * m.sample_speed])
    if not m.in_cone(x, v):
        return
    np.testing.assert_allclose(C.spray(m, x, c * v), c * c * C.spray(m, x, v), rtol=1e-11, atol=1e-13)
