import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lfslab import structure as S
from lfslab.errors import ConfigurationError, DomainError, ModelValidityError

MODELS = S.list_models()


class TestRegistry:
    def test_builtin_names(self):
        assert set(MODELS) >= {"minkowski", "weighted-minkowski", "flrw", "flat-quartic", "nonberwald-quartic", "product-berwald"}

    def test_unknown_model(self):
        with pytest.raises(ConfigurationError):
            S.make_model("anti-de-sitter")

    @pytest.mark.parametrize("dim", [1, 0])
    def test_dimension_must_allow_a_spatial_direction(self, dim):
        with pytest.raises(ConfigurationError):
            S.make_model("minkowski", dim=dim)

    def test_unknown_weight(self):
        with pytest.raises(ConfigurationError):
            S.apply_weight(S.make_model("minkowski"), "gaussian")

    @pytest.mark.parametrize("name", MODELS)
    def test_describe_lists_formula(self, name):
        text = S.make_model(name).describe()
        assert "L =" in text or "L(" in text


class TestMinkowskiClosedForms:
    """Minkowski quantities have elementary closed forms."""

    m = S.make_model("minkowski", dim=3)

    def test_fundamental_tensor_is_eta(self):
        g = S.fundamental_tensor(self.m, np.zeros(3), np.array([1.0, 0.2, -0.3]))
        np.testing.assert_allclose(g, np.diag([-1.0, 1.0, 1.0]), atol=1e-15)

    def test_length(self):
        assert S.F(self.m, np.zeros(3), np.array([5.0, 3.0, 0.0])) == pytest.approx(4.0, rel=1e-15)

    @pytest.mark.parametrize(
        "v, kind, orientation",
        [
            ([1.0, 0.0, 0.0], "timelike", "future"),
            ([-2.0, 0.5, 0.0], "timelike", "past"),
            ([1.0, 1.0, 0.0], "lightlike", "future"),
            ([0.0, 1.0, 0.0], "spacelike", "none"),
            ([0.0, 0.0, 0.0], "zero", "none"),
        ],
    )
    def test_classify(self, v, kind, orientation):
        c = S.classify(self.m, np.zeros(3), np.array(v))
        assert (c.kind, c.orientation) == (kind, orientation)

    def test_length_of_spacelike_vector_raises(self):
        with pytest.raises(DomainError):
            S.F(self.m, np.zeros(3), np.array([0.1, 1.0, 0.0]))

    def test_null_band(self):
        c = S.classify(self.m, np.zeros(3), np.array([1.0, 1.0 - 1e-12, 0.0]))
        assert c.kind == "lightlike" and c.in_band


class TestConeModels:
    def test_outside_cone_raises_domain_error(self):
        m = S.make_model("flat-quartic")
        with pytest.raises(DomainError):
            S.fundamental_tensor(m, np.zeros(3), np.array([0.0, 1.0, 0.0]))

    def test_signature_failure_carries_eigenvalues(self):
        bad = S.make_model("flat-quartic", eps=-50.0)
        rng = np.random.default_rng(1)
        x = np.zeros((200, 3))
        v = S.sample_domain(bad, rng, x)
        with pytest.raises(ModelValidityError) as info:
            S.fundamental_tensor(bad, x, v)
        assert info.value.eigenvalues is not None and len(info.value.eigenvalues) > 0


class TestReverseModel:
    @pytest.mark.parametrize("name", ["flat-quartic", "nonberwald-quartic"])
    def test_reverse_flips_velocity(self, name):
        m = S.make_model(name)
        r = S.reverse_model(m)
        x = np.array([0.1, 0.05, -0.1])
        v = np.array([1.0, 0.3, 0.2])
        assert r.L(x, -v) == pytest.approx(m.L(x, v), rel=1e-15)
        np.testing.assert_allclose(r.X(x), -m.X(x))


class TestAudit:
    @pytest.mark.parametrize("name", MODELS)
    def test_builtin_models_pass(self, name):
        rep = S.audit_model(S.make_model(name), sample_budget=500)
        assert rep.passed, rep.to_text()

    def test_broken_homogeneity_is_caught(self):
        m = S.make_model("minkowski")
        import dataclasses
        bad = dataclasses.replace(m, lagrangian=lambda xs, vs: m.lagrangian(xs, vs) + 1e-3 * vs[1] ** 3 / (1 + vs[0] ** 2))
        rep = S.audit_model(bad, sample_budget=200)
        assert not rep.check("homogeneity_L").passed


class TestWeights:
    def test_time_linear(self):
        m = S.apply_weight(S.make_model("minkowski"), "time-linear", a=-0.5)
        assert m.Psi(np.array([2.0, 1.0, 1.0])) == pytest.approx(-1.0)
        psi, d1, d2 = S.weight_derivatives(m, np.array([2.0, 1.0, 1.0]))
        np.testing.assert_allclose(d1, [-0.5, 0.0, 0.0])
        np.testing.assert_allclose(d2, np.zeros((3, 3)), atol=1e-15)


@given(
    x=st.lists(st.floats(-0.5, 0.5), min_size=3, max_size=3),
    s=st.floats(-0.8, 0.8),
    c=st.floats(0.05, 20.0),
)
@pytest.mark.parametrize("name", ["flrw", "flat-quartic", "nonberwald-quartic", "product-berwald"])
def test_zero_homogeneity_of_g(name, x, s, c):
    m = S.make_model(name)
    x = np.array(x)
    v = np.array([1.0, s * m.sample_speed, 0.0])
    g1 = S.fundamental_tensor_unchecked(m, x, v)
    g2 = S.fundamental_tensor_unchecked(m, x, c * v)
    np.testing.assert_allclose(g2, g1, rtol=1e-12, atol=1e-12 * np.abs(g1).max())
