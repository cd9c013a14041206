"""Weighted Finsler spacetime models and their validity checks.

A model bundles a Lagrangian ``L(x, v)``, a weight ``Psi(x)``, and a
time-orientation field ``X(x)``. Model functions take coordinate component
sequences, so the same code evaluates on floats, batched arrays, and jets.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import ad_core as ad
from .errors import ConfigurationError, DomainError, ModelValidityError
from .report import ScenarioReport

TAU_NULL = 1e-9


# -- model container ------------------------------------------------------

@dataclass(frozen=True)
class SpacetimeModel:
    """A weighted Lorentz-Finsler structure on a coordinate chart.

    Parameters
    ----------
    name : str
        Registry name.
    dim : int
        Spacetime dimension ``n + 1``.
    lagrangian : callable
        ``L(xs, vs)`` on component sequences; positively 2-homogeneous in v.
    weight : callable
        ``Psi(xs)`` on component sequences.
    time_orientation : callable
        ``X(x)`` returning an array of shape ``x.shape``.
    cone : callable or None
        ``cone(x, v) -> bool array``; ``None`` means all of ``TM`` minus 0.
    reversible : bool
        Claimed symmetry ``L(-v) = L(v)``; audited by :func:`audit_model`.
    sample_speed : float
        Coordinate speed bound ``|v_spatial| < sample_speed * |v^0|`` used to
        propose timelike samples (rejection sampling checks the cone and L).
    convexity_radius : float
        Chart radius within which the distance solver treats connectors as
        maximizing.
    long_range : {"exact", "heuristic", None}
        Whether long-range distances along known geodesic families are
        trustworthy ("exact" on models whose connectors are straight lines).
    quadratic : bool
        True for Lorentzian models.
    affine_geodesics : bool
        True when L does not depend on x, so geodesics are straight lines
        and distances along them have the closed form ``F(y - x)``.
    berwald : bool
        Claimed Berwald property (audited by the connection module).
    formula, cone_text : str
        Human-readable descriptions.
    facts : tuple of str
        Known facts tagged ``[analytic]`` or ``[numerical]``.
    derivatives : {"jet", "fd"}
        How partial derivatives of L and Psi are obtained.
    """

    name: str
    dim: int
    lagrangian: Callable
    weight: Callable
    time_orientation: Callable
    cone: Optional[Callable] = None
    reversible: bool = True
    sample_speed: float = 0.9
    convexity_radius: float = 1.0
    long_range: Optional[str] = None
    quadratic: bool = False
    affine_geodesics: bool = False
    berwald: bool = True
    formula: str = ""
    cone_text: str = "all of TM minus the zero section"
    weight_text: str = "Psi = 0"
    facts: tuple = ()
    params: dict = field(default_factory=dict)
    derivatives: str = "jet"

    @property
    def n(self):
        """Spatial dimension."""
        return self.dim - 1

    def L(self, x, v):
        return self.lagrangian(ad.components(x), ad.components(v))

    def Psi(self, x):
        x = np.asarray(x, dtype=float)
        out = self.weight(ad.components(x))
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape[:-1]).copy()

    def X(self, x):
        return np.asarray(self.time_orientation(np.asarray(x, dtype=float)), dtype=float)

    def in_cone(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        nonzero = np.any(v != 0, axis=-1)
        if self.cone is None:
            return nonzero
        return nonzero & np.asarray(self.cone(x, v), dtype=bool)

    def with_weight(self, weight, text):
        return dataclasses.replace(self, weight=weight, weight_text=text)

    def describe(self):
        lines = [
            f"model: {self.name}",
            f"dim: {self.dim}",
            f"L: {self.formula}",
            f"weight: {self.weight_text}",
            f"cone: {self.cone_text}",
            f"reversible: {self.reversible}",
            f"berwald: {self.berwald}",
            f"convexity_radius: {self.convexity_radius}",
        ]
        if self.params:
            lines.append("params: " + ", ".join(f"{k}={v}" for k, v in sorted(self.params.items())))
        lines.extend(f"fact: {f}" for f in self.facts)
        return "\n".join(lines)


def lagrangian_jet(m: SpacetimeModel, x, v, v_order, x_order):
    """Jet of L at (x, v) using the model's derivative mode."""
    if m.derivatives == "fd":
        return ad.lift_fd(m.lagrangian, x, v, v_order, x_order)
    return ad.lift(m.lagrangian, x, v, v_order, x_order)


def weight_jet(m: SpacetimeModel, x, x_order=2):
    """Jet of Psi at x (v slots unused)."""
    x = np.asarray(x, dtype=float)
    f = lambda xs, vs: m.weight(xs) + 0.0 * xs[0]
    if m.derivatives == "fd":
        return ad.lift_fd(f, x, np.ones_like(x), 0, x_order)
    return ad.lift(f, x, np.ones_like(x), 0, x_order)


def weight_derivatives(m: SpacetimeModel, x):
    """``(Psi, dPsi, ddPsi)`` at x; shapes (...), (..., dim), (..., dim, dim)."""
    jet = weight_jet(m, x, 2)
    dim = m.dim
    d1 = np.stack([jet.partial({("x", a): 1}) for a in range(dim)], axis=-1)
    d2 = np.empty(jet.shape + (dim, dim))
    for a in range(dim):
        for b in range(dim):
            key = {("x", a): 1, ("x", b): 1} if a != b else {("x", a): 2}
            d2[..., a, b] = jet.partial(key)
    return jet.value, d1, d2


def reverse_model(m: SpacetimeModel) -> SpacetimeModel:
    """Reverse structure ``L~(v) = L(-v)`` with orientation ``-X``."""
    if m.reversible:
        lag = m.lagrangian
    else:
        lag = lambda xs, vs: m.lagrangian(xs, [-c for c in vs])
    cone = None if m.cone is None else (lambda x, v: m.cone(x, -np.asarray(v)))
    return dataclasses.replace(
        m,
        name=m.name + "~reversed",
        lagrangian=lag,
        time_orientation=lambda x: -m.time_orientation(x),
        cone=cone,
    )


# -- evaluation -----------------------------------------------------------

def _require_cone(m, x, v):
    ok = m.in_cone(x, v)
    if not np.all(ok):
        raise DomainError(f"vector outside the domain cone of {m.name}: {m.cone_text}")


def eval_L(m: SpacetimeModel, x, v):
    """L(x, v); raises DomainError outside the domain cone."""
    _require_cone(m, x, v)
    return np.asarray(m.L(x, v), dtype=float)


def _tensor_from_jet(jet, dim):
    g = np.empty(jet.shape + (dim, dim))
    for a in range(dim):
        for b in range(a, dim):
            key = {("v", a): 1, ("v", b): 1} if a != b else {("v", a): 2}
            g[..., a, b] = g[..., b, a] = jet.partial(key)
    return g


def fundamental_tensor_unchecked(m: SpacetimeModel, x, v):
    jet = lagrangian_jet(m, x, v, 2, 0)
    return _tensor_from_jet(jet, m.dim)


def signature_ok(g):
    """True where g has exactly one negative and n positive eigenvalues."""
    eig = np.linalg.eigvalsh(g)
    scale = np.max(np.abs(eig), axis=-1, keepdims=True)
    tiny = 1e-12 * scale
    return (eig[..., 0] < -tiny[..., 0]) & np.all(eig[..., 1:] > tiny, axis=-1), eig


def fundamental_tensor(m: SpacetimeModel, x, v):
    """g_v = vertical Hessian of L; shape (..., dim, dim).

    Raises
    ------
    ModelValidityError
        If the signature is not (-, +, ..., +); the eigenvalues are attached.
    """
    _require_cone(m, x, v)
    g = fundamental_tensor_unchecked(m, x, v)
    ok, eig = signature_ok(g)
    if not np.all(ok):
        bad = eig[~ok] if eig.ndim > 1 else eig
        raise ModelValidityError(f"g_v is not Lorentzian for {m.name}", eigenvalues=bad)
    return g


def F(m: SpacetimeModel, x, v):
    """Lorentz-Finsler length ``sqrt(-2L)`` of a causal vector."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    zero = ~np.any(v != 0, axis=-1)
    if np.all(zero):
        return np.zeros(v.shape[:-1])
    Lv = np.where(zero, 0.0, eval_L(m, x, np.where(zero[..., None], m.X(x), v)))
    band = TAU_NULL * np.sum(v * v, axis=-1)
    if np.any(Lv > band):
        raise DomainError("F is defined on causal vectors only; got a spacelike vector")
    return np.sqrt(np.maximum(-2.0 * Lv, 0.0))


@dataclass(frozen=True)
class CausalClass:
    """Causal character and time orientation of a vector.

    ``kind`` is one of timelike, lightlike, spacelike, zero; ``orientation``
    is future, past or none. ``in_band`` marks values inside the null band.
    """

    kind: str
    orientation: str
    L: float
    in_band: bool = False


def classify(m: SpacetimeModel, x, v, tau_null=TAU_NULL) -> CausalClass:
    """Classify a single vector; |L| <= tau_null |v|^2 counts as lightlike."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if not np.any(v != 0):
        return CausalClass("zero", "none", 0.0)
    Lv = float(eval_L(m, x, v))
    band = tau_null * float(v @ v)
    if abs(Lv) <= band:
        kind = "lightlike"
    elif Lv < 0:
        kind = "timelike"
    else:
        return CausalClass("spacelike", "none", Lv)
    w = m.X(x)
    gw = fundamental_tensor_unchecked(m, x, w)
    proxy = float(w @ gw @ v)
    orientation = "future" if proxy < 0 else "past"
    return CausalClass(kind, orientation, Lv, in_band=abs(Lv) <= band and Lv != 0.0)


# -- sampling -------------------------------------------------------------

def sample_points(m: SpacetimeModel, rng, count, radius=None):
    """Uniform points in the box ``[-r, r]^dim`` with r the convexity radius."""
    r = m.convexity_radius if radius is None else radius
    return rng.uniform(-r, r, size=(count, m.dim))


def _cone_proposals(m, rng, k, speed):
    v0 = rng.uniform(0.5, 2.0, size=k)
    direction = rng.normal(size=(k, m.dim - 1))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radial = rng.uniform(0.0, 1.0, size=k) ** (1.0 / (m.dim - 1))
    return np.concatenate([v0[:, None], (speed * radial * v0)[:, None] * direction], axis=1)


def sample_timelike(m: SpacetimeModel, rng, x, future=True, speed=None):
    """One future (or past) timelike vector at each point of ``x``.

    Rejection sampling inside the coordinate cone of half-angle
    ``speed`` (defaults to the model's ``sample_speed``).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    speed = m.sample_speed if speed is None else speed
    out = np.empty_like(x)
    todo = np.arange(x.shape[0])
    for _ in range(200):
        if len(todo) == 0:
            break
        v = _cone_proposals(m, rng, len(todo), speed) * (1.0 if future else -1.0)
        xs = x[todo]
        ok = m.in_cone(xs, v)
        ok[ok] &= m.L(xs[ok], v[ok]) < 0
        w = m.X(xs[ok])
        gw = fundamental_tensor_unchecked(m, xs[ok], w)
        proxy = np.einsum("...a,...ab,...b->...", w, gw, v[ok])
        ok[ok] &= (proxy < 0) if future else (proxy > 0)
        out[todo[ok]] = v[ok]
        todo = todo[~ok]
    if len(todo):
        raise DomainError(f"could not sample timelike vectors for {m.name}")
    return out


def sample_domain(m: SpacetimeModel, rng, x):
    """Vectors in the domain cone of either orientation and any causal type.

    Models defined on all of TM get Gaussian vectors; cone models get
    vectors spread over the whole declared double cone.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if m.cone is None:
        return rng.normal(size=x.shape)
    out = np.empty_like(x)
    todo = np.arange(x.shape[0])
    for _ in range(200):
        if len(todo) == 0:
            break
        sign = np.where(rng.uniform(size=len(todo)) < 0.5, -1.0, 1.0)[:, None]
        v = _cone_proposals(m, rng, len(todo), 1.2 * m.sample_speed / 0.9) * sign
        ok = m.in_cone(x[todo], v)
        out[todo[ok]] = v[ok]
        todo = todo[~ok]
    if len(todo):
        raise DomainError(f"could not sample the domain cone of {m.name}")
    return out


# -- audit ----------------------------------------------------------------

def audit_model(m: SpacetimeModel, sample_budget=1000, seed=0, tol=1e-12) -> ScenarioReport:
    """Sample (x, v) pairs and check the defining properties of L.

    Reports worst relative residuals of 2-homogeneity, the Euler identities
    ``g_v v = dL/dv`` and ``g_v(v, v) = 2L``, 0-homogeneity of g, the count of
    signature failures, ``L(X) < 0``, and the reversibility claim.
    """
    rng = np.random.default_rng(seed)
    rep = ScenarioReport(name=f"audit:{m.name}", config={"model": m.name, "budget": sample_budget, "seed": seed})
    x = sample_points(m, rng, sample_budget)
    v = sample_domain(m, rng, x)
    c = rng.uniform(0.1, 10.0, size=sample_budget)

    jet = lagrangian_jet(m, x, v, 2, 0)
    Lv = jet.value
    dL = np.stack([jet.partial({("v", a): 1}) for a in range(m.dim)], axis=-1)
    g = _tensor_from_jet(jet, m.dim)
    gnorm = np.max(np.abs(g), axis=(-1, -2))
    vv = np.sum(v * v, axis=-1)
    scale = gnorm * vv

    Lc = m.L(x, c[:, None] * v)
    hom = np.max(np.abs(Lc - c ** 2 * Lv) / (c ** 2 * scale))
    euler1 = np.max(np.linalg.norm(np.einsum("...ab,...b->...a", g, v) - dL, axis=-1) / (gnorm * np.sqrt(vv)))
    euler2 = np.max(np.abs(np.einsum("...a,...ab,...b->...", v, g, v) - 2 * Lv) / scale)
    gc = fundamental_tensor_unchecked(m, x, c[:, None] * v)
    hom0 = np.max(np.abs(gc - g).reshape(sample_budget, -1).max(axis=1) / gnorm)
    ok, eig = signature_ok(g)
    failures = int(np.sum(~ok))

    X = m.X(x)
    LX = m.L(x, X)
    rep.add("homogeneity_L", hom, tol)
    rep.add("euler_gradient", euler1, tol)
    rep.add("euler_quadratic", euler2, tol)
    rep.add("homogeneity_g", hom0, tol)
    rep.add("signature_failures", failures, 0, note="count of samples with wrong signature")
    rep.add("orientation_timelike", float(np.max(LX)), 0.0, note="max L(X) must be negative")
    if rep.check("orientation_timelike").residual >= 0:
        rep.check("orientation_timelike").passed = False
    if m.reversible:
        vr = -v
        inside = m.in_cone(x, vr)
        rev = np.max(np.abs(m.L(x[inside], vr[inside]) - Lv[inside]) / scale[inside]) if inside.any() else np.inf
        rep.add("reversibility", rev, tol)
    rep.data["min_eigenvalue_ratio"] = float(np.min(eig[:, 1] / np.abs(eig[:, 0])))
    if failures:
        rep.notes.append(f"{failures} of {sample_budget} samples violate the signature")
    return rep.finish()


# -- built-in models ------------------------------------------------------

def _mink_L(xs, vs):
    return 0.5 * (-vs[0] * vs[0] + sum(c * c for c in vs[1:]))


def _mink_F2(vs):
    return vs[0] * vs[0] - sum(c * c for c in vs[1:])


def _zero_weight(xs):
    return 0.0 * xs[0]


def _axis_X(x):
    out = np.zeros_like(x)
    out[..., 0] = 1.0
    return out


def _spatial_cone(kappa, axes=None):
    def cone(x, v):
        v = np.asarray(v, dtype=float)
        sp = v[..., 1:] if axes is None else v[..., list(axes)]
        return np.sqrt(np.sum(sp * sp, axis=-1)) < kappa * np.abs(v[..., 0])
    return cone


def _check_dim(dim):
    if not isinstance(dim, (int, np.integer)) or dim < 2:
        raise ConfigurationError(f"dim must be an integer >= 2, got {dim!r}")
    return int(dim)


def minkowski(dim=3):
    dim = _check_dim(dim)
    return SpacetimeModel(
        name="minkowski",
        dim=dim,
        lagrangian=_mink_L,
        weight=_zero_weight,
        time_orientation=_axis_X,
        sample_speed=0.9,
        convexity_radius=1.0,
        long_range="exact",
        quadratic=True,
        affine_geodesics=True,
        formula="L = (1/2)(-(v^0)^2 + sum_i (v^i)^2)",
        facts=(
            "g = diag(-1, 1, ..., 1) [analytic]",
            "Γ = 0 and R = 0 [analytic]",
            "timelike straight lines are rays and lines [analytic]",
        ),
    )


def weighted_minkowski(dim=3, a=-0.5):
    m = minkowski(dim)
    a = float(a)
    return dataclasses.replace(
        m,
        name="weighted-minkowski",
        weight=lambda xs: a * xs[0],
        weight_text=f"Psi = a x^0 with a = {a}",
        params={"a": a},
        facts=m.facts + ("Ric_N(d_0) = -a^2/(N-n) for finite N != n [analytic]",),
    )


def flrw(dim=3, H=1.0):
    dim = _check_dim(dim)
    H = float(H)

    def lag(xs, vs):
        s2 = ad.exp(2.0 * H * xs[0])
        return 0.5 * (-vs[0] * vs[0] + s2 * sum(c * c for c in vs[1:]))

    def cone(x, v):
        return np.ones(np.broadcast_shapes(np.shape(x)[:-1], np.shape(v)[:-1]), dtype=bool)

    return SpacetimeModel(
        name="flrw",
        dim=dim,
        lagrangian=lag,
        weight=_zero_weight,
        time_orientation=_axis_X,
        sample_speed=0.9 * np.exp(-H),
        convexity_radius=1.0,
        long_range=None,
        quadratic=True,
        formula="L = (1/2)(-(v^0)^2 + exp(2 H x^0) sum_i (v^i)^2)",
        params={"H": H},
        facts=(
            "γ^0_ii = H exp(2 H x^0), γ^i_0i = H [analytic]",
            "R(d_0) = -H^2 on spatial directions, Ric(d_0) = -n H^2 [analytic]",
        ),
    )


def _quartic_cone_text(kappa, axes="spatial"):
    return f"double cone |v_{axes}| < {kappa} |v^0| (Euclidean norm of spatial components)"


def flat_quartic(dim=3, eps=0.1, kappa=0.8):
    dim = _check_dim(dim)
    eps = float(eps)
    kappa = float(kappa)

    def lag(xs, vs):
        return _mink_L(xs, vs) + eps * vs[1] ** 4 / (2.0 * _mink_F2(vs))

    return SpacetimeModel(
        name="flat-quartic",
        dim=dim,
        lagrangian=lag,
        weight=_zero_weight,
        time_orientation=_axis_X,
        cone=_spatial_cone(kappa),
        sample_speed=0.9 * kappa,
        convexity_radius=1.0,
        long_range="exact",
        affine_geodesics=True,
        formula="L = L_Mink + eps (v^1)^4 / (2 F_Mink(v)^2)",
        cone_text=_quartic_cone_text(kappa),
        params={"eps": eps, "kappa": kappa},
        facts=(
            "x-independent, so Γ = 0, R = 0 and geodesics are straight lines [analytic]",
            "g_v = diag(-1, 1, ..., 1) on the axis v = d_0 [analytic]",
            f"signature verified on the declared cone for eps = {eps} by eigenvalue scan [numerical]",
        ),
    )


def nonberwald_quartic(dim=3, eps=0.1, c0=1.0, c1=0.0, c2=0.5):
    dim = _check_dim(dim)
    eps, c0, c1, c2 = float(eps), float(c0), float(c1), float(c2)
    kappa = 0.8

    def b(xs):
        return c0 + c1 * xs[1] + c2 * xs[0] / ad.sqrt(1.0 + xs[0] * xs[0])

    def lag(xs, vs):
        return _mink_L(xs, vs) + eps * b(xs) * vs[1] ** 4 / (2.0 * _mink_F2(vs))

    return SpacetimeModel(
        name="nonberwald-quartic",
        dim=dim,
        lagrangian=lag,
        weight=_zero_weight,
        time_orientation=_axis_X,
        cone=_spatial_cone(kappa),
        sample_speed=0.9 * kappa,
        convexity_radius=0.5,
        long_range="heuristic",
        berwald=False,
        formula="L = L_Mink + eps b(x) (v^1)^4 / (2 F_Mink(v)^2), b = c0 + c1 x^1 + c2 x^0 / sqrt(1 + (x^0)^2)",
        cone_text=_quartic_cone_text(kappa),
        params={"eps": eps, "c0": c0, "c1": c1, "c2": c2, "kappa": kappa},
        facts=(
            "spray vanishes on directions with v^1 = 0, so those lines are geodesics [analytic]",
            "Chern connection depends on v away from v^1 = 0 (not Berwald) [numerical]",
            "b varies along d_0 near x^0 = 0, so translations along the axis lines are not isometries [analytic]",
        ),
    )


def product_berwald(dim=3, eps=0.1, kappa=0.8, warp=0.3):
    dim = _check_dim(dim)
    eps, kappa, warp = float(eps), float(kappa), float(warp)

    def lag(xs, vs):
        f2 = vs[0] * vs[0] - vs[1] * vs[1]
        block = 0.5 * (-f2) + eps * vs[1] ** 4 / (2.0 * f2)
        fibre = 0.0
        if dim > 2:
            fibre = 0.5 * vs[2] * vs[2]
        if dim > 3:
            h = ad.exp(2.0 * warp * xs[2])
            fibre = fibre + 0.5 * h * sum(c * c for c in vs[3:])
        return block + fibre

    return SpacetimeModel(
        name="product-berwald",
        dim=dim,
        lagrangian=lag,
        weight=_zero_weight,
        time_orientation=_axis_X,
        cone=_spatial_cone(kappa, axes=(1,)),
        sample_speed=0.9 * kappa,
        convexity_radius=0.5,
        long_range="heuristic",
        affine_geodesics=dim <= 3,
        formula=(
            "L = L_quartic(v^0, v^1) + (1/2)(v^2)^2 + (1/2) exp(2 w x^2) sum_{i>=3} (v^i)^2, "
            "L_quartic = -(1/2)F2 + eps (v^1)^4/(2 F2), F2 = (v^0)^2 - (v^1)^2"
        ),
        cone_text=f"cone |v^1| < {kappa} |v^0|",
        params={"eps": eps, "kappa": kappa, "warp": warp},
        facts=(
            "spray is quadratic in v, so the model is Berwald [analytic]",
            "d_0 lines are timelike lines with Ric(d_0) = 0 [analytic]",
        ),
    )


REGISTRY = {
    "minkowski": minkowski,
    "weighted-minkowski": weighted_minkowski,
    "flrw": flrw,
    "flat-quartic": flat_quartic,
    "nonberwald-quartic": nonberwald_quartic,
    "product-berwald": product_berwald,
}


def list_models():
    return sorted(REGISTRY)


def make_model(name, dim=3, **params) -> SpacetimeModel:
    """Build a registered model; unknown names or parameters raise ConfigurationError."""
    if name not in REGISTRY:
        raise ConfigurationError(f"unknown model {name!r}; known: {', '.join(list_models())}")
    factory = REGISTRY[name]
    try:
        return factory(dim=dim, **params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for model {name!r}: {exc}") from None


# -- weights --------------------------------------------------------------

def linear_weight(coeffs):
    """Psi(x) = sum_a coeffs[a] x^a."""
    coeffs = [float(c) for c in coeffs]

    def weight(xs):
        out = 0.0 * xs[0]
        for c, comp in zip(coeffs, xs):
            if c:
                out = out + c * comp
        return out

    return weight


def fibre_weight(amplitude=0.3):
    """Psi(x) = amplitude sin(x^1); constant along d_0."""
    amplitude = float(amplitude)
    return lambda xs: amplitude * ad.sin(xs[1])


WEIGHTS = {
    "zero": lambda dim, **p: (_zero_weight, "Psi = 0"),
    "time-linear": lambda dim, a=-0.5: (linear_weight([a] + [0.0] * (dim - 1)), f"Psi = {float(a)} x^0"),
    "fibre-sine": lambda dim, amplitude=0.3: (fibre_weight(amplitude), f"Psi = {float(amplitude)} sin(x^1)"),
}


def apply_weight(m: SpacetimeModel, name, **params) -> SpacetimeModel:
    if name not in WEIGHTS:
        raise ConfigurationError(f"unknown weight {name!r}; known: {', '.join(sorted(WEIGHTS))}")
    try:
        weight, text = WEIGHTS[name](m.dim, **params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for weight {name!r}: {exc}") from None
    return m.with_weight(weight, text)
