"""Formal Christoffel symbols, spray, nonlinear and Chern connections.

Index convention: arrays ``gamma[..., a, b, d]`` hold the coefficient with
upper index ``a`` and lower indices ``b, d``; ``nonlinear[..., a, b]`` holds
``N^a_b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from . import ad_core as ad
from .errors import DomainError, NumericalDegeneracyError
from .report import ScenarioReport
from .structure import SpacetimeModel, lagrangian_jet, sample_points

TAU_BERWALD = 1e-8
COND_LIMIT = 1e12


def _check_conditioning(g):
    cond = np.linalg.cond(g)
    worst = float(np.max(cond))
    if not np.isfinite(worst) or worst > COND_LIMIT:
        raise NumericalDegeneracyError(f"g_v is singular to working precision (cond {worst:.3e})", worst)


@dataclass
class SprayJets:
    """Jets of the metric data and the spray at (x, v).

    ``spray`` carries caps ``(v_cap, x_cap)``; ``g`` and ``dxg`` are values.
    """

    x: np.ndarray
    v: np.ndarray
    L: ad.Jet
    g: np.ndarray
    spray: ad.Jet


def spray_jets(m: SpacetimeModel, x, v, v_cap, x_cap, check=True) -> SprayJets:
    """Spray G as a jet with v-order ``v_cap`` and x-order ``x_cap``.

    Uses ``G^a = (1/2) g^{al} (d2L/dx^b dv^l v^b - dL/dx^l)``, which needs L
    to v-order ``v_cap + 2`` and x-order ``x_cap + 1``. ``check=False`` skips
    the cone test (integrator stages may probe just outside the cone).
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if check and not np.all(m.in_cone(x, v)):
        raise DomainError(f"vector outside the domain cone of {m.name}")
    Lj = lagrangian_jet(m, x, v, v_cap + 2, x_cap + 1)
    dv = ad.grad(Lj, "v")
    g = ad.grad(dv, "v")
    _check_conditioning(g.value)
    dxL = ad.grad(Lj, "x")
    dxdv = ad.grad(dv, "x")
    vj = ad.variables(Lj.space, "v", np.broadcast_to(v, Lj.shape + (m.dim,)))
    rhs = ad.contract("lb,b->l", dxdv, vj) - dxL
    G = 0.5 * ad.contract("al,l->a", ad.inverse(g), rhs)
    return SprayJets(x=x, v=v, L=Lj, g=g.value, spray=G)


def spray(m: SpacetimeModel, x, v, check=True):
    """G^a(x, v) as plain values (cheapest path, used by integrators)."""
    return spray_jets(m, x, v, 0, 0, check=check).spray.value


@dataclass
class ConnectionData:
    """Connection coefficients at (x, v)."""

    x: np.ndarray
    v: np.ndarray
    g: np.ndarray
    gamma: np.ndarray
    spray: np.ndarray
    nonlinear: np.ndarray
    chern: np.ndarray


def _values(jet, group_orders):
    """Plain array of the mixed partial given as ``[(group, alpha), ...]``."""
    key = {}
    for slot in group_orders:
        key[slot] = key.get(slot, 0) + 1
    return jet.partial(key)


def connection_at(m: SpacetimeModel, x, v, check=True) -> ConnectionData:
    """Formal Christoffel symbols, spray, nonlinear and Chern connection.

    Raises
    ------
    NumericalDegeneracyError
        If g_v is numerically singular.
    """
    return connection_from_jets(spray_jets(m, x, v, 1, 0, check=check))


def connection_from_jets(sj: SprayJets) -> ConnectionData:
    """Connection data from spray jets with caps of at least (1, 0)."""
    dim = sj.x.shape[-1]
    Lj = sj.L
    shape = Lj.shape
    g = sj.g
    ginv = np.linalg.inv(g)
    dxg = np.empty(shape + (dim, dim, dim))  # [l, d, b] = d g_ld / dx^b
    dvg = np.empty(shape + (dim, dim, dim))  # [l, d, m] = d g_ld / dv^m
    for l in range(dim):
        for d in range(dim):
            for b in range(dim):
                dxg[..., l, d, b] = _values(Lj, [("v", l), ("v", d), ("x", b)])
                dvg[..., l, d, b] = _values(Lj, [("v", l), ("v", d), ("v", b)])
    # lowered gamma_{l b d} = 1/2 (d_b g_ld + d_d g_bl - d_l g_bd)
    low = 0.5 * (
        np.einsum("...ldb->...lbd", dxg) + np.einsum("...bld->...lbd", dxg) - np.einsum("...bdl->...lbd", dxg)
    )
    gamma = np.einsum("...al,...lbd->...abd", ginv, low)
    G = sj.spray.value
    N = ad.grad(sj.spray.truncate(ad.jet_space(dim, 0, 1)), "v").value
    # C-terms: dvg[l,d,m] N^m_b etc.
    t1 = np.einsum("...ldm,...mb->...lbd", dvg, N)  # d_{v^m} g_{ld} N^m_b
    t2 = np.einsum("...blm,...md->...lbd", dvg, N)  # d_{v^m} g_{bl} N^m_d
    t3 = np.einsum("...bdm,...ml->...lbd", dvg, N)  # d_{v^m} g_{bd} N^m_l
    chern = gamma - 0.5 * np.einsum("...al,...lbd->...abd", ginv, t1 + t2 - t3)
    return ConnectionData(x=sj.x, v=sj.v, g=g, gamma=gamma, spray=G, nonlinear=N, chern=chern)


def chern(m: SpacetimeModel, x, v, check=True):
    """Chern connection coefficients Gamma^a_{bd}(v) at x."""
    return connection_at(m, x, v, check=check).chern


def covariant_derivative(m: SpacetimeModel, x, field, v, w):
    """``D_v^w V`` at x for a vector field V.

    Parameters
    ----------
    field : callable
        ``V(xs)`` returning a sequence of ``dim`` components; evaluated on
        jets so that its first derivatives are exact.
    v : array_like
        Direction of differentiation.
    w : array_like
        Nonzero reference vector in the domain cone.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    dim = m.dim
    space = ad.jet_space(dim, 1, 0)
    xs = [space.variable("x", a, x[..., a]) for a in range(dim)]
    comps = field(xs)
    comps = [c if isinstance(c, ad.Jet) else space.constant(np.broadcast_to(c, x.shape[:-1])) for c in comps]
    V = np.stack([c.value for c in comps], axis=-1)
    dV = np.stack([np.stack([c.partial({("x", b): 1}) for b in range(dim)], axis=-1) for c in comps], axis=-2)
    Gam = chern(m, x, w)
    return np.einsum("...ab,...b->...a", dV, v) + np.einsum("...abd,...b,...d->...a", Gam, v, V)


def _halton_directions(m, x, count, seed):
    """Low-discrepancy future timelike vectors at x (plus X(x) first)."""
    sampler = qmc.Halton(d=m.dim, seed=seed)
    u = sampler.random(8 * count)
    v0 = 0.5 + 1.5 * u[:, 0]
    z = 2.0 * u[:, 1:] - 1.0
    norms = np.linalg.norm(z, axis=1)
    keep = (norms > 1e-3) & (norms <= 1.0)
    z = z[keep]
    v0 = v0[keep]
    v = np.concatenate([v0[:, None], m.sample_speed * v0[:, None] * z], axis=1)
    xs = np.broadcast_to(x, v.shape)
    ok = m.in_cone(xs, v)
    ok[ok] &= m.L(xs[ok], v[ok]) < 0
    v = v[ok][: count - 1]
    return np.concatenate([m.X(x)[None, :], v], axis=0)


def berwald_audit(m: SpacetimeModel, x_samples=8, v_samples_per_x=16, seed=0, tol=TAU_BERWALD) -> ScenarioReport:
    """Spread of the Chern coefficients over directions at sampled points.

    ``x_samples`` is either a count or an array of points. The deviation at a
    point is the largest entrywise spread ``max_v Gamma - min_v Gamma``
    divided by ``max |g_X|``; the verdict is Berwald iff the worst deviation
    is at most ``tol``. The report's verdict is whether that classification
    agrees with the model's claim.
    """
    rng = np.random.default_rng(seed)
    if np.ndim(x_samples) == 0:
        xs = sample_points(m, rng, int(x_samples), radius=0.5 * m.convexity_radius)
    else:
        xs = np.atleast_2d(np.asarray(x_samples, dtype=float))
    rep = ScenarioReport(
        name=f"berwald:{m.name}",
        config={"model": m.name, "x_samples": len(xs), "v_samples_per_x": v_samples_per_x, "seed": seed},
    )
    deviations = []
    for i, x in enumerate(xs):
        vs = _halton_directions(m, x, v_samples_per_x, seed + i)
        cd = connection_at(m, np.broadcast_to(x, vs.shape), vs)
        spread = np.max(cd.chern, axis=0) - np.min(cd.chern, axis=0)
        scale = np.max(np.abs(cd.g[0]))
        deviations.append(float(np.max(spread)) / scale)
    worst = max(deviations)
    berwald = worst <= tol
    rep.add("berwald_deviation", worst, tol, note="Berwald iff deviation <= tolerance", kind="measurement")
    rep.add_flag("classification_matches_claim", berwald == m.berwald)
    rep.data["deviations"] = deviations
    rep.data["berwald"] = berwald
    rep.data["claimed_berwald"] = m.berwald
    return rep.finish()


def is_berwald(m: SpacetimeModel, **kwargs) -> bool:
    return bool(berwald_audit(m, **kwargs).data["berwald"])
