"""Rays, lines, truncated Busemann functions and the Laplacian comparison.

For a unit-speed ray eta the truncated Busemann function is
``b_t(x) = t - d(x, eta(t))``; it is non-increasing in t and its limit is
estimated by extrapolation in ``1/t``. For a line the reverse function
``bbar_t(x) = t - d(eta(-t), x)`` plays the same role toward the past.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .congruence import evolve_lagrange, phi_integral, unit_timelike
from .curvature import epsilon_admissible, weight_along, weighted_ricci
from .errors import NoConnectorError, ScopeError
from .geodesic import DEFAULT_TOL, GeodesicSegment, geodesic_distance, integrate_geodesic, local_distance, solve_bvp, write_csv
from .report import ScenarioReport
from .structure import F, SpacetimeModel, reverse_model

TAU_CMP = 1e-6
RIC_TOL = 1e-10


@dataclass
class Ray:
    """Unit-speed geodesic on ``[t_min, t_max]`` with a straightness record.

    ``certificate`` is the largest ``|(b - a) - d(eta(a), eta(b))|`` over the
    tested windows; ``speed_defect`` the largest ``|F(eta') - 1|``.
    """

    model: SpacetimeModel
    segment: GeodesicSegment
    t_min: float
    t_max: float
    certificate: float
    speed_defect: float
    windows: list = field(default_factory=list)

    def __call__(self, t):
        self._require(t)
        return self.segment.position(t)

    def velocity(self, t):
        self._require(t)
        return self.segment.velocity(t)

    def _require(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_min - 1e-12) or np.any(t > self.t_max + 1e-12):
            raise ScopeError(f"parameter outside the constructed range [{self.t_min}, {self.t_max}]")


def _integrate_both_ways(m, x, v, t_min, t_max, tol):
    if t_min >= 0:
        return integrate_geodesic(m, x, v, (0.0, t_max), tol)
    fwd = integrate_geodesic(m, x, v, (0.0, t_max), tol)
    bwd = integrate_geodesic(m, x, v, (0.0, t_min), tol)
    if fwd.exited or bwd.exited:
        raise ScopeError("line left the domain cone")
    return _JoinedSegment(m, t_min, t_max, bwd, fwd)


class _JoinedSegment(GeodesicSegment):
    def __init__(self, m, t_min, t_max, bwd, fwd):
        super().__init__(model=m, t0=t_min, t1=t_max, sol=None, stats={"backward": bwd.stats, "forward": fwd.stats})
        self._bwd = bwd
        self._fwd = fwd

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        xb, vb = self._bwd(t)
        xf, vf = self._fwd(t)
        neg = (t < 0)[..., None]
        return np.where(neg, xb, xf), np.where(neg, vb, vf)


def _straightness(m, seg, t_min, t_max, windows, tol):
    """Compare parameter length with the local distance on short windows."""
    speed = float(np.linalg.norm(seg.velocity(t_min)))
    h = 0.5 * m.convexity_radius / max(speed, 1e-300)
    starts = np.linspace(t_min, max(t_min, t_max - h), windows)
    worst = 0.0
    record = []
    for a in starts:
        b = min(a + h, t_max)
        d = local_distance(m, seg.position(a), seg.position(b), seg.velocity(a) * (b - a), tol)
        res = abs((b - a) - d)
        record.append((float(a), float(b), float(res)))
        worst = max(worst, res)
    return worst, record


def make_ray(m: SpacetimeModel, x, v, t_max, windows=4, tol=DEFAULT_TOL) -> Ray:
    """Unit-speed future ray from x in direction v, integrated on ``[0, t_max]``.

    Raises
    ------
    ScopeError
        If the geodesic leaves the domain cone before ``t_max``.
    """
    return _build(m, x, v, 0.0, t_max, windows, tol)


def make_line(m: SpacetimeModel, x, v, T, windows=4, tol=DEFAULT_TOL) -> Ray:
    """Unit-speed geodesic through x on ``[-T, T]``."""
    return _build(m, x, v, -float(T), float(T), windows, tol)


def _build(m, x, v, t_min, t_max, windows, tol):
    x = np.asarray(x, dtype=float)
    u = unit_timelike(m, x, v)
    seg = _integrate_both_ways(m, x, u, t_min, t_max, tol)
    if seg.exited:
        raise ScopeError(f"ray left the domain cone at t = {seg.t1:.6g}")
    ts = np.linspace(t_min, t_max, 201)
    pos, vel = seg(ts)
    speed_defect = float(np.max(np.abs(F(m, pos, vel) - 1.0)))
    cert, record = _straightness(m, seg, t_min, t_max, windows, tol)
    return Ray(model=m, segment=seg, t_min=t_min, t_max=t_max, certificate=cert, speed_defect=speed_defect, windows=record)


# -- Busemann evaluations --------------------------------------------------

@dataclass
class BusemannEvaluation:
    """Samples of a truncated Busemann function at x and their limit.

    ``limit`` fits ``b_inf + beta / t + gamma / t^2`` through the three
    largest kept samples; ``uncertainty`` is its distance to the two-point
    fit ``b_inf + beta / t``. ``monotonicity_violation`` is the largest
    increase between consecutive samples (0 for a non-increasing sequence).
    """

    x: np.ndarray
    t: np.ndarray
    values: np.ndarray
    dropped: list
    limit: float
    uncertainty: float
    monotonicity_violation: float
    reverse: bool = False

    @property
    def monotone(self):
        return self.monotonicity_violation <= 1e-9 * max(1.0, float(np.max(self.t)))

    def csv_rows(self):
        return [list(self.x) + [t, b, self.limit, self.uncertainty] for t, b in zip(self.t, self.values)]

    @staticmethod
    def csv_header(dim):
        return [f"x{a}" for a in range(dim)] + ["t", "b_t", "b_limit", "uncertainty"]


def _extrapolate(t, values):
    inv = 1.0 / np.asarray(t, dtype=float)
    if len(inv) >= 3:
        s, b = inv[-3:], values[-3:]
        three = float(np.linalg.solve(np.vander(s, 3, increasing=True), b)[0])
        two = float(np.linalg.solve(np.vander(s[1:], 2, increasing=True), b[1:])[0])
        return three, abs(three - two)
    if len(inv) == 2:
        two = float(np.linalg.solve(np.vander(inv, 2, increasing=True), values)[0])
        return two, abs(two - float(values[-1]))
    return float(values[-1]), math.inf


def _evaluate(m, x, t_grid, dist, reverse):
    x = np.asarray(x, dtype=float)
    t_grid = np.sort(np.asarray(t_grid, dtype=float))
    kept_t, kept_b, dropped = [], [], []
    for t in t_grid:
        try:
            d = dist(t)
        except NoConnectorError:
            d = 0.0
        if d <= 0.0:
            dropped.append(float(t))
            continue
        kept_t.append(float(t))
        kept_b.append(t - d)
    if not kept_t:
        raise NoConnectorError("no sample of the ray is reachable by a timelike connector")
    kept_t = np.array(kept_t)
    kept_b = np.array(kept_b)
    limit, unc = _extrapolate(kept_t, kept_b)
    violation = float(np.max(np.diff(kept_b), initial=0.0))
    return BusemannEvaluation(
        x=x, t=kept_t, values=kept_b, dropped=dropped, limit=limit, uncertainty=unc,
        monotonicity_violation=max(violation, 0.0), reverse=reverse,
    )


def busemann_truncated(m: SpacetimeModel, ray: Ray, x, t_grid, tol=DEFAULT_TOL) -> BusemannEvaluation:
    """Samples ``b_t(x) = t - d(x, ray(t))`` on ``t_grid`` and their limit.

    Samples whose endpoint is not reachable by a future timelike connector are
    dropped and listed in ``dropped``.

    Raises
    ------
    NoConnectorError
        If every sample is dropped.
    ScopeError
        If the model has no long-range distance.
    """
    return _evaluate(m, x, t_grid, lambda t: geodesic_distance(m, x, ray(t), tol=tol), reverse=False)


def reverse_busemann(m: SpacetimeModel, line: Ray, x, t_grid, tol=DEFAULT_TOL) -> BusemannEvaluation:
    """Samples ``bbar_t(x) = t - d(line(-t), x)`` and their limit."""
    return _evaluate(m, x, t_grid, lambda t: geodesic_distance(m, line(-t), x, tol=tol), reverse=True)


def write_evaluations(path_or_buffer, evaluations):
    dim = len(evaluations[0].x)
    rows = [row for ev in evaluations for row in ev.csv_rows()]
    return write_csv(path_or_buffer, BusemannEvaluation.csv_header(dim), rows)


# -- asymptotes and support functions ------------------------------------

def asymptote(m: SpacetimeModel, ray: Ray, z, t_max, T=None, tol=DEFAULT_TOL) -> Ray:
    """Ray from z whose direction is the limit of connectors from z to ray(T).

    The unit initial vectors toward ``ray(T)`` and ``ray(T / 2)`` are combined
    by one Richardson step in ``1/T``.
    """
    z = np.asarray(z, dtype=float)
    T = ray.t_max if T is None else float(T)
    dirs = []
    for s in (0.5 * T, T):
        sol = solve_bvp(m, z, ray(s), tol=tol)
        dirs.append(unit_timelike(m, z, sol.initial_vector))
    v = 2.0 * dirs[1] - dirs[0]
    return make_ray(m, z, v, t_max, tol=tol)


@dataclass
class SupportFunction:
    """``rho(x) = b(z) + t - d(x, zeta(t))``, an upper support function for b at z."""

    model: SpacetimeModel
    zeta: Ray
    t: float
    b_z: float
    tol: float = DEFAULT_TOL

    @property
    def z(self):
        return self.zeta(0.0)

    def __call__(self, x):
        return self.b_z + self.t - geodesic_distance(self.model, x, self.zeta(self.t), tol=self.tol)


def support_function(m: SpacetimeModel, ray: Ray, zeta: Ray, t, b_eta_z, tol=DEFAULT_TOL) -> SupportFunction:
    """Upper support function of ``b`` at ``zeta(0)`` built from the asymptote zeta."""
    if t <= 0 or t > zeta.t_max:
        raise ScopeError(f"support parameter t = {t} must lie in (0, {zeta.t_max}]")
    return SupportFunction(model=m, zeta=zeta, t=float(t), b_z=float(b_eta_z), tol=tol)


def verify_support(m: SpacetimeModel, rho: SupportFunction, ray: Ray, points, t_grid, tol=TAU_CMP) -> ScenarioReport:
    """Check ``rho(z) = b(z)`` and ``rho >= b`` at the given points near z.

    b is the extrapolated Busemann limit; the margin at each point is
    ``rho(x) - b(x)``.
    """
    rep = ScenarioReport(name=f"support:{m.name}", config={"t": rho.t, "points": len(points), "t_grid": [float(t) for t in t_grid]})
    z = rho.z
    at_z = abs(rho(z) - rho.b_z)
    rep.add("support_touches_at_z", at_z, tol)
    margins, unc = [], []
    for x in points:
        ev = busemann_truncated(m, ray, x, t_grid)
        margins.append(rho(x) - ev.limit)
        unc.append(ev.uncertainty)
    margins = np.array(margins)
    rep.add("support_margin", float(np.min(margins)), -tol, comparison=">=", note="min over sampled x of rho(x) - b(x)")
    rep.add("busemann_uncertainty", float(np.max(unc)), tol, kind="measurement")
    rep.data["margins"] = margins
    return rep.finish()


# -- Laplacian comparison ------------------------------------------------

def _ric_precondition(m, state, N, ts):
    n = m.n
    x, v = state.position(ts), state.velocity(ts)
    vals = np.array([float(weighted_ricci(m, xi, vi, N, n_limit=(float(N) == n))) for xi, vi in zip(x, v)])
    return vals


def verify_laplacian_comparison(
    m: SpacetimeModel, z, v, N, epsilon, t_grid, reverse=False, expect_equality=False, tol=TAU_CMP,
    equality_tol=1e-9,
) -> ScenarioReport:
    """Compare ``Delta^Psi(-u)`` along a timelike geodesic with the comparison bound.

    Parameters
    ----------
    z, v : array_like
        Vertex and future timelike direction of the geodesic eta.
    reverse : bool
        Run the past version: the geodesic ``s -> eta(-s)`` in the reverse
        structure, whose distance from z is the past distance to z.
    expect_equality : bool
        Also require ``|RHS - LHS| t <= equality_tol`` at every grid point.

    The nondimensionalized margin ``t (RHS - LHS)`` must be ``>= -tol``.
    If sampled ``Ric_N`` along eta is negative the report is gated as
    precondition-failed and carries no checks.

    Raises
    ------
    ParameterError
        If (N, epsilon) is not admissible.
    """
    n = m.n
    er = epsilon_admissible(N, epsilon, n).require()
    model = reverse_model(m) if reverse else m
    z = np.asarray(z, dtype=float)
    v = np.asarray(v, dtype=float)
    w = -v if reverse else v
    u = unit_timelike(model, z, w)
    t_grid = np.asarray(t_grid, dtype=float)
    rep = ScenarioReport(
        name=f"laplacian-comparison:{m.name}",
        config={"N": float(N), "epsilon": float(epsilon), "c": er.c, "reverse": reverse, "t_grid": [float(t) for t in t_grid]},
    )
    state = evolve_lagrange(model, z, u, (0.0, float(t_grid.max()) * 1.001))
    if state.conjugate_time is not None and state.conjugate_time <= t_grid.max():
        rep.notes.append(f"conjugate point at t = {state.conjugate_time:.6g}; grid truncated")
        t_grid = t_grid[t_grid < state.conjugate_time]
    ric_ts = np.concatenate([[0.0], t_grid])
    ric = _ric_precondition(model, state, N, ric_ts)
    scale = max(1.0, float(np.max(np.abs(ric[np.isfinite(ric)]), initial=0.0)))
    worst = float(np.min(ric))
    rep.add("ric_N_nonnegative", worst, -RIC_TOL * scale, kind="precondition", comparison=">=",
            note="sampled along the geodesic")
    rep.data["ric_N"] = ric
    if worst < -RIC_TOL * scale:
        rep.gated = True
        rep.notes.append("Ric_N < 0 somewhere on the sampled geodesic; comparison not asserted")
        return rep.finish()
    x, vel = state.position(t_grid), state.velocity(t_grid)
    _, dpsi, _ = weight_along(model, x, vel)
    lhs = state.theta(t_grid) - dpsi
    psi = np.array([weight_along(model, xi, vi)[0] for xi, vi in zip(x, vel)], dtype=float)
    phi = phi_integral(state, epsilon, t_grid, start=0.0)
    rhs = np.exp(2.0 * (epsilon - 1.0) * psi / n) / (er.c * phi)
    margin = t_grid * (rhs - lhs)
    rep.add("comparison_margin", float(np.min(margin)), -tol, comparison=">=", note="min over the grid of t (RHS - LHS)")
    if expect_equality:
        rep.add("equality", float(np.max(np.abs(margin))), equality_tol, note="max over the grid of t |RHS - LHS|")
    else:
        rep.add("equality_gap", float(np.max(np.abs(margin))), equality_tol, kind="measurement")
    rep.data["rows"] = np.column_stack([t_grid, lhs, rhs, margin])
    return rep.finish()


def comparison_csv(path_or_buffer, report: ScenarioReport):
    return write_csv(path_or_buffer, ["t", "lhs", "rhs", "margin"], report.data.get("rows", []))


def reverse_triangle_margin(m: SpacetimeModel, ray: Ray, x, y, t_grid, tol=DEFAULT_TOL):
    """``b(y) - b(x) - d(x, y)`` from extrapolated limits; nonnegative for x <= y."""
    bx = busemann_truncated(m, ray, x, t_grid, tol).limit
    by = busemann_truncated(m, ray, y, t_grid, tol).limit
    return by - bx - geodesic_distance(m, x, y, tol=tol)
