"""Geodesics, Jacobi fields, parallel transport, shooting, length and distance.

All integrations use scipy's DOP853 (an adaptive 8(5,3) Runge-Kutta pair
with dense output).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import ad_core as ad
from .connection import chern, spray, spray_jets
from .curvature import geometry_at
from .errors import DomainError, IntegrationError, NoConnectorError, ScopeError
from .structure import F, SpacetimeModel, eval_L

DEFAULT_TOL = 1e-10


def _cone_event(m):
    if m.cone is None:
        return None

    def event(t, y):
        d = m.dim
        return 1.0 if m.in_cone(y[:d], y[d : 2 * d]) else -1.0

    event.terminal = True
    return event


def _integrate(fun, t_span, y0, tol, events=None, max_step=np.inf):
    sol = solve_ivp(
        fun,
        t_span,
        y0,
        method="DOP853",
        rtol=tol,
        atol=tol,
        dense_output=True,
        events=events,
        max_step=max_step,
    )
    if sol.status == -1:
        raise IntegrationError(f"integration failed: {sol.message}")
    return sol


def write_csv(path_or_buffer, header, rows):
    """CSV with a header row, 17 significant digits and LF line endings."""
    own = isinstance(path_or_buffer, str)
    buf = io.StringIO() if own else path_or_buffer
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([f"{float(v):.17g}" for v in row])
    if own:
        from .cli import atomic_write

        atomic_write(path_or_buffer, buf.getvalue())
    return buf


@dataclass
class GeodesicSegment:
    """Integrated geodesic with dense output on ``[t0, t1]``.

    ``exited`` is True when the trajectory left the domain cone before the
    requested end time; ``t1`` is then the exit time.
    """

    model: SpacetimeModel
    t0: float
    t1: float
    sol: object
    exited: bool = False
    stats: dict = field(default_factory=dict)

    def __call__(self, t):
        """``(x, v)`` at time(s) t; shapes (..., dim)."""
        y = self.sol.sol(np.asarray(t, dtype=float))
        d = self.model.dim
        y = np.moveaxis(y, 0, -1)
        return y[..., :d], y[..., d : 2 * d]

    def position(self, t):
        return self(t)[0]

    def velocity(self, t):
        return self(t)[1]

    def sample_times(self, count=201):
        return np.linspace(self.t0, self.t1, count)

    def L_drift(self, count=201):
        """Max |L(eta'(t)) - L(eta'(t0))| over ``count`` dense samples."""
        ts = self.sample_times(count)
        x, v = self(ts)
        Lv = np.asarray(self.model.L(x, v), dtype=float)
        return float(np.max(np.abs(Lv - Lv[0])))

    def drift_per_unit_time(self, count=201):
        span = abs(self.t1 - self.t0)
        return self.L_drift(count) / max(span, 1e-300)

    def csv_rows(self, count=201):
        ts = self.sample_times(count)
        x, v = self(ts)
        return np.column_stack([ts, x, v])

    def to_csv(self, path_or_buffer, count=201):
        d = self.model.dim
        header = ["t"] + [f"x{a}" for a in range(d)] + [f"v{a}" for a in range(d)]
        return write_csv(path_or_buffer, header, self.csv_rows(count))


def integrate_geodesic(m: SpacetimeModel, x, v, t_span=(0.0, 1.0), tol=DEFAULT_TOL, max_step=np.inf):
    """Solve ``eta'' + 2 G(eta') = 0`` from (x, v).

    Raises
    ------
    DomainError
        If v is zero or outside the domain cone.
    IntegrationError
        On step-size collapse.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if not np.any(v != 0):
        raise DomainError("geodesic initial vector must be nonzero")
    if not m.in_cone(x, v):
        raise DomainError(f"initial vector outside the domain cone of {m.name}")
    d = m.dim

    def rhs(t, y):
        return np.concatenate([y[d:], -2.0 * spray(m, y[:d], y[d:], check=False)])

    event = _cone_event(m)
    sol = _integrate(rhs, t_span, np.concatenate([x, v]), tol, events=event, max_step=max_step)
    exited = sol.status == 1
    t1 = float(sol.t[-1])
    stats = {"nfev": int(sol.nfev), "steps": len(sol.t) - 1}
    return GeodesicSegment(model=m, t0=float(t_span[0]), t1=t1, sol=sol, exited=exited, stats=stats)


def exponential_map(m: SpacetimeModel, x, v, tol=DEFAULT_TOL):
    """exp_x(v), the time-1 endpoint of the geodesic with initial velocity v."""
    seg = integrate_geodesic(m, x, v, (0.0, 1.0), tol)
    if seg.exited:
        raise DomainError(f"geodesic left the domain cone at t = {seg.t1:.6g}")
    return seg.position(1.0)


def exp_with_jacobian(m: SpacetimeModel, x, v, tol=DEFAULT_TOL):
    """exp_x(v) and its derivative in v from the coordinate variational equation.

    The variation ``J`` of a geodesic family satisfies
    ``J'' + 2 dG/dx J + 2 dG/dv J' = 0``; with ``J(0) = 0`` and
    ``J'(0) = e_k`` the time-1 value is column k of ``d exp_x / dv``.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if not m.in_cone(x, v):
        raise DomainError(f"initial vector outside the domain cone of {m.name}")
    d = m.dim

    def rhs(t, y):
        xs, vs = y[:d], y[d : 2 * d]
        Jx = y[2 * d : 2 * d + d * d].reshape(d, d)
        Jv = y[2 * d + d * d :].reshape(d, d)
        G = spray_jets(m, xs, vs, 1, 1, check=False).spray
        Gx = ad.grad(G.truncate(ad.jet_space(d, 1, 0)), "x").value
        Gv = ad.grad(G.truncate(ad.jet_space(d, 0, 1)), "v").value
        acc = -2.0 * (Gx @ Jx + Gv @ Jv)
        return np.concatenate([vs, -2.0 * G.value, Jv.ravel(), acc.ravel()])

    y0 = np.concatenate([x, v, np.zeros(d * d), np.eye(d).ravel()])
    sol = _integrate(rhs, (0.0, 1.0), y0, tol, events=_cone_event(m))
    if sol.status == 1:
        raise DomainError(f"geodesic left the domain cone at t = {sol.t[-1]:.6g}")
    y = sol.y[:, -1]
    return y[:d], y[2 * d : 2 * d + d * d].reshape(d, d)


def _fd_jacobian(m, x, v, tol):
    d = m.dim
    base = exponential_map(m, x, v, tol)
    h = np.cbrt(np.finfo(float).eps) * max(1.0, np.linalg.norm(v))
    cols = []
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        cols.append((exponential_map(m, x, v + e, tol) - exponential_map(m, x, v - e, tol)) / (2 * h))
    return base, np.column_stack(cols)


@dataclass
class BvpSolution:
    """Converged shooting solution from x to y.

    ``iterations`` counts evaluations of the exponential map.
    """

    segment: GeodesicSegment
    initial_vector: np.ndarray
    iterations: int
    residual: float


def solve_bvp(m: SpacetimeModel, x, y, initial_guess=None, tol=DEFAULT_TOL, max_iter=30, bvp_tol=1e-10, jacobian="auto"):
    """Newton shooting on ``v -> exp_x(v) - y``.

    Starts from the identity as Jacobian (exact when the spray vanishes) and
    refreshes it by Broyden updates; the true Jacobian is computed only when a
    damped step fails to reduce the residual.

    Parameters
    ----------
    initial_guess : array_like, optional
        Starting vector; defaults to ``y - x``.
    jacobian : {"auto", "jacobi", "fd"}
        Source of the fallback Jacobian. "auto" uses the variational
        equation on jet models and finite differences on "fd" models.

    Raises
    ------
    NoConnectorError
        If Newton does not reach ``bvp_tol`` within ``max_iter`` steps or
        leaves the domain cone. This is not a proof that no geodesic exists.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    v = (y - x) if initial_guess is None else np.asarray(initial_guess, dtype=float).copy()
    if jacobian == "auto":
        jacobian = "fd" if m.derivatives == "fd" else "jacobi"
    scale = max(1.0, float(np.linalg.norm(y - x)))

    def jac_at(vec):
        if jacobian == "fd":
            return _fd_jacobian(m, x, vec, tol)[1]
        return exp_with_jacobian(m, x, vec, tol)[1]

    try:
        r = exponential_map(m, x, v, tol) - y
    except DomainError as exc:
        raise NoConnectorError(f"shooting start left the domain: {exc}") from None
    evals = 1
    res = float(np.linalg.norm(r))
    # exp_x(v) = x + v + O(|v|^2 G): the identity is the first Jacobian guess
    jac = np.eye(m.dim)
    fresh = False
    while res > bvp_tol * scale:
        if evals > max_iter:
            raise NoConnectorError(f"Newton shooting did not converge (residual {res:.3e} after {evals} evaluations)")
        if jac is None:
            jac = jac_at(v)
            evals += 1
            fresh = True
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            raise NoConnectorError("singular shooting Jacobian (conjugate point)") from None
        lam = 1.0
        accepted = False
        while lam >= 1e-3:
            trial = v + lam * step
            evals += 1
            try:
                if not m.in_cone(x, trial):
                    raise DomainError("trial vector outside cone")
                r_t = exponential_map(m, x, trial, tol) - y
            except DomainError:
                lam *= 0.5
                continue
            res_t = float(np.linalg.norm(r_t))
            if res_t < res:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            if fresh:
                raise NoConnectorError("line search failed in Newton shooting")
            jac = None
            continue
        # Broyden rank-one update keeps later steps to plain exponential-map calls
        dv = trial - v
        jac = jac + np.outer(r_t - r - jac @ dv, dv) / float(dv @ dv)
        fresh = False
        v, r, res = trial, r_t, res_t
    seg = integrate_geodesic(m, x, v, (0.0, 1.0), tol)
    return BvpSolution(segment=seg, initial_vector=v, iterations=evals, residual=res)


# -- length and distance -------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def _quadrature(m, pos, vel, a, b, panels):
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    t = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return float(np.sum(w * F(m, pos(t), vel(t))))


def length(m: SpacetimeModel, curve, t_range=(0.0, 1.0), panels=16):
    """Lorentz-Finsler length of a causal curve.

    Parameters
    ----------
    curve : ndarray or callable
        Either vertices of a polyline, shape (k, dim), or a callable
        ``curve(t) -> (x, xdot)`` vectorized over t.

    Raises
    ------
    DomainError
        If a quadrature sample is spacelike or outside the cone.
    """
    if callable(curve):
        pos = lambda t: curve(t)[0]
        vel = lambda t: curve(t)[1]
        return _quadrature(m, pos, vel, t_range[0], t_range[1], panels)
    pts = np.asarray(curve, dtype=float)
    total = 0.0
    for p, q in zip(pts[:-1], pts[1:]):
        step = q - p
        pos = lambda t, p=p, step=step: p + t[:, None] * step
        vel = lambda t, step=step: np.broadcast_to(step, (len(t), len(step)))
        total += _quadrature(m, pos, vel, 0.0, 1.0, max(1, panels // 4))
    return total


def _is_future_causal(m, x, v):
    if not m.in_cone(x, v):
        return False
    Lv = float(eval_L(m, x, v))
    if Lv > 1e-9 * float(v @ v):
        return False
    w = m.X(x)
    from .structure import fundamental_tensor_unchecked

    return float(w @ fundamental_tensor_unchecked(m, x, w) @ v) < 0


def local_distance(m: SpacetimeModel, x, y, initial_guess=None, tol=DEFAULT_TOL):
    """d(x, y) for points within the model's convexity radius.

    Returns the F-length of the shooting connector when it is future causal
    and 0 when no future causal connector is found.

    Raises
    ------
    ScopeError
        If |y - x| exceeds the convexity radius.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.linalg.norm(y - x) > m.convexity_radius:
        raise ScopeError(
            f"points are {np.linalg.norm(y - x):.3g} apart, beyond the convexity radius {m.convexity_radius}"
        )
    return _distance(m, x, y, initial_guess, tol)


def _distance(m, x, y, initial_guess, tol):
    guess = y - x if initial_guess is None else initial_guess
    if not _is_future_causal(m, x, guess):
        return 0.0
    try:
        sol = solve_bvp(m, x, y, guess, tol)
    except NoConnectorError:
        return 0.0
    v = sol.initial_vector
    if not _is_future_causal(m, x, v):
        return 0.0
    return float(F(m, x, v))


def geodesic_distance(m: SpacetimeModel, x, y, initial_guess=None, tol=DEFAULT_TOL, method="auto"):
    """Distance along the shooting connector without the radius restriction.

    Only for models whose connectors along their known geodesic families
    are maximizing (``long_range`` set); "heuristic" models get no guarantee.
    Models with affine geodesics use the closed form ``F(y - x)`` (0 when
    ``y - x`` is not future causal) unless ``method="shooting"``.

    Raises
    ------
    ScopeError
        If the model does not declare long-range support.
    """
    if m.long_range is None:
        raise ScopeError(f"long-range distance is not supported on {m.name}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if method == "auto" and m.affine_geodesics:
        v = y - x
        return float(F(m, x, v)) if _is_future_causal(m, x, v) else 0.0
    return _distance(m, x, y, initial_guess, tol)


# -- fields along segments ----------------------------------------------

@dataclass
class FieldAlong:
    """Dense vector (or matrix) field along a segment.

    ``value(t)`` returns the field; ``derivative(t)`` the covariant
    derivative where it is tracked.
    """

    segment: GeodesicSegment
    sol: object
    shape: tuple

    def _split(self, t):
        y = np.moveaxis(self.sol.sol(np.asarray(t, dtype=float)), 0, -1)
        size = int(np.prod(self.shape))
        return y[..., :size], y[..., size:]

    def value(self, t):
        a, _ = self._split(t)
        return a.reshape(a.shape[:-1] + self.shape)

    def derivative(self, t):
        _, b = self._split(t)
        return b.reshape(b.shape[:-1] + self.shape)


def parallel_transport(m: SpacetimeModel, segment: GeodesicSegment, V0, tol=DEFAULT_TOL):
    """Solve ``D_{eta'} V = 0`` with reference eta'; V0 may be (dim,) or (dim, k)."""
    V0 = np.asarray(V0, dtype=float)
    shape = V0.shape

    def rhs(t, y):
        x, v = segment(t)
        Gam = chern(m, x, v, check=False)
        V = y.reshape(shape)
        return -np.einsum("abd,b,d...->a...", Gam, v, V).ravel()

    sol = _integrate(rhs, (segment.t0, segment.t1), V0.ravel(), tol)
    return FieldAlong(segment=segment, sol=sol, shape=shape)


def integrate_jacobi(m: SpacetimeModel, segment: GeodesicSegment, J0, J0p, tol=DEFAULT_TOL):
    """Solve ``D^2 J + R_{eta'}(J) = 0`` along the segment.

    ``J0p`` is the covariant derivative at the start (equal to the plain
    derivative where Gamma vanishes). Integrates ``J`` and ``P = D J``:
    ``J' = P - Gamma(eta')(eta', J)``, ``P' = -R(J) - Gamma(eta')(eta', P)``.
    Matrix data of shape (dim, k) integrates k fields at once.
    """
    J0 = np.asarray(J0, dtype=float)
    J0p = np.asarray(J0p, dtype=float)
    shape = J0.shape
    size = J0.size

    def rhs(t, y):
        x, v = segment(t)
        cd, cu = geometry_at(m, x, v, check=False)
        Gv = np.einsum("abd,b->ad", cd.chern, v)
        J = y[:size].reshape(shape)
        P = y[size:].reshape(shape)
        dJ = P - Gv @ J
        dP = -cu.R_matrix @ J - Gv @ P
        return np.concatenate([dJ.ravel(), dP.ravel()])

    sol = _integrate(rhs, (segment.t0, segment.t1), np.concatenate([J0.ravel(), J0p.ravel()]), tol)
    return FieldAlong(segment=segment, sol=sol, shape=shape)
