"""Lagrange tensors along timelike geodesics and the weighted Raychaudhuri identity.

Quantities live in a g-orthonormal parallel frame ``e_1..e_n`` of the
orthogonal complement of the geodesic velocity, so every endomorphism is an
``n x n`` matrix. With ``k = 2 (1 - eps) Psi / n``:

* ``B_eps = exp(k) (B - (Psi o zeta)' / n I)``, ``theta_eps = tr B_eps``,
  ``sigma_eps = B_eps - theta_eps / n I``;
* ``phi(t) = int_0^t exp(-k)``, and a starred quantity is the derivative
  with respect to ``phi``, i.e. ``exp(k)`` times the t-derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .curvature import epsilon_admissible, geometry_at, weight_along
from .errors import DomainError, IntegrationError, ParameterError
from .geodesic import DEFAULT_TOL, integrate_geodesic, write_csv
from .report import ScenarioReport
from .structure import SpacetimeModel, fundamental_tensor_unchecked

FD_FRACTION = 0.01
CONGRUENCE_TOL = 1e-11
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def orthonormal_frame(m: SpacetimeModel, x, u):
    """g_u-orthonormal basis of the g_u-orthogonal complement of unit timelike u.

    Returns an array of shape (dim, n) whose columns are the frame vectors.
    """
    g = fundamental_tensor_unchecked(m, x, u)
    norm = float(u @ g @ u)
    if norm >= 0:
        raise DomainError("frame construction needs a timelike vector")
    vecs = []
    for a in range(m.dim):
        w = np.zeros(m.dim)
        w[a] = 1.0
        w = w - (w @ g @ u) / norm * u
        for e in vecs:
            w = w - (w @ g @ e) * e
        nrm = float(w @ g @ w)
        if nrm > 1e-10:
            vecs.append(w / math.sqrt(nrm))
        if len(vecs) == m.n:
            break
    return np.column_stack(vecs)


@dataclass
class CongruenceState:
    """Lagrange tensor data along a unit-speed timelike geodesic.

    ``sol`` is the dense solution of the joint system (position, velocity,
    frame, J, J'). ``conjugate_time`` is set when det J changed sign, in
    which case the integration stops there.
    """

    model: SpacetimeModel
    t0: float
    t1: float
    sol: object
    J0_singular: bool
    conjugate_time: float | None = None
    stats: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.model.n

    def _unpack(self, t):
        d, n = self.model.dim, self.model.n
        y = np.moveaxis(self.sol.sol(np.atleast_1d(np.asarray(t, dtype=float))), 0, -1)
        x = y[..., :d]
        v = y[..., d : 2 * d]
        off = 2 * d
        E = y[..., off : off + d * n].reshape(y.shape[:-1] + (d, n))
        off += d * n
        J = y[..., off : off + n * n].reshape(y.shape[:-1] + (n, n))
        Jp = y[..., off + n * n :].reshape(y.shape[:-1] + (n, n))
        return x, v, E, J, Jp

    def position(self, t):
        return self._unpack(t)[0]

    def velocity(self, t):
        return self._unpack(t)[1]

    def frame(self, t):
        return self._unpack(t)[2]

    def J(self, t):
        return self._unpack(t)[3]

    def Jp(self, t):
        return self._unpack(t)[4]

    def B(self, t):
        """Shape operator ``J' J^-1`` in frame components."""
        _, _, _, J, Jp = self._unpack(t)
        return Jp @ np.linalg.inv(J)

    def theta(self, t):
        return np.trace(self.B(t), axis1=-2, axis2=-1)

    def curvature_matrix(self, t):
        """``[R]_ij = g(e_i, R(e_j))`` in the parallel frame."""
        x, v, E, _, _ = self._unpack(t)
        out = []
        for xi, vi, Ei in zip(x, v, E):
            _, cu = geometry_at(self.model, xi, vi, check=False)
            g = fundamental_tensor_unchecked(self.model, xi, vi)
            out.append(Ei.T @ g @ cu.R_matrix @ Ei)
        return np.array(out)

    def frame_defect(self, t):
        """Max deviation of the frame from g-orthonormality and from orthogonality to the velocity."""
        x, v, E, _, _ = self._unpack(t)
        worst = 0.0
        for xi, vi, Ei in zip(x, v, E):
            g = fundamental_tensor_unchecked(self.model, xi, vi)
            gram = Ei.T @ g @ Ei
            worst = max(worst, float(np.max(np.abs(gram - np.eye(self.n)))), float(np.max(np.abs(vi @ g @ Ei))))
        return worst

    def B_derivative(self, t, h=None):
        """dB/dt by a five-point stencil on the dense solution."""
        return _stencil(self.B, t, h)

    def riccati_residual(self, t):
        """Max entry of ``B' + B^2 + R`` relative to the largest term."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        B = self.B(t)
        dB = self.B_derivative(t)
        R = self.curvature_matrix(t)
        res = dB + B @ B + R
        scale = np.maximum.reduce([np.abs(dB).max(axis=(-1, -2)), np.abs(B @ B).max(axis=(-1, -2)), np.abs(R).max(axis=(-1, -2)), np.full(len(t), 1e-300)])
        return np.abs(res).max(axis=(-1, -2)) / scale


def _stencil(fn, t, h=None):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    h = FD_FRACTION * np.maximum(np.abs(t), 1e-3) if h is None else np.broadcast_to(h, t.shape)
    shape = (-1,) + (1,) * (np.ndim(fn(t[:1])) - 1)
    hh = h.reshape(shape)
    return (fn(t - 2 * h) - 8 * fn(t - h) + 8 * fn(t + h) - fn(t + 2 * h)) / (12 * hh)


def evolve_lagrange(m: SpacetimeModel, x, v, t_span, J0=None, J0p=None, tol=CONGRUENCE_TOL, frame=None):
    """Integrate a Lagrange tensor along the geodesic with initial data (x, v).

    Parameters
    ----------
    x, v : array_like
        Start point and unit future timelike velocity at ``t_span[0]``.
    J0, J0p : array_like, shape (n, n)
        Frame components of J and J' at the start; default ``0`` and ``I``.
    frame : array_like, shape (dim, n), optional
        Initial orthonormal frame; built by Gram-Schmidt when omitted.

    Raises
    ------
    DomainError
        If v is not unit timelike.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    d, n = m.dim, m.n
    Lv = float(m.L(x, v))
    if not m.in_cone(x, v) or abs(Lv + 0.5) > 1e-9:
        raise DomainError(f"congruence needs a unit timelike velocity (L = {Lv:.6g}, expected -1/2)")
    J0 = np.zeros((n, n)) if J0 is None else np.asarray(J0, dtype=float)
    J0p = np.eye(n) if J0p is None else np.asarray(J0p, dtype=float)
    E0 = orthonormal_frame(m, x, v) if frame is None else np.asarray(frame, dtype=float)
    t0 = float(t_span[0])
    singular = abs(np.linalg.det(J0)) < 1e-14
    det_start = np.sign(np.linalg.det(J0p)) if singular else np.sign(np.linalg.det(J0))

    def rhs(t, y):
        xs = y[:d]
        vs = y[d : 2 * d]
        off = 2 * d
        E = y[off : off + d * n].reshape(d, n)
        off += d * n
        J = y[off : off + n * n].reshape(n, n)
        Jp = y[off + n * n :].reshape(n, n)
        cd, cu = geometry_at(m, xs, vs, check=False)
        g = cd.g
        Gv = np.einsum("abd,b->ad", cd.chern, vs)
        Rf = E.T @ g @ cu.R_matrix @ E
        return np.concatenate([vs, -2.0 * cd.spray, (-Gv @ E).ravel(), Jp.ravel(), (-Rf @ J).ravel()])

    def det_event(t, y):
        if abs(t - t0) < 1e-12:
            return float(det_start)
        off = 2 * d + d * n
        return float(np.linalg.det(y[off : off + n * n].reshape(n, n))) * det_start

    det_event.terminal = True
    det_event.direction = -1
    y0 = np.concatenate([x, v, E0.ravel(), J0.ravel(), J0p.ravel()])
    sol = solve_ivp(rhs, t_span, y0, method="DOP853", rtol=tol, atol=tol, dense_output=True, events=det_event)
    if sol.status == -1:
        raise IntegrationError(f"congruence integration failed: {sol.message}")
    conj = float(sol.t_events[0][0]) if sol.status == 1 and len(sol.t_events[0]) else None
    return CongruenceState(
        model=m,
        t0=t0,
        t1=float(sol.t[-1]),
        sol=sol,
        J0_singular=singular,
        conjugate_time=conj,
        stats={"nfev": int(sol.nfev), "steps": len(sol.t) - 1},
    )


def unit_timelike(m: SpacetimeModel, x, v):
    """Rescale a future timelike vector to F = 1."""
    v = np.asarray(v, dtype=float)
    Lv = float(m.L(np.asarray(x, float), v))
    if Lv >= 0:
        raise DomainError("vector is not timelike")
    return v / math.sqrt(-2.0 * Lv)


# -- weighted quantities -------------------------------------------------

@dataclass
class WeightedQuantities:
    """Trajectories of the weighted expansion data on a time grid."""

    t: np.ndarray
    N: float
    epsilon: float
    c: float
    B_eps: np.ndarray
    theta_eps: np.ndarray
    sigma_eps: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    psi_prime: np.ndarray
    psi_second: np.ndarray


def _weight_series(state, t):
    x, v = state.position(t), state.velocity(t)
    psi, p1, p2 = weight_along(state.model, x, v)
    return psi, p1, p2


def _exponent(state, eps, t):
    psi, _, _ = _weight_series(state, t)
    return 2.0 * (1.0 - eps) * psi / state.n


def phi_integral(state: CongruenceState, eps, t, start=None, panels=8):
    """``phi(t) = int_start^t exp(2 (eps - 1) Psi(zeta(s)) / n) ds`` by Gauss-Legendre."""
    start = state.t0 if start is None else start
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(t)
    for i, ti in enumerate(t):
        edges = np.linspace(start, ti, panels + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        s = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
        w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
        out[i] = float(np.sum(w * np.exp(-_exponent(state, eps, s))))
    return out


def _B_eps(state, eps, t):
    n = state.n
    B = state.B(t)
    psi, p1, _ = _weight_series(state, t)
    k = 2.0 * (1.0 - eps) * psi / n
    return np.exp(k)[:, None, None] * (B - (p1 / n)[:, None, None] * np.eye(n))


def weighted_quantities(m: SpacetimeModel, state: CongruenceState, N, epsilon, t) -> WeightedQuantities:
    """B_eps, theta_eps, sigma_eps and phi on the grid t.

    Raises
    ------
    ParameterError
        If (N, epsilon) is not admissible.
    """
    rng = epsilon_admissible(N, epsilon, m.n).require()
    t = np.atleast_1d(np.asarray(t, dtype=float))
    Be = _B_eps(state, epsilon, t)
    theta = np.trace(Be, axis1=-2, axis2=-1)
    sigma = Be - (theta / m.n)[:, None, None] * np.eye(m.n)
    psi, p1, p2 = _weight_series(state, t)
    return WeightedQuantities(
        t=t,
        N=rng.N,
        epsilon=rng.epsilon,
        c=rng.c,
        B_eps=Be,
        theta_eps=theta,
        sigma_eps=sigma,
        phi=phi_integral(state, epsilon, t),
        psi=psi,
        psi_prime=p1,
        psi_second=p2,
    )


@dataclass
class RaychaudhuriResult:
    """Pointwise terms and residual of the weighted Raychaudhuri identity.

    ``residual`` is the absolute sum divided by the largest term magnitude.
    ``skipped`` is set for N = n with a non-constant weight, where Ric_n is
    ``-inf``; ``limit_residual`` then holds the residual of the combined
    finite limit of the last two terms.
    """

    t: np.ndarray
    terms: dict
    residual: np.ndarray
    skipped: bool = False
    limit_residual: np.ndarray | None = None
    note: str = ""

    @property
    def max_residual(self):
        r = self.limit_residual if self.skipped else self.residual
        return float(np.max(r))

    def csv_rows(self):
        tr = self.terms["trace_sigma2"]
        return np.column_stack([self.t, self.terms["theta_eps"], tr, self.residual if not self.skipped else self.limit_residual])

    def to_csv(self, path_or_buffer):
        return write_csv(path_or_buffer, ["t", "theta_eps", "trace_sigma2", "residual"], self.csv_rows())


def raychaudhuri_residual(m: SpacetimeModel, state: CongruenceState, N, epsilon, t, psi_tol=1e-12) -> RaychaudhuriResult:
    """Evaluate the weighted Raychaudhuri identity on the grid t.

    The identity reads ``theta* + c theta^2 + (N(N-n)/n)(eps theta/N + psi*/(N-n))^2
    + tr sigma^2 + Ric_N(zeta*) = 0``. For N = inf the middle term is
    ``(eps theta + psi*)^2 / n``.

    Raises
    ------
    ParameterError
        If (N, epsilon) is inadmissible or N = 0.
    """
    n = m.n
    N = float(N)
    if N == 0:
        raise ParameterError("the Raychaudhuri identity needs N in (-inf, 0) U [n, +inf]")
    wq = weighted_quantities(m, state, N, epsilon, t)
    t = wq.t
    eps = wq.epsilon
    k = 2.0 * (1.0 - eps) * wq.psi / n
    ek = np.exp(k)

    def theta_eps(s):
        Be = _B_eps(state, eps, s)
        return np.trace(Be, axis1=-2, axis2=-1)

    theta = wq.theta_eps
    theta_star = ek * _stencil(theta_eps, t)
    psi_star = ek * wq.psi_prime
    trs2 = np.einsum("...ij,...ji->...", wq.sigma_eps, wq.sigma_eps)
    x, v = state.position(t), state.velocity(t)
    ric = np.array([geometry_at(m, xi, vi, check=False)[1].ric for xi, vi in zip(x, v)])
    ric_inf = ric + wq.psi_second
    terms = {
        "theta_eps": theta,
        "theta_star": theta_star,
        "c_theta2": wq.c * theta * theta,
        "trace_sigma2": trs2,
    }
    skipped = False
    limit = None
    note = ""
    if math.isinf(N):
        terms["weight_square"] = (eps * theta + psi_star) ** 2 / n
        terms["ric_N"] = ek * ek * ric_inf
    elif N == n:
        combined = (2.0 * eps * theta * psi_star + psi_star ** 2) / n + ek * ek * ric_inf
        flat = np.all(np.abs(wq.psi_prime) <= psi_tol * np.maximum(1.0, np.abs(wq.psi_second)))
        if flat:
            terms["weight_square"] = np.zeros_like(theta)
            terms["ric_N"] = ek * ek * ric_inf
        else:
            skipped = True
            note = "N = n with non-constant weight: Ric_n = -inf, identity skipped; combined limit reported"
            terms["combined_limit"] = combined
    else:
        terms["weight_square"] = (N * (N - n) / n) * (eps * theta / N + psi_star / (N - n)) ** 2
        terms["ric_N"] = ek * ek * (ric_inf - wq.psi_prime ** 2 / (N - n))
    keys = ["theta_star", "c_theta2", "trace_sigma2"]
    if skipped:
        total = sum(terms[k_] for k_ in keys) + terms["combined_limit"]
        scale = np.max(np.abs([terms[k_] for k_ in keys + ["combined_limit"]]), axis=0)
        limit = np.abs(total) / np.maximum(scale, 1e-300)
        residual = np.full_like(theta, np.nan)
    else:
        keys = keys + ["weight_square", "ric_N"]
        total = sum(terms[k_] for k_ in keys)
        scale = np.max(np.abs([terms[k_] for k_ in keys]), axis=0)
        residual = np.abs(total) / np.maximum(scale, 1e-300)
    return RaychaudhuriResult(t=t, terms=terms, residual=residual, skipped=skipped, limit_residual=limit, note=note)


# -- comparison mechanics ------------------------------------------------

def distance_congruence(m: SpacetimeModel, x, v, s, tol=CONGRUENCE_TOL):
    """Congruence from the vertex ``zeta(-s)`` reaching x at parameter s.

    ``v`` is the unit velocity at x. Returns the state, whose parameter runs
    from 0 at the vertex to s at x.
    """
    back = integrate_geodesic(m, x, v, (0.0, -float(s)), tol)
    if back.exited:
        raise DomainError("backward geodesic left the domain cone")
    z, vz = back(-float(s))
    return evolve_lagrange(m, z, vz, (0.0, float(s)), tol=tol)


def hessian_monotonicity(m: SpacetimeModel, x, v, s_values=(1.0, 2.0, 4.0, 8.0), w_count=8, seed=0, tol=1e-9) -> ScenarioReport:
    """Check that ``g(B^s w, w)`` at x is non-increasing in s.

    ``B^s`` is the shape operator at x of the congruence with vertex at
    ``zeta(-s)``, ``J = 0`` and ``J' = I`` there. Test vectors w are random
    and projected onto the orthogonal complement of v.
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    v = unit_timelike(m, x, v)
    g = fundamental_tensor_unchecked(m, x, v)
    ws = rng.normal(size=(w_count, m.dim))
    ws = ws + np.outer(ws @ g @ v, v)
    rep = ScenarioReport(name=f"hessian-monotonicity:{m.name}", config={"s_values": list(s_values), "seed": seed})
    forms = []
    for s in s_values:
        st = distance_congruence(m, x, v, s)
        if st.conjugate_time is not None:
            raise DomainError(f"conjugate point before reaching x for s = {s}")
        E = st.frame(s)[0]
        B = st.B(s)[0]
        c = ws @ g @ E
        forms.append(np.einsum("ki,ij,kj->k", c, B, c))
    forms = np.array(forms)
    increase = np.max(np.diff(forms, axis=0) / np.maximum(np.abs(forms[:-1]), 1e-300))
    rep.add("max_relative_increase", increase, tol, note="g(B^s w, w) must not increase with s")
    rep.data["forms"] = forms
    return rep.finish()


def epsilon_completeness_probe(m: SpacetimeModel, x, v, epsilon, T=20.0, threshold=None, samples=21):
    """phi(t) along the geodesic from (x, v) on a grid up to T.

    Returns ``(t, phi, monotone, exceeded)``; ``exceeded`` compares ``phi(T)``
    with ``threshold`` (default T, the unweighted value).
    """
    v = unit_timelike(m, x, v)
    seg = integrate_geodesic(m, x, v, (0.0, T))
    if seg.exited:
        raise DomainError("geodesic left the domain cone")
    t = np.linspace(0.0, seg.t1, samples)
    n = m.n

    def integrand(s):
        return np.exp(2.0 * (epsilon - 1.0) * m.Psi(seg.position(s)) / n)

    phi = np.zeros_like(t)
    for i in range(1, len(t)):
        a, b = t[i - 1], t[i]
        s = 0.5 * (a + b) + 0.5 * (b - a) * _GL_NODES
        phi[i] = phi[i - 1] + 0.5 * (b - a) * float(np.sum(_GL_WEIGHTS * integrand(s)))
    threshold = T if threshold is None else threshold
    return t, phi, bool(np.all(np.diff(phi) > 0)), bool(phi[-1] > threshold)
