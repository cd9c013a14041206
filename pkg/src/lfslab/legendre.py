"""Dual structure, Legendre transform and differential operators of temporal functions.

Conventions: a covector ``omega`` lies in the polar cone when
``omega(v) < 0`` for every future causal v. A function f is temporal when
``-df`` lies in the polar cone, so ``f = x^0`` is temporal on Minkowski
space and ``grad(-f) = d_0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ad_core as ad
from .connection import connection_at
from .errors import ConvergenceError, DomainError, NotTemporalError
from .structure import (
    SpacetimeModel,
    fundamental_tensor_unchecked,
    lagrangian_jet,
    weight_derivatives,
)

NEWTON_TOL = 1e-12


def _future_timelike(m, x, v):
    if not m.in_cone(x, v):
        return False
    if float(m.L(x, v)) >= 0:
        return False
    w = m.X(x)
    return float(w @ fundamental_tensor_unchecked(m, x, w) @ v) < 0


def _solve(m, x, omega, tol=NEWTON_TOL, max_iter=60):
    """Damped Newton for ``dL/dv(v) = omega`` inside the future timelike cone."""
    w = m.X(x)
    gX = fundamental_tensor_unchecked(m, x, w)
    v = np.linalg.solve(gX, omega)
    scale = max(float(np.max(np.abs(omega))), 1e-300)
    if not _future_timelike(m, x, v):
        # quadratic warm start left the cone; start on the orientation field
        v = w * np.sqrt(abs(float(omega @ np.linalg.solve(gX, omega))) / max(-2.0 * float(m.L(x, w)), 1e-300))
        if not _future_timelike(m, x, v):
            return None, {"reason": "no future timelike start"}
    history = []
    for it in range(max_iter):
        jet = lagrangian_jet(m, x, v, 2, 0)
        grad = np.array([jet.partial({("v", a): 1}) for a in range(m.dim)])
        r = grad - omega
        res = float(np.max(np.abs(r))) / scale
        history.append(res)
        if res <= tol:
            return v, {"iterations": it, "residual": res, "history": history}
        g = np.empty((m.dim, m.dim))
        for a in range(m.dim):
            for b in range(m.dim):
                key = {("v", a): 1, ("v", b): 1} if a != b else {("v", a): 2}
                g[a, b] = jet.partial(key)
        step = np.linalg.solve(g, -r)
        lam = 1.0
        while not _future_timelike(m, x, v + lam * step):
            lam *= 0.5
            if lam < 1e-8:
                return None, {"reason": "Newton step cannot stay future timelike", "history": history}
        v = v + lam * step
    return None, {"reason": "max iterations", "history": history}


def in_polar_cone(m: SpacetimeModel, x, omega) -> bool:
    """Whether omega lies in the polar cone at x.

    Decided by whether the Legendre equation has a future timelike solution,
    after the necessary test ``omega(X) < 0``.
    """
    x = np.asarray(x, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if float(omega @ m.X(x)) >= 0:
        return False
    v, _ = _solve(m, x, omega)
    return v is not None


def legendre_transform(m: SpacetimeModel, x, omega, tol=NEWTON_TOL):
    """The future timelike v with ``g_v(v, .) = omega``.

    Raises
    ------
    DomainError
        If omega is not in the polar cone.
    ConvergenceError
        If Newton stalls although omega passes the necessary test.
    """
    x = np.asarray(x, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if not np.any(omega != 0):
        return np.zeros_like(omega)
    if float(omega @ m.X(x)) >= 0:
        raise DomainError("covector is not in the polar cone (omega(X) >= 0)")
    v, info = _solve(m, x, omega, tol)
    if v is None:
        if info.get("reason") == "max iterations":
            raise ConvergenceError("Legendre Newton iteration did not converge", diagnostics=info)
        raise DomainError(f"covector is not in the polar cone ({info['reason']})")
    return v


def dual_L(m: SpacetimeModel, x, omega):
    """L*(omega) = omega(L*(omega)) / 2, computed through the transform."""
    omega = np.asarray(omega, dtype=float)
    v = legendre_transform(m, x, omega)
    return 0.5 * float(omega @ v)


# -- temporal functions -------------------------------------------------

@dataclass(frozen=True)
class TemporalFunction:
    """A scalar function f(xs) on component sequences, evaluated through jets."""

    f: object
    name: str = "f"

    def jet(self, x, order=2):
        x = np.asarray(x, dtype=float)
        return ad.lift(lambda xs, vs: self.f(xs) + 0.0 * xs[0], x, np.ones_like(x), 0, order)

    def value(self, x):
        return float(self.jet(x, 0).value)

    def differential(self, x):
        jet = self.jet(x, 1)
        return np.array([jet.partial({("x", a): 1}) for a in range(len(x))])

    def hessian_matrix(self, x):
        jet = self.jet(x, 2)
        d = len(x)
        H = np.empty((d, d))
        for a in range(d):
            for b in range(d):
                key = {("x", a): 1, ("x", b): 1} if a != b else {("x", a): 2}
                H[a, b] = jet.partial(key)
        return H


def _as_temporal(f):
    return f if isinstance(f, TemporalFunction) else TemporalFunction(f)


def gradient(m: SpacetimeModel, f, x):
    """grad(-f)(x) = Legendre transform of -df(x).

    Raises
    ------
    NotTemporalError
        If -df(x) is not in the polar cone.
    """
    f = _as_temporal(f)
    omega = -f.differential(np.asarray(x, dtype=float))
    try:
        return legendre_transform(m, x, omega)
    except DomainError as exc:
        raise NotTemporalError(f"-df is not in the polar cone at x: {exc}") from None


def gradient_jacobian(m: SpacetimeModel, f, x):
    """grad(-f)(x) and its coordinate derivative ``dX^a/dx^c``.

    Differentiating ``dL/dv(x, X(x)) = -df(x)`` gives
    ``g_X dX/dx = -Hess f - d2L/dv dx``.
    """
    f = _as_temporal(f)
    x = np.asarray(x, dtype=float)
    X = gradient(m, f, x)
    jet = lagrangian_jet(m, x, X, 2, 1)
    d = m.dim
    g = np.empty((d, d))
    mixed = np.empty((d, d))
    for a in range(d):
        for b in range(d):
            key = {("v", a): 1, ("v", b): 1} if a != b else {("v", a): 2}
            g[a, b] = jet.partial(key)
            mixed[a, b] = jet.partial({("v", a): 1, ("x", b): 1})
    dX = np.linalg.solve(g, -f.hessian_matrix(x) - mixed)
    return X, dX, g


def hessian(m: SpacetimeModel, f, x):
    """The Hessian endomorphism ``v -> D_v^{X} X`` with ``X = grad(-f)``.

    Returns the matrix ``H[a, b] = dX^a/dx^b + Gamma^a_{bd}(X) X^d``.
    """
    X, dX, _ = gradient_jacobian(m, f, x)
    Gam = connection_at(m, x, X).chern
    return dX + np.einsum("abd,d->ab", Gam, X)


def laplacian(m: SpacetimeModel, f, x):
    """Delta(-f) = trace of the Hessian."""
    return float(np.trace(hessian(m, f, x)))


def weighted_laplacian(m: SpacetimeModel, f, x):
    """Psi-Laplacian ``Delta(-f) - dPsi(grad(-f))``."""
    X = gradient(m, f, x)
    _, dpsi, _ = weight_derivatives(m, np.asarray(x, dtype=float))
    return laplacian(m, f, x) - float(dpsi @ X)


def hessian_symmetry_residual(m: SpacetimeModel, f, x):
    """Max entry of the antisymmetric part of ``g_X H``, relative to its size."""
    X, _, g = gradient_jacobian(m, f, x)
    H = hessian(m, f, x)
    A = g @ H
    return float(np.max(np.abs(A - A.T)) / max(np.max(np.abs(A)), 1e-300))
