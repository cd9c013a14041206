"""Curvature endomorphism, Ricci scalar, weighted Ricci and the epsilon-range."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ad_core as ad
from .connection import connection_from_jets, spray, spray_jets
from .errors import ParameterError
from .structure import SpacetimeModel, weight_derivatives

PSI_FLAT_TOL = 1e-12


@dataclass(frozen=True)
class EpsilonRange:
    """Admissibility of (N, epsilon) for spatial dimension n.

    ``bound`` is the strict upper bound on ``|epsilon|`` (``inf`` when any
    epsilon is allowed, ``0`` when only epsilon = 0 is allowed).
    """

    N: float
    epsilon: float
    n: int
    admissible: bool
    bound: float
    c: float

    def require(self):
        if not self.admissible:
            raise ParameterError(
                f"epsilon = {self.epsilon} is outside the range for N = {self.N}, n = {self.n} "
                f"(need |epsilon| < {self.bound})" if self.bound > 0 else
                f"N = 0 requires epsilon = 0, got {self.epsilon}"
            )
        return self


def _c(N, eps, n):
    if N == 0:
        return 1.0 / n
    if math.isinf(N):
        return (1.0 - eps * eps) / n
    return (1.0 - eps * eps * (N - n) / N) / n


def epsilon_admissible(N, epsilon, n) -> EpsilonRange:
    """Check (N, epsilon) against the epsilon-range and compute c(N, epsilon).

    Parameters
    ----------
    N : float
        Effective dimension in ``(-inf, 0] U [n, +inf]``.
    epsilon : float
    n : int
        Spatial dimension (spacetime dimension minus one).

    Raises
    ------
    ParameterError
        If N lies in (0, n), is NaN, or is -inf.
    """
    N = float(N)
    epsilon = float(epsilon)
    if n < 1:
        raise ParameterError(f"spatial dimension must be positive, got {n}")
    if math.isnan(N) or N == -math.inf or 0 < N < n:
        raise ParameterError(f"N = {N} is outside (-inf, 0] U [n, +inf] with n = {n}")
    if math.isnan(epsilon):
        raise ParameterError("epsilon is NaN")
    if N == 0:
        bound = 0.0
        ok = epsilon == 0.0
    elif N == n:
        bound = math.inf
        ok = True
    elif math.isinf(N):
        bound = 1.0
        ok = abs(epsilon) < 1.0
    else:
        bound = math.sqrt(N / (N - n))
        ok = abs(epsilon) < bound
    c = _c(N, epsilon, n) if ok else float("nan")
    return EpsilonRange(N=N, epsilon=epsilon, n=n, admissible=ok, bound=bound, c=c)


@dataclass
class CurvatureData:
    x: np.ndarray
    v: np.ndarray
    R_matrix: np.ndarray
    ric: np.ndarray


def curvature_data(m: SpacetimeModel, x, v, check=True) -> CurvatureData:
    """R^a_b(v) and Ric(v) from a (2, 1) jet of the spray."""
    return curvature_from_jets(spray_jets(m, x, v, 2, 1, check=check))


def geometry_at(m: SpacetimeModel, x, v, check=True):
    """Connection and curvature data from a single jet evaluation."""
    sj = spray_jets(m, x, v, 2, 1, check=check)
    return connection_from_jets(sj), curvature_from_jets(sj)


def curvature_from_jets(sj) -> CurvatureData:
    G = sj.spray
    v = sj.v
    Gv = G.value
    dGdx = ad.grad(G, "x").value
    N = ad.grad(G, "v")
    Nv = N.value
    dNdx = ad.grad(N, "x").value
    dNdv = ad.grad(N, "v").value
    R = (
        2.0 * dGdx
        - np.einsum("...abd,...d->...ab", dNdx, v)
        + 2.0 * np.einsum("...abd,...d->...ab", dNdv, Gv)
        - np.einsum("...ad,...db->...ab", Nv, Nv)
    )
    return CurvatureData(x=sj.x, v=v, R_matrix=R, ric=np.trace(R, axis1=-2, axis2=-1))


def curvature_endomorphism(m: SpacetimeModel, x, v):
    """The matrix R^a_b(v); ``R_v(v) = 0`` up to rounding for any spray."""
    return curvature_data(m, x, v).R_matrix


def ricci(m: SpacetimeModel, x, v):
    """Ric(v) = trace R_v, 2-homogeneous in v."""
    return curvature_data(m, x, v).ric


def weight_along(m: SpacetimeModel, x, v):
    """``(Psi, (Psi o eta)', (Psi o eta)'')`` at t = 0 for the geodesic with velocity v.

    The second derivative uses the geodesic equation:
    ``d2Psi(v, v) - 2 dPsi(G(v))``.
    """
    psi, d1, d2 = weight_derivatives(m, x)
    G = spray(m, x, v)
    first = np.einsum("...a,...a->...", d1, v)
    second = np.einsum("...a,...ab,...b->...", v, d2, v) - 2.0 * np.einsum("...a,...a->...", d1, G)
    return psi, first, second


def weighted_ricci(m: SpacetimeModel, x, v, N, n_limit=False):
    """Weighted Ricci curvature Ric_N(v).

    Parameters
    ----------
    N : float
        Effective dimension; ``inf`` drops the quadratic weight term.
    n_limit : bool
        Required for ``N == n``: returns the monotone limit, which is
        ``-inf`` wherever ``(Psi o eta)'(0) != 0``.

    Raises
    ------
    ParameterError
        For ``N == n`` without ``n_limit``.
    """
    N = float(N)
    n = m.n
    if N == n and not n_limit:
        raise ParameterError("Ric_N at N = n is a limit; pass n_limit=True")
    ric = ricci(m, x, v)
    _, first, second = weight_along(m, x, v)
    if math.isinf(N):
        return ric + second
    if N == n:
        scale = PSI_FLAT_TOL * np.maximum(1.0, np.abs(second))
        return np.where(np.abs(first) <= scale, ric + second, -np.inf)
    return ric + second - first * first / (N - n)
