"""Independent symbolic oracles for quadratic (Lorentzian) metrics."""

from functools import lru_cache

import numpy as np
import sympy as sp


def flrw_metric(dim, H):
    x = sp.symbols(f"x0:{dim}")
    g = sp.zeros(dim, dim)
    g[0, 0] = -1
    for i in range(1, dim):
        g[i, i] = sp.exp(2 * H * x[0])
    return x, g


@lru_cache(maxsize=None)
def flrw_symbols(dim, H):
    """Christoffel symbols and Ricci tensor as lambdified functions of x."""
    x, g = flrw_metric(dim, sp.nsimplify(H))
    ginv = g.inv()
    gam = [[[sp.simplify(sum(ginv[a, l] * (sp.diff(g[l, b], x[d]) + sp.diff(g[l, d], x[b]) - sp.diff(g[b, d], x[l]))
                             for l in range(dim)) / 2)
             for d in range(dim)] for b in range(dim)] for a in range(dim)]
    ric = sp.zeros(dim, dim)
    for b in range(dim):
        for d in range(dim):
            ric[b, d] = sp.simplify(sum(
                sp.diff(gam[a][b][d], x[a]) - sp.diff(gam[a][b][a], x[d])
                + sum(gam[a][a][e] * gam[e][b][d] - gam[a][d][e] * gam[e][b][a] for e in range(dim))
                for a in range(dim)))
    gam_f = sp.lambdify([x], sp.Array(gam), "numpy")
    ric_f = sp.lambdify([x], ric, "numpy")
    return (lambda p: np.array(gam_f(list(p)), dtype=float)), (lambda p: np.array(ric_f(list(p)), dtype=float))
