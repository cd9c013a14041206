"""Forward-mode truncated Taylor arithmetic over (x, v) input slots.

A :class:`Jet` stores the Taylor coefficients of a scalar (or tensor) valued
function of ``2 * dim`` inputs, the chart coordinates ``x^0..x^n`` and the
fibre coordinates ``v^0..v^n``, truncated separately in each slot group:
monomials of degree at most ``x_order`` in x and at most ``v_order`` in v.
One evaluation of a Lagrangian on lifted inputs therefore yields every mixed
partial the geometry needs at that base point.

Coefficients are stored as Taylor coefficients (partials divided by the
multi-index factorial). A trailing axis of ``coef`` runs over monomials; any
leading axes are batch or tensor axes and broadcast like numpy arrays.

Model functions receive coordinate *components* (sequences indexed by
alpha) and should use the math helpers of this module (:func:`sqrt`,
:func:`exp`, ...) so that they work on floats, ndarrays and jets alike.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import product

import numpy as np

from .errors import ConfigurationError

MAX_V_ORDER = 4
MAX_X_ORDER = 2


def _monomials(nvars, order):
    """Exponent tuples of total degree <= order, graded then lexicographic."""
    out = []
    for degree in range(order + 1):
        out.extend(_exact_degree(nvars, degree))
    return out


def _exact_degree(nvars, degree):
    if nvars == 0:
        return [()] if degree == 0 else []
    if nvars == 1:
        return [(degree,)]
    out = []
    for first in range(degree, -1, -1):
        for rest in _exact_degree(nvars - 1, degree - first):
            out.append((first,) + rest)
    return out


def _pair_table(monos):
    """All (i, j, k) with monos[i] + monos[j] == monos[k]."""
    index = {m: i for i, m in enumerate(monos)}
    rows = []
    for i, a in enumerate(monos):
        for j, b in enumerate(monos):
            c = tuple(p + q for p, q in zip(a, b))
            k = index.get(c)
            if k is not None:
                rows.append((i, j, k))
    return np.array(rows, dtype=np.intp).reshape(-1, 3)


class JetSpace:
    """Index bookkeeping for jets with fixed dimension and order caps.

    Use :func:`jet_space` to obtain cached instances.
    """

    def __init__(self, dim, x_order, v_order):
        self.dim = dim
        self.x_order = x_order
        self.v_order = v_order
        self.total_order = x_order + v_order
        xm = _monomials(dim, x_order)
        vm = _monomials(dim, v_order)
        self.n_x = len(xm)
        self.n_v = len(vm)
        self.size = self.n_x * self.n_v
        self.monomials = [a + b for a in xm for b in vm]
        self.index = {m: i for i, m in enumerate(self.monomials)}
        self.factorials = np.array(
            [math.prod(math.factorial(e) for e in m) for m in self.monomials], dtype=float
        )
        self.degrees = np.array([sum(m) for m in self.monomials])

        px = _pair_table(xm)
        pv = _pair_table(vm)
        nv = self.n_v
        i = (px[:, None, 0] * nv + pv[None, :, 0]).ravel()
        j = (px[:, None, 1] * nv + pv[None, :, 1]).ravel()
        k = (px[:, None, 2] * nv + pv[None, :, 2]).ravel()
        order = np.argsort(k, kind="stable")
        self.mul_i = i[order]
        self.mul_j = j[order]
        k = k[order]
        self.mul_starts = np.flatnonzero(np.r_[True, k[1:] != k[:-1]])
        assert len(self.mul_starts) == self.size

    def __repr__(self):
        return f"JetSpace(dim={self.dim}, x_order={self.x_order}, v_order={self.v_order})"

    def slot(self, group, alpha):
        """Position of input ``group`` ('x' or 'v') component ``alpha``."""
        if group == "x":
            return alpha
        if group == "v":
            return self.dim + alpha
        raise ConfigurationError(f"unknown slot group {group!r}")

    def unit(self, group, alpha):
        m = [0] * (2 * self.dim)
        m[self.slot(group, alpha)] = 1
        return tuple(m)

    def constant(self, value):
        value = np.asarray(value, dtype=float)
        coef = np.zeros(value.shape + (self.size,))
        coef[..., 0] = value
        return Jet(self, coef)

    def variable(self, group, alpha, value):
        """The jet of the coordinate function ``group^alpha`` at ``value``."""
        jet = self.constant(value)
        cap = self.x_order if group == "x" else self.v_order
        if cap >= 1:
            jet.coef[..., self.index[self.unit(group, alpha)]] = 1.0
        return jet

    @lru_cache(maxsize=None)
    def _restriction(self, other_x, other_v):
        return np.array(
            [self.index[m] for m in jet_space(self.dim, other_x, other_v).monomials], dtype=np.intp
        )

    @lru_cache(maxsize=None)
    def _derivative_map(self, slot):
        group_cap = self.x_order if slot < self.dim else self.v_order
        if group_cap == 0:
            raise ConfigurationError(
                f"order cap exceeded: cannot differentiate slot {slot} of {self!r}"
            )
        if slot < self.dim:
            target = jet_space(self.dim, self.x_order - 1, self.v_order)
        else:
            target = jet_space(self.dim, self.x_order, self.v_order - 1)
        src = []
        fac = []
        for m in target.monomials:
            up = list(m)
            up[slot] += 1
            src.append(self.index[tuple(up)])
            fac.append(up[slot])
        return target, np.array(src, dtype=np.intp), np.array(fac, dtype=float)


@lru_cache(maxsize=None)
def jet_space(dim, x_order, v_order) -> JetSpace:
    if dim < 1:
        raise ConfigurationError("jet dimension must be positive")
    if x_order < 0 or v_order < 0:
        raise ConfigurationError("jet orders must be non-negative")
    return JetSpace(dim, x_order, v_order)


def common_space(a: JetSpace, b: JetSpace) -> JetSpace:
    if a is b:
        return a
    if a.dim != b.dim:
        raise ConfigurationError(f"jets of different dimension: {a.dim} vs {b.dim}")
    return jet_space(a.dim, min(a.x_order, b.x_order), min(a.v_order, b.v_order))


class Jet:
    """Truncated Taylor expansion of a function of (x, v).

    Parameters
    ----------
    space : JetSpace
    coef : ndarray, shape (..., space.size)
        Taylor coefficients; ``coef[..., 0]`` is the value.
    """

    __slots__ = ("space", "coef")
    __array_priority__ = 1000

    def __init__(self, space, coef):
        self.space = space
        self.coef = coef

    # -- inspection -------------------------------------------------------
    @property
    def value(self):
        return self.coef[..., 0]

    @property
    def shape(self):
        return self.coef.shape[:-1]

    def __len__(self):
        return self.shape[0]

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        if any(i is Ellipsis for i in idx) or len(idx) > len(self.shape):
            raise IndexError("jet indexing addresses leading axes only")
        return Jet(self.space, self.coef[idx])

    def __repr__(self):
        return f"Jet(value={self.value!r}, space={self.space!r})"

    def __float__(self):
        return float(self.value)

    def partial(self, multi_index):
        """Mixed partial derivative of order ``multi_index``.

        ``multi_index`` is either a tuple of length ``2 * dim`` (x slots first)
        or a mapping ``{("x"|"v", alpha): power}``.
        """
        if isinstance(multi_index, dict):
            m = [0] * (2 * self.space.dim)
            for (group, alpha), power in multi_index.items():
                m[self.space.slot(group, alpha)] += power
            multi_index = tuple(m)
        multi_index = tuple(int(p) for p in multi_index)
        if len(multi_index) != 2 * self.space.dim:
            raise ConfigurationError("multi-index length must be 2 * dim")
        k = self.space.index.get(multi_index)
        if k is None:
            raise ConfigurationError(
                f"order cap exceeded: partial {multi_index} not stored in {self.space!r}"
            )
        return self.coef[..., k] * self.space.factorials[k]

    # -- structural operations -------------------------------------------
    def truncate(self, space):
        if space is self.space:
            return self
        if space.dim != self.space.dim or space.x_order > self.space.x_order or (
            space.v_order > self.space.v_order
        ):
            raise ConfigurationError(f"cannot truncate {self.space!r} to {space!r}")
        idx = self.space._restriction(space.x_order, space.v_order)
        return Jet(space, self.coef[..., idx])

    def derivative(self, group, alpha):
        """Jet of the partial derivative in slot ``group^alpha``.

        The result lives in the space with that group's cap lowered by one.
        """
        target, src, fac = self.space._derivative_map(self.space.slot(group, alpha))
        return Jet(target, self.coef[..., src] * fac)

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            space = common_space(self.space, other.space)
            return self.truncate(space), other.truncate(space), space
        return None

    def __add__(self, other):
        pair = self._coerce(other)
        if pair is not None:
            a, b, space = pair
            return Jet(space, a.coef + b.coef)
        coef = np.array(self.coef, copy=True) if np.ndim(other) == 0 else None
        if coef is None:
            other = np.asarray(other, dtype=float)
            coef = np.broadcast_to(self.coef, np.broadcast_shapes(self.shape, other.shape) + (self.space.size,)).copy()
        coef[..., 0] += other
        return Jet(self.space, coef)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.coef)

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        pair = self._coerce(other)
        if pair is not None:
            a, b, space = pair
            return Jet(space, _mul(a.coef, b.coef, space))
        other = np.asarray(other, dtype=float)
        return Jet(self.space, self.coef * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * reciprocal(other)
        other = np.asarray(other, dtype=float)
        return Jet(self.space, self.coef / other[..., None])

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)):
            p = int(p)
            if p < 0:
                return reciprocal(self) ** (-p)
            result = None
            base = self
            while p:
                if p & 1:
                    result = base if result is None else result * base
                p >>= 1
                if p:
                    base = base * base
            return result if result is not None else self.space.constant(np.ones(self.shape))
        return power(self, p)

    # comparisons act on the value; used for branching inside model code
    def __lt__(self, other):
        return self.value < _value(other)

    def __le__(self, other):
        return self.value <= _value(other)

    def __gt__(self, other):
        return self.value > _value(other)

    def __ge__(self, other):
        return self.value >= _value(other)


def _value(x):
    return x.value if isinstance(x, Jet) else x


def _mul(a, b, space):
    prod = a[..., space.mul_i] * b[..., space.mul_j]
    return np.add.reduceat(prod, space.mul_starts, axis=-1)


def value(x):
    """Plain value of a jet, or ``x`` itself."""
    return _value(x)


def stack(jets, axis=0):
    """Stack jets along a new tensor axis (negative axes count from the end)."""
    jets = list(jets)
    space = jets[0].space
    for j in jets[1:]:
        space = common_space(space, j.space)
    coefs = np.broadcast_arrays(*[j.truncate(space).coef for j in jets])
    ndim = coefs[0].ndim - 1
    if axis < 0:
        axis += ndim + 1
    if not 0 <= axis <= ndim:
        raise ValueError(f"axis out of range for jets of tensor rank {ndim}")
    return Jet(space, np.stack(coefs, axis=axis))


def grad(jet, group):
    """Stack the partials in ``group`` ('x' or 'v') along a new trailing axis."""
    return stack([jet.derivative(group, a) for a in range(jet.space.dim)], axis=-1)


def variables(space, group, values):
    """Jet vector of coordinate functions, shape ``values.shape``."""
    values = np.asarray(values, dtype=float)
    return stack([space.variable(group, a, values[..., a]) for a in range(space.dim)], axis=-1)


def contract(subscripts, a, b):
    """``einsum`` over tensor axes with jet products on the coefficient axis.

    ``subscripts`` names only tensor axes, e.g. ``"ij,jk->ik"``; leading
    batch axes are handled with ``...``. Either operand may be a plain array.
    """
    lhs, out = subscripts.split("->")
    sa, sb = lhs.split(",")
    if isinstance(a, Jet) and isinstance(b, Jet):
        space = common_space(a.space, b.space)
        ca = a.truncate(space).coef[..., space.mul_i]
        cb = b.truncate(space).coef[..., space.mul_j]
        prod = np.einsum(f"...{sa}p,...{sb}p->...{out}p", ca, cb)
        return Jet(space, np.add.reduceat(prod, space.mul_starts, axis=-1))
    if isinstance(a, Jet):
        return Jet(a.space, np.einsum(f"...{sa}p,...{sb}->...{out}p", a.coef, np.asarray(b, float)))
    if isinstance(b, Jet):
        return Jet(b.space, np.einsum(f"...{sa},...{sb}p->...{out}p", np.asarray(a, float), b.coef))
    return np.einsum(f"...{sa},...{sb}->...{out}", a, b)


def inverse(m: Jet) -> Jet:
    """Matrix inverse of a jet-valued matrix (last two tensor axes).

    Neumann series around the value, exact up to the space's total order.
    """
    m0 = m.value
    m0inv = np.linalg.inv(m0)
    h = Jet(m.space, m.coef.copy())
    h.coef[..., 0] = 0.0
    out = m.space.constant(m0inv)
    term = out
    for _ in range(m.space.total_order):
        term = -contract("ij,jk->ik", m0inv, contract("ij,jk->ik", h, term))
        out = out + term
    return out


# -- univariate functions -------------------------------------------------

def _compose(a: Jet, taylor):
    """``sum_k taylor[k] * (a - a0)^k`` via Horner; taylor[k] are arrays."""
    h = Jet(a.space, a.coef.copy())
    h.coef[..., 0] = 0.0
    K = a.space.total_order
    result = a.space.constant(taylor[K])
    for k in range(K - 1, -1, -1):
        result = result * h + taylor[k]
    return result


def reciprocal(x):
    if not isinstance(x, Jet):
        return 1.0 / np.asarray(x, dtype=float) if np.ndim(x) else 1.0 / x
    a0 = x.value
    K = x.space.total_order
    taylor = [(-1.0) ** k / a0 ** (k + 1) for k in range(K + 1)]
    return _compose(x, taylor)


def power(x, p):
    if not isinstance(x, Jet):
        return np.power(x, p)
    a0 = x.value
    K = x.space.total_order
    taylor = []
    coeff = 1.0
    for k in range(K + 1):
        taylor.append(coeff * a0 ** (p - k))
        coeff *= (p - k) / (k + 1)
    return _compose(x, taylor)


def sqrt(x):
    if not isinstance(x, Jet):
        return np.sqrt(x)
    return power(x, 0.5)


def exp(x):
    if not isinstance(x, Jet):
        return np.exp(x)
    e = np.exp(x.value)
    return _compose(x, [e / math.factorial(k) for k in range(x.space.total_order + 1)])


def log(x):
    if not isinstance(x, Jet):
        return np.log(x)
    a0 = x.value
    taylor = [np.log(a0)]
    for k in range(1, x.space.total_order + 1):
        taylor.append((-1.0) ** (k + 1) / (k * a0 ** k))
    return _compose(x, taylor)


def sin(x):
    if not isinstance(x, Jet):
        return np.sin(x)
    s, c = np.sin(x.value), np.cos(x.value)
    cycle = [s, c, -s, -c]
    return _compose(x, [cycle[k % 4] / math.factorial(k) for k in range(x.space.total_order + 1)])


def cos(x):
    if not isinstance(x, Jet):
        return np.cos(x)
    s, c = np.sin(x.value), np.cos(x.value)
    cycle = [c, -s, -c, s]
    return _compose(x, [cycle[k % 4] / math.factorial(k) for k in range(x.space.total_order + 1)])


# -- lifting --------------------------------------------------------------

def components(x):
    """Split ``(..., dim)`` coordinates into a list of ``dim`` arrays."""
    x = np.asarray(x, dtype=float)
    return [x[..., a] for a in range(x.shape[-1])]


def _check_caps(v_order, x_order):
    if not (0 <= v_order <= MAX_V_ORDER) or not (0 <= x_order <= MAX_X_ORDER):
        raise ConfigurationError(
            f"order cap exceeded: requested (v_order={v_order}, x_order={x_order}), "
            f"caps are v <= {MAX_V_ORDER}, x <= {MAX_X_ORDER}"
        )


def lift(f, x, v, v_order, x_order):
    """Evaluate ``f(x, v)`` on jets, returning all partials up to the caps.

    Parameters
    ----------
    f : callable
        ``f(xs, vs)`` taking coordinate component sequences.
    x, v : array_like, shape (..., dim)
        Base point and vector; leading axes are batch axes.
    v_order, x_order : int
        Per-group truncation orders (at most 4 and 2).
    """
    _check_caps(v_order, x_order)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.shape[-1] != v.shape[-1]:
        raise ConfigurationError("x and v must have the same dimension")
    x, v = np.broadcast_arrays(x, v)
    dim = x.shape[-1]
    space = jet_space(dim, x_order, v_order)
    xs = [space.variable("x", a, x[..., a]) for a in range(dim)]
    vs = [space.variable("v", a, v[..., a]) for a in range(dim)]
    out = f(xs, vs)
    if not isinstance(out, Jet):
        out = space.constant(np.broadcast_to(np.asarray(out, float), x.shape[:-1]))
    if out.space is not space:
        raise ConfigurationError("lifted function returned a jet from a different space")
    return out


_FD_STENCILS = {
    0: {0: 1.0},
    1: {-1: -0.5, 1: 0.5},
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
    4: {-2: 1.0, -1: -4.0, 0: 6.0, 1: -4.0, 2: 1.0},
}


def lift_fd(f, x, v, v_order, x_order, scale=1.0):
    """Finite-difference stand-in for :func:`lift`.

    Mixed partials come from tensor products of second-order central
    stencils with step ``eps**(1/(k+2)) * scale * max(1, |z|)`` for a
    partial of total order ``k`` (the cube-root rule for k = 1). Intended
    for cross-validation of functions without jet support; accuracy
    degrades quickly above order 2.
    """
    _check_caps(v_order, x_order)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    x, v = np.broadcast_arrays(x, v)
    dim = x.shape[-1]
    space = jet_space(dim, x_order, v_order)
    z0 = np.concatenate([x, v], axis=-1)
    eps = np.finfo(float).eps
    coef = np.zeros(x.shape[:-1] + (space.size,))
    for k, m in enumerate(space.monomials):
        order = sum(m)
        h = eps ** (1.0 / (order + 2)) * scale * np.maximum(1.0, np.abs(z0))
        active = [s for s, p in enumerate(m) if p]
        total = 0.0
        for choice in product(*[list(_FD_STENCILS[m[s]].items()) for s in active]):
            offsets = [0] * (2 * dim)
            weight = 1.0
            for s, (o, w) in zip(active, choice):
                offsets[s] = o
                weight *= w
            total = total + weight * _eval_fd(f, z0, dim, offsets, h)
        denom = np.ones(x.shape[:-1])
        for s in active:
            denom = denom * h[..., s] ** m[s]
        coef[..., k] = total / denom / space.factorials[k]
    return Jet(space, coef)


def _eval_fd(f, z0, dim, offsets, h):
    z = z0.copy()
    for s, o in enumerate(offsets):
        if o:
            z[..., s] += o * h[..., s]
    return np.asarray(f(components(z[..., :dim]), components(z[..., dim:])), float)
