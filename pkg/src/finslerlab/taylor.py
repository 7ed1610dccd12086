"""Graded truncated Taylor jets over the chart variables (x^1..x^n, y^1..y^n).

A jet stores the Taylor coefficients c[alpha, beta] of a smooth function at a
chart point, for every multi-index with |alpha| <= x_cap and |beta| <= y_cap.
Coefficients are dense over a precomputed index table, so arithmetic reduces
to gathers and a sparse scatter.  Jets may carry leading batch axes, which is
how jet-valued vectors and matrices (g_ij, g^ij, G^l) are represented.

Variables are numbered 0..n-1 for x and n..2n-1 for y.
"""

from __future__ import annotations

import functools
import itertools
import math
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse

from .errors import ConfigurationError, OrderBudgetError, SingularEvaluationError


class DegreeCaps(NamedTuple):
    n: int
    x_cap: int = 1
    y_cap: int = 5

    @property
    def max_order(self) -> int:
        return self.x_cap + self.y_cap


def _monomials(n: int, cap: int) -> list[tuple[int, ...]]:
    out = []
    for d in range(cap + 1):
        for combo in itertools.combinations_with_replacement(range(n), d):
            e = [0] * n
            for k in combo:
                e[k] += 1
            out.append(tuple(e))
    return out


class _Table:
    """Index bookkeeping for one set of caps."""

    def __init__(self, caps: DegreeCaps):
        n = caps.n
        xs = _monomials(n, caps.x_cap)
        ys = _monomials(n, caps.y_cap)
        index = [a + b for a in xs for b in ys]
        index.sort(key=lambda m: (sum(m), m[::-1]))
        # constant term first, then by total degree
        self.caps = caps
        self.index = index
        self.position = {m: p for p, m in enumerate(index)}
        self.size = len(index)
        self.factorial = np.array(
            [math.prod(math.factorial(k) for k in m) for m in index], dtype=float
        )

    @functools.cached_property
    def product(self):
        """(I, J, S): coefficient gathers and the result<-pair scatter matrix."""
        caps = self.caps
        n = caps.n
        rows_i, rows_j, cols = [], [], []
        for p, mp in enumerate(self.index):
            for q, mq in enumerate(self.index):
                m = tuple(a + b for a, b in zip(mp, mq))
                if sum(m[:n]) > caps.x_cap or sum(m[n:]) > caps.y_cap:
                    continue
                rows_i.append(p)
                rows_j.append(q)
                cols.append(self.position[m])
        npairs = len(cols)
        scatter = scipy.sparse.csr_matrix(
            (np.ones(npairs), (np.array(cols), np.arange(npairs))),
            shape=(self.size, npairs),
        )
        return np.array(rows_i), np.array(rows_j), scatter


@functools.lru_cache(maxsize=None)
def _table(caps: DegreeCaps) -> _Table:
    return _Table(caps)


@functools.lru_cache(maxsize=None)
def _derivative_map(caps: DegreeCaps, var: int):
    """Source positions and factors for d/d(var); result has reduced caps."""
    n = caps.n
    if var < n:
        if caps.x_cap < 1:
            raise OrderBudgetError(f"no x-derivative budget left for variable {var}")
        new = DegreeCaps(n, caps.x_cap - 1, caps.y_cap)
    else:
        if caps.y_cap < 1:
            raise OrderBudgetError(f"no y-derivative budget left for variable {var}")
        new = DegreeCaps(n, caps.x_cap, caps.y_cap - 1)
    src = _table(caps)
    dst = _table(new)
    pos = np.empty(dst.size, dtype=int)
    fac = np.empty(dst.size)
    for t, m in enumerate(dst.index):
        up = list(m)
        up[var] += 1
        pos[t] = src.position[tuple(up)]
        fac[t] = up[var]
    return new, pos, fac


@functools.lru_cache(maxsize=None)
def _truncation_map(src: DegreeCaps, dst: DegreeCaps) -> np.ndarray:
    s = _table(src)
    return np.array([s.position[m] for m in _table(dst).index])


@functools.lru_cache(maxsize=None)
def _tensor_map(caps: DegreeCaps, order: int, group: str):
    """Gather positions/factors turning coefficients into a full symmetric
    derivative tensor of the given order over the x or y variables."""
    n = caps.n
    t = _table(caps)
    offset = 0 if group == "x" else n
    shape = (n,) * order
    pos = np.empty(shape, dtype=int)
    fac = np.empty(shape)
    for idx in itertools.product(range(n), repeat=order):
        m = [0] * (2 * n)
        for k in idx:
            m[offset + k] += 1
        m = tuple(m)
        if m not in t.position:
            raise OrderBudgetError(f"order-{order} {group}-tensor exceeds caps {caps}")
        pos[idx] = t.position[m]
        fac[idx] = t.factorial[t.position[m]]
    return pos, fac


def _common(a: DegreeCaps, b: DegreeCaps) -> DegreeCaps:
    if a.n != b.n:
        raise ConfigurationError(f"dimension mismatch: {a.n} vs {b.n}")
    return DegreeCaps(a.n, min(a.x_cap, b.x_cap), min(a.y_cap, b.y_cap))


class TaylorJet:
    """Truncated Taylor expansion, possibly batched over leading axes."""

    __slots__ = ("caps", "coeffs")
    __array_priority__ = 100

    def __init__(self, caps: DegreeCaps, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1] != _table(caps).size:
            raise ConfigurationError("coefficient array does not match caps")
        self.caps = caps
        self.coeffs = coeffs

    # -- structure -------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[:-1]

    @property
    def value(self):
        return self.coeffs[..., 0]

    def __getitem__(self, key) -> "TaylorJet":
        # indexes batch axes only; the coefficient axis is never addressed
        return TaylorJet(self.caps, self.coeffs[key])

    def __len__(self) -> int:
        return self.shape[0]

    def __repr__(self) -> str:
        return f"TaylorJet(caps={tuple(self.caps)}, shape={self.shape}, value={self.value!r})"

    def truncate(self, caps: DegreeCaps) -> "TaylorJet":
        if caps == self.caps:
            return self
        if caps.x_cap > self.caps.x_cap or caps.y_cap > self.caps.y_cap:
            raise OrderBudgetError(f"cannot raise caps {self.caps} to {caps}")
        return TaylorJet(caps, self.coeffs[..., _truncation_map(self.caps, caps)])

    def sum(self, axis=None) -> "TaylorJet":
        nb = len(self.shape)
        if axis is None:
            axis = tuple(range(nb))
        elif isinstance(axis, int):
            axis = (axis % nb,)
        else:
            axis = tuple(a % nb for a in axis)
        return TaylorJet(self.caps, self.coeffs.sum(axis=axis))

    def expand(self, axis: int) -> "TaylorJet":
        nb = len(self.shape)
        return TaylorJet(self.caps, np.expand_dims(self.coeffs, axis % (nb + 1)))

    # -- arithmetic ------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, TaylorJet):
            caps = _common(self.caps, other.caps)
            return self.truncate(caps).coeffs, other.truncate(caps).coeffs, caps
        return None

    def __add__(self, other):
        c = self._coerce(other)
        if c is not None:
            a, b, caps = c
            return TaylorJet(caps, a + b)
        out = self.coeffs.copy() if np.ndim(other) == 0 else np.broadcast_to(
            self.coeffs, np.broadcast_shapes(self.shape, np.shape(other)) + self.coeffs.shape[-1:]
        ).copy()
        out[..., 0] += other
        return TaylorJet(self.caps, out)

    __radd__ = __add__

    def __neg__(self):
        return TaylorJet(self.caps, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        c = self._coerce(other)
        if c is None:
            return TaylorJet(self.caps, self.coeffs * np.asarray(other, dtype=float)[..., None])
        a, b, caps = c
        i, j, scatter = _table(caps).product
        pairs = a[..., i] * b[..., j]
        lead = pairs.shape[:-1]
        out = (scatter @ pairs.reshape(-1, pairs.shape[-1]).T).T
        return TaylorJet(caps, np.asarray(out).reshape(lead + (scatter.shape[0],)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TaylorJet):
            return self * reciprocal(other)
        return TaylorJet(self.caps, self.coeffs / np.asarray(other, dtype=float)[..., None])

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, r):
        if isinstance(r, (int, np.integer)) and r >= 0:
            out = constant(1.0, self.caps) if r == 0 else self
            for _ in range(int(r) - 1):
                out = out * self
            return out
        return power(self, float(r))

    # -- differentiation -------------------------------------------------
    def derivative(self, var: int) -> "TaylorJet":
        new, pos, fac = _derivative_map(self.caps, var)
        return TaylorJet(new, self.coeffs[..., pos] * fac)

    def dx(self, k: int) -> "TaylorJet":
        return self.derivative(k)

    def dy(self, k: int) -> "TaylorJet":
        return self.derivative(self.caps.n + k)

    def grad_y(self) -> "TaylorJet":
        """Jet of the y-gradient, with a new trailing batch axis of length n."""
        parts = [self.dy(k) for k in range(self.caps.n)]
        return TaylorJet(parts[0].caps, np.stack([p.coeffs for p in parts], axis=-2))

    def grad_x(self) -> "TaylorJet":
        parts = [self.dx(k) for k in range(self.caps.n)]
        return TaylorJet(parts[0].caps, np.stack([p.coeffs for p in parts], axis=-2))

    def tensor_y(self, order: int) -> np.ndarray:
        """All order-k y-partials at the base point, as an (..., n, ..., n) array."""
        pos, fac = _tensor_map(self.caps, order, "y")
        return self.coeffs[..., pos] * fac

    def drop_x(self) -> "TaylorJet":
        return self.truncate(DegreeCaps(self.caps.n, 0, self.caps.y_cap))


def extract_partial(u: TaylorJet, alpha: Sequence[int], beta: Sequence[int]):
    """True mixed partial d^{|a|+|b|} u / dx^a dy^b at the base point."""
    m = tuple(alpha) + tuple(beta)
    t = _table(u.caps)
    if len(m) != 2 * u.caps.n or min(m) < 0:
        raise OrderBudgetError(f"malformed multi-index {m}")
    p = t.position.get(m)
    if p is None:
        raise OrderBudgetError(f"multi-index {m} outside truncation set for caps {u.caps}")
    return u.coeffs[..., p] * t.factorial[p]


def constant(value, caps: DegreeCaps) -> TaylorJet:
    value = np.asarray(value, dtype=float)
    c = np.zeros(value.shape + (_table(caps).size,))
    c[..., 0] = value
    return TaylorJet(caps, c)


def seed_variable(index: int, value: float, caps: DegreeCaps) -> TaylorJet:
    """Jet of the coordinate function number ``index`` (x first, then y)."""
    n = caps.n
    if not 0 <= index < 2 * n:
        raise ConfigurationError(f"variable index {index} outside 0..{2 * n - 1}")
    cap = caps.x_cap if index < n else caps.y_cap
    if cap < 1:
        raise ConfigurationError(f"cannot seed variable {index}: its group has cap 0")
    t = _table(caps)
    c = np.zeros(t.size)
    c[0] = value
    e = [0] * (2 * n)
    e[index] = 1
    c[t.position[tuple(e)]] = 1.0
    return TaylorJet(caps, c)


def seed_point(x, y, caps: DegreeCaps) -> tuple[TaylorJet, TaylorJet]:
    """Batched coordinate jets (x-vector, y-vector) at a chart point.

    A group whose cap is zero is seeded as constants.
    """
    n = caps.n
    t = _table(caps)
    out = []
    for offset, vals, cap in ((0, x, caps.x_cap), (n, y, caps.y_cap)):
        c = np.zeros((n, t.size))
        c[:, 0] = np.asarray(vals, dtype=float)
        if cap >= 1:
            for k in range(n):
                e = [0] * (2 * n)
                e[offset + k] = 1
                c[k, t.position[tuple(e)]] = 1.0
        out.append(TaylorJet(caps, c))
    return out[0], out[1]


def stack(jets: Sequence[TaylorJet], axis: int = 0) -> TaylorJet:
    caps = jets[0].caps
    for j in jets[1:]:
        caps = _common(caps, j.caps)
    arrs = [j.truncate(caps).coeffs for j in jets]
    nb = len(jets[0].shape)
    return TaylorJet(caps, np.stack(arrs, axis=axis % (nb + 1)))


# -- univariate Taylor coefficients of the elementary functions -------------

def _series_reciprocal(p: np.ndarray, order: int) -> np.ndarray:
    """Coefficients of 1/p(h) through h^order; p[0] != 0. Broadcasts over p[1:]."""
    out = np.zeros((order + 1,) + p.shape[1:])
    out[0] = 1.0 / p[0]
    for k in range(1, order + 1):
        s = 0.0
        for j in range(1, min(k, p.shape[0] - 1) + 1):
            s = s + p[j] * out[k - j]
        out[k] = -s / p[0]
    return out


def _taylor_coefficients(f: str, u0: np.ndarray, order: int, r: float | None = None) -> np.ndarray:
    """f^(k)(u0)/k! for k = 0..order, stacked on axis 0."""
    ks = np.arange(order + 1).reshape((-1,) + (1,) * np.ndim(u0))
    if f == "exp":
        fact = np.array([math.factorial(k) for k in range(order + 1)], dtype=float)
        return np.exp(u0)[None] / fact.reshape(ks.shape)
    if f == "log":
        out = np.empty((order + 1,) + np.shape(u0))
        out[0] = np.log(u0)
        for k in range(1, order + 1):
            out[k] = (-1.0) ** (k + 1) / (k * u0**k)
        return out
    if f == "power":
        out = np.empty((order + 1,) + np.shape(u0))
        binom = 1.0
        for k in range(order + 1):
            out[k] = binom * u0 ** (r - k)
            binom *= (r - k) / (k + 1)
        return out
    if f == "arctan":
        # d/dh arctan(u0 + h) = 1/(1 + u0^2 + 2 u0 h + h^2)
        p = np.stack([1.0 + u0**2, 2.0 * u0, np.ones_like(u0)])
        d = _series_reciprocal(p, order - 1) if order >= 1 else None
        out = np.empty((order + 1,) + np.shape(u0))
        out[0] = np.arctan(u0)
        for k in range(1, order + 1):
            out[k] = d[k - 1] / k
        return out
    raise ConfigurationError(f"unknown elementary function {f!r}")


def _check_domain(f: str, u0: np.ndarray, r: float | None) -> None:
    bad = None
    if f == "log" or (f == "power" and r is not None and not float(r).is_integer()):
        bad = ~(u0 > 0)
    elif f == "power" and r is not None and r < 0:
        bad = u0 == 0
    if bad is not None and np.any(bad):
        offending = np.asarray(u0)[bad].ravel()[0]
        raise SingularEvaluationError(f"{f}(r={r}) evaluated at {offending!r}", float(offending))


def compose_elementary(f: str, u: TaylorJet, r: float | None = None) -> TaylorJet:
    """Jet of f(u) for f in {exp, log, sqrt, arctan, reciprocal, power}."""
    if f == "sqrt":
        f, r = "power", 0.5
    elif f == "reciprocal":
        f, r = "power", -1.0
    elif f == "power" and r is None:
        raise ConfigurationError("power needs an exponent")
    u0 = np.asarray(u.value, dtype=float)
    _check_domain(f, u0, r)
    order = u.caps.max_order
    coef = _taylor_coefficients(f, u0, order, r)
    du = TaylorJet(u.caps, u.coeffs.copy())
    du.coeffs[..., 0] = 0.0
    out = constant(coef[order], u.caps)
    for k in range(order - 1, -1, -1):
        out = out * du + coef[k]
    return out


def exp(u: TaylorJet) -> TaylorJet:
    return compose_elementary("exp", u)


def log(u: TaylorJet) -> TaylorJet:
    return compose_elementary("log", u)


def sqrt(u: TaylorJet) -> TaylorJet:
    return compose_elementary("sqrt", u)


def arctan(u: TaylorJet) -> TaylorJet:
    return compose_elementary("arctan", u)


def reciprocal(u: TaylorJet) -> TaylorJet:
    return compose_elementary("reciprocal", u)


def power(u: TaylorJet, r: float) -> TaylorJet:
    return compose_elementary("power", u, r)


# -- jet-valued linear algebra ---------------------------------------------

def matmul(a: TaylorJet, b: TaylorJet) -> TaylorJet:
    """Jet-valued matrix product over the last two batch axes (a) / first of b."""
    if len(b.shape) == 1:
        return (a * b.expand(0)).sum(axis=-1)
    return (a.expand(-1) * b.expand(0)).sum(axis=-2)


def inverse(m: TaylorJet) -> TaylorJet:
    """Jet of the inverse of a jet-valued square matrix.

    Solves m X = I order by order: with m = m0 + N (N without constant term),
    X <- m0^{-1} (I - N X) converges in max_order + 1 sweeps, each sweep fixing
    the next total degree.
    """
    n = m.shape[-1]
    m0 = m.value
    try:
        inv0 = np.linalg.inv(m0)
    except np.linalg.LinAlgError as exc:
        raise SingularEvaluationError("singular matrix in jet inverse", float("nan")) from exc
    nil = TaylorJet(m.caps, m.coeffs.copy())
    nil.coeffs[..., 0] = 0.0
    inv0_jet = constant(inv0, m.caps)
    x = inv0_jet
    eye = constant(np.eye(n), m.caps)
    for _ in range(m.caps.max_order):
        x = matmul(inv0_jet, eye - matmul(nil, x))
    return x
