"""Finsler energy families: Riemannian, Finsleroid-Finsler and conformal wrapper.

Every family is evaluated two ways.  ``energy_jet`` produces the truncated
Taylor jet used by the tensor machinery; ``energy_value`` is a plain float
evaluation (Finsleroid angle in its piecewise form) that the finite-difference
oracle differentiates.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import taylor
from .errors import InadmissiblePointError, SpecError
from .taylor import DegreeCaps, TaylorJet

FAMILIES = ("riemannian", "finsleroid", "conformal")
AXIS_EPS = 1e-6  # q must exceed AXIS_EPS * sqrt(a(y, y))
CONE_HALF_ANGLE = 1e-2  # samplers keep this far (radians) from the +-axis; fifth-order jets lose ~(|y|/q)^4 digits


@dataclass(frozen=True)
class PolyScalar:
    """Polynomial of degree <= 2 in the position variables."""

    terms: tuple[tuple[tuple[int, ...], float], ...]
    n: int

    @classmethod
    def constant(cls, value: float, n: int) -> "PolyScalar":
        return cls((((0,) * n, float(value)),), n)

    @classmethod
    def linear(cls, coeffs: Sequence[float], const: float = 0.0) -> "PolyScalar":
        n = len(coeffs)
        terms = [((0,) * n, float(const))] if const else []
        for k, c in enumerate(coeffs):
            if c:
                e = [0] * n
                e[k] = 1
                terms.append((tuple(e), float(c)))
        return cls(tuple(terms), n)

    def __post_init__(self):
        for powers, _ in self.terms:
            if len(powers) != self.n:
                raise SpecError(f"exponent vector {powers} has length != {self.n}")
            if min(powers, default=0) < 0 or sum(powers) > 2:
                raise SpecError(f"exponent vector {powers} outside degree <= 2")

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(sum(c * np.prod(x ** np.array(p)) for p, c in self.terms))

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(self.n)
        for p, c in self.terms:
            p = np.array(p)
            for k in range(self.n):
                if p[k]:
                    q = p.copy()
                    q[k] -= 1
                    out[k] += c * p[k] * np.prod(x**q)
        return out

    def jet(self, xs: TaylorJet) -> TaylorJet:
        """Evaluate on a batched x-coordinate jet (shape (n,))."""
        out = taylor.constant(0.0, xs.caps)
        for p, c in self.terms:
            term = taylor.constant(c, xs.caps)
            for k, e in enumerate(p):
                for _ in range(e):
                    term = term * xs[k]
            out = out + term
        return out

    def is_constant(self) -> bool:
        return all(sum(p) == 0 for p, _ in self.terms)

    def to_json(self) -> dict:
        return {"terms": [{"powers": list(p), "coeff": c} for p, c in self.terms]}


@dataclass(frozen=True)
class MetricSpec:
    dimension: int
    family: str
    a: tuple[tuple[PolyScalar, ...], ...] | None = None
    b: tuple[PolyScalar, ...] | None = None
    charge: PolyScalar | None = None
    alpha: PolyScalar | None = None
    inner: "MetricSpec | None" = None
    auto_normalize_axis: bool = False
    domain_center: tuple[float, ...] | None = None
    domain_radius: float = 0.3

    @property
    def center(self) -> np.ndarray:
        if self.domain_center is None:
            return np.zeros(self.dimension)
        return np.array(self.domain_center, dtype=float)

    def base(self) -> "MetricSpec":
        """The innermost non-conformal spec."""
        return self.inner.base() if self.family == "conformal" else self

    def total_scale(self) -> PolyScalar | None:
        """Sum of all conformal log-scales wrapped around the base metric."""
        if self.family != "conformal":
            return None
        inner = self.inner.total_scale()
        if inner is None:
            return self.alpha
        return PolyScalar(self.alpha.terms + inner.terms, self.dimension)

    def to_json(self) -> dict:
        doc: dict[str, Any] = {"dimension": self.dimension, "family": self.family}
        if self.family == "conformal":
            doc["inner"] = self.inner.to_json()
            doc["alpha"] = self.alpha.to_json()
        else:
            doc["a"] = [[p.to_json() for p in row] for row in self.a]
        if self.family == "finsleroid":
            doc["b"] = [p.to_json() for p in self.b]
            doc["charge"] = self.charge.to_json()
            doc["auto_normalize_axis"] = self.auto_normalize_axis
        if self.domain_center is not None:
            doc["domain"] = {"center": list(self.domain_center), "radius": self.domain_radius}
        return doc

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# -- parsing -------------------------------------------------------------

_SPEC_KEYS = {"dimension", "family", "a", "b", "charge", "alpha", "inner",
              "auto_normalize_axis", "domain"}


def _parse_poly(doc, n: int, where: str) -> PolyScalar:
    if isinstance(doc, (int, float)) and not isinstance(doc, bool):
        return PolyScalar.constant(float(doc), n)
    if not isinstance(doc, dict) or set(doc) != {"terms"}:
        raise SpecError(f"{where}: polynomial must be {{'terms': [...]}} or a number")
    terms = []
    for t in doc["terms"]:
        if not isinstance(t, dict) or set(t) != {"powers", "coeff"}:
            raise SpecError(f"{where}: each term needs exactly 'powers' and 'coeff'")
        powers = tuple(int(e) for e in t["powers"])
        terms.append((powers, float(t["coeff"])))
    try:
        return PolyScalar(tuple(terms), n)
    except SpecError as exc:
        raise SpecError(f"{where}: {exc}") from None


def parse_spec(document: str | dict) -> MetricSpec:
    """Validate a metric spec document (JSON text or already-decoded dict)."""
    doc = json.loads(document) if isinstance(document, str) else document
    if not isinstance(doc, dict):
        raise SpecError("spec must be an object")
    unknown = set(doc) - _SPEC_KEYS
    if unknown:
        raise SpecError(f"unknown fields: {sorted(unknown)}")
    n = doc.get("dimension")
    if not isinstance(n, int) or n < 1:
        raise SpecError("dimension must be a positive integer")
    family = doc.get("family")
    if family not in FAMILIES:
        raise SpecError(f"family must be one of {FAMILIES}")
    center, radius = None, 0.3
    if "domain" in doc:
        d = doc["domain"]
        if not isinstance(d, dict) or not set(d) <= {"center", "radius"}:
            raise SpecError("domain must be {'center': [...], 'radius': r}")
        if "center" in d:
            center = tuple(float(v) for v in d["center"])
            if len(center) != n:
                raise SpecError("domain center has wrong length")
        radius = float(d.get("radius", radius))

    allowed = {
        "riemannian": {"a"},
        "finsleroid": {"a", "b", "charge", "auto_normalize_axis"},
        "conformal": {"inner", "alpha"},
    }[family] | {"dimension", "family", "domain"}
    stray = set(doc) - allowed
    if stray:
        raise SpecError(f"fields {sorted(stray)} not allowed for family {family!r}")

    if family == "conformal":
        if "inner" not in doc or "alpha" not in doc:
            raise SpecError("conformal spec needs 'inner' and 'alpha'")
        inner = parse_spec(doc["inner"])
        if inner.dimension != n:
            raise SpecError("inner spec dimension differs")
        spec = MetricSpec(n, family, alpha=_parse_poly(doc["alpha"], n, "alpha"), inner=inner,
                          domain_center=center if center is not None else inner.domain_center,
                          domain_radius=radius if "domain" in doc else inner.domain_radius)
    else:
        rows = doc.get("a")
        if not isinstance(rows, list) or len(rows) != n or any(
            not isinstance(r, list) or len(r) != n for r in rows
        ):
            raise SpecError("'a' must be an n x n array of polynomials")
        a = tuple(tuple(_parse_poly(rows[i][j], n, f"a[{i}][{j}]") for j in range(n))
                  for i in range(n))
        for i in range(n):
            for j in range(i):
                if sorted(a[i][j].terms) != sorted(a[j][i].terms):
                    raise SpecError(f"a is not symmetric at ({i},{j})")
        kwargs: dict[str, Any] = {}
        if family == "finsleroid":
            if "b" not in doc or "charge" not in doc:
                raise SpecError("finsleroid spec needs 'b' and 'charge'")
            if not isinstance(doc["b"], list) or len(doc["b"]) != n:
                raise SpecError("'b' must have n entries")
            kwargs["b"] = tuple(_parse_poly(p, n, f"b[{i}]") for i, p in enumerate(doc["b"]))
            kwargs["charge"] = _parse_poly(doc["charge"], n, "charge")
            flag = doc.get("auto_normalize_axis", False)
            if not isinstance(flag, bool):
                raise SpecError("auto_normalize_axis must be a boolean")
            kwargs["auto_normalize_axis"] = flag
        spec = MetricSpec(n, family, a=a, domain_center=center, domain_radius=radius, **kwargs)
    validate_at(spec, spec.center)
    return spec


def conformal_wrap(inner: MetricSpec, alpha: PolyScalar) -> MetricSpec:
    """Spec with energy exp(2 alpha(x)) * E_inner."""
    if alpha.n != inner.dimension:
        raise SpecError("alpha dimension differs from inner spec")
    return MetricSpec(inner.dimension, "conformal", alpha=alpha, inner=inner,
                      domain_center=inner.domain_center, domain_radius=inner.domain_radius)


# -- pointwise data ------------------------------------------------------

def a_matrix(spec: MetricSpec, x) -> np.ndarray:
    n = spec.dimension
    return np.array([[spec.a[i][j](x) for j in range(n)] for i in range(n)])


def axis_covector(spec: MetricSpec, x) -> np.ndarray:
    """b_i(x), normalized to unit a-length when the spec asks for it."""
    b = np.array([p(x) for p in spec.b])
    if spec.auto_normalize_axis:
        b = b / math.sqrt(b @ np.linalg.solve(a_matrix(spec, x), b))
    return b


def validate_at(spec: MetricSpec, x) -> None:
    """Structural invariants of the spec at a position x."""
    if spec.family == "conformal":
        validate_at(spec.inner, x)
        return
    a = a_matrix(spec, x)
    if np.linalg.eigvalsh(a).min() <= 0:
        raise SpecError(f"a_ij not positive definite at x={list(np.round(x, 12))}")
    if spec.family == "finsleroid":
        g = spec.charge(x)
        if not -2.0 < g < 2.0:
            raise SpecError(f"Finsleroid charge {g} outside (-2, 2) at x={list(x)}")
        b = np.array([p(x) for p in spec.b])
        norm2 = b @ np.linalg.solve(a, b)
        if norm2 <= 0:
            raise SpecError("Finsleroid axis vanishes")
        if not spec.auto_normalize_axis and abs(norm2 - 1.0) > 1e-12:
            raise SpecError(f"axis not unit-normalized: a^ij b_i b_j = {norm2!r}")


@dataclass(frozen=True)
class FinsleroidData:
    b: float
    q: float
    r: np.ndarray
    g: float
    h: float
    G: float
    phi: float
    b_up: np.ndarray
    v_up: np.ndarray
    a: np.ndarray = field(repr=False)


def finsleroid_data(spec: MetricSpec, x, y) -> FinsleroidData:
    if spec.family != "finsleroid":
        raise SpecError("finsleroid_data needs a finsleroid spec")
    y = np.asarray(y, dtype=float)
    a = a_matrix(spec, x)
    bi = axis_covector(spec, x)
    b = float(bi @ y)
    r = a - np.outer(bi, bi)
    q2 = float(y @ r @ y)
    fstar = math.sqrt(y @ a @ y)
    if q2 <= (AXIS_EPS * fstar) ** 2:
        raise InadmissiblePointError(f"y={list(y)} inside the Finsleroid axis cone")
    q = math.sqrt(q2)
    g = spec.charge(x)
    h = math.sqrt(1.0 - g * g / 4.0)
    G = g / h
    phi = math.atan((2.0 * b + g * q) / (2.0 * h * q))
    b_up = np.linalg.solve(a, bi)
    return FinsleroidData(b, q, r, g, h, G, phi, b_up, y - b * b_up, a)


def phi_piecewise(b: float, q: float, g: float) -> float:
    """Finsleroid angle in its branchwise form; b = 0 uses the common limit."""
    h = math.sqrt(1.0 - g * g / 4.0)
    base = math.atan(g / (2.0 * h))
    if b == 0.0:
        return base
    sign = 1.0 if b > 0 else -1.0
    # atan(N / (h b)) as atan2 so that a subnormal b cannot divide by zero
    return sign * math.pi / 2 + base - math.atan2(sign * (q + 0.5 * g * b), h * abs(b))


def phi_limit(q: float, g: float, b: float = 1e-6) -> tuple[float, float]:
    """One-sided b -> 0 limits of the piecewise angle at fixed q.

    The angle approaches its limit linearly in b, so each side is estimated
    from the pair (b, b/2) by Richardson extrapolation.
    """
    out = []
    for s in (1.0, -1.0):
        p1 = phi_piecewise(s * b, q, g)
        p2 = phi_piecewise(s * b / 2, q, g)
        out.append(2.0 * p2 - p1)
    return out[0], out[1]


def phi_forms_agree(spec: MetricSpec, x, y, limit_b: float = 1e-6) -> dict:
    """Piecewise angle vs the arctan form, plus the b -> 0 limit check."""
    d = finsleroid_data(spec, x, y)
    arctan_form = math.atan((2 * d.b + d.g * d.q) / (2 * d.h * d.q))
    piece = phi_piecewise(d.b, d.q, d.g)
    target = math.atan(d.G / 2)
    # the angle depends on b/q only, so the limit probe is taken at unit q
    plus, minus = phi_limit(1.0, d.g, limit_b)
    return {
        "branch": "b>0" if d.b > 0 else ("b<0" if d.b < 0 else "b=0"),
        "residual": abs(piece - arctan_form),
        "limit_error": max(abs(plus - target), abs(minus - target)),
        "raw_limit_error": abs(phi_piecewise(limit_b, 1.0, d.g) - target),
    }


# -- energies ------------------------------------------------------------

def _check_point(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        raise InadmissiblePointError("y = 0 lies on the zero section")
    return y


def energy_value(spec: MetricSpec, x, y) -> float:
    """Direct float evaluation of E = F^2 / 2."""
    x = np.asarray(x, dtype=float)
    y = _check_point(y)
    if spec.family == "conformal":
        return math.exp(2.0 * spec.alpha(x)) * energy_value(spec.inner, x, y)
    a = a_matrix(spec, x)
    quad = float(y @ a @ y)
    if spec.family == "riemannian":
        return 0.5 * quad
    bi = axis_covector(spec, x)
    b = float(bi @ y)
    q2 = quad - b * b
    if q2 <= (AXIS_EPS * math.sqrt(quad)) ** 2:
        raise InadmissiblePointError(f"y={list(y)} inside the Finsleroid axis cone")
    q = math.sqrt(q2)
    g = spec.charge(x)
    if not -2.0 < g < 2.0:
        raise InadmissiblePointError(f"charge {g} outside (-2, 2)")
    h = math.sqrt(1.0 - g * g / 4.0)
    phi = phi_piecewise(b, q, g)
    return 0.5 * math.exp(g / h * phi) * (b * b + g * q * b + q2)


def _quadratic(a: TaylorJet, ys: TaylorJet) -> TaylorJet:
    return (a * ys.expand(0) * ys.expand(-1)).sum()


def _a_jet(spec: MetricSpec, xs: TaylorJet) -> TaylorJet:
    n = spec.dimension
    return taylor.stack([taylor.stack([spec.a[i][j].jet(xs) for j in range(n)])
                         for i in range(n)])


def energy_jet(spec: MetricSpec, x, y, caps: DegreeCaps | None = None) -> TaylorJet:
    """Jet of E at the chart point (x, y)."""
    x = np.asarray(x, dtype=float)
    y = _check_point(y)
    caps = caps or DegreeCaps(spec.dimension)
    validate_at(spec, x)
    xs, ys = taylor.seed_point(x, y, caps)
    return _energy(spec, xs, ys)


def _energy(spec: MetricSpec, xs: TaylorJet, ys: TaylorJet) -> TaylorJet:
    if spec.family == "conformal":
        return taylor.exp(2.0 * spec.alpha.jet(xs)) * _energy(spec.inner, xs, ys)
    a = _a_jet(spec, xs)
    quad = _quadratic(a, ys)
    if spec.family == "riemannian":
        return 0.5 * quad
    bvec = taylor.stack([p.jet(xs) for p in spec.b])
    if spec.auto_normalize_axis:
        norm2 = taylor.matmul(taylor.inverse(a), bvec)
        norm2 = (norm2 * bvec).sum()
        bvec = bvec * taylor.power(norm2, -0.5)
    b = (bvec * ys).sum()
    q2 = quad - b * b
    if q2.value <= (AXIS_EPS * math.sqrt(quad.value)) ** 2:
        raise InadmissiblePointError(f"y={list(ys.value)} inside the Finsleroid axis cone")
    q = taylor.sqrt(q2)
    g = spec.charge.jet(xs)
    h = taylor.sqrt(1.0 - 0.25 * g * g)
    phi = taylor.arctan((2.0 * b + g * q) / (2.0 * h * q))
    return 0.5 * taylor.exp(g / h * phi) * (b * b + g * q * b + q2)


def riemannian_norm(spec: MetricSpec, x, y) -> float:
    """sqrt(a(y, y)) for the base metric's a_ij (used for the axis guard)."""
    base = spec.base()
    y = np.asarray(y, dtype=float)
    return math.sqrt(y @ a_matrix(base, x) @ y)


def derivative_length(spec: MetricSpec, x, y) -> float:
    """Length over which the energy varies in y: |y|, or the distance q to the
    Finsleroid axis when that is smaller (y-derivatives grow like 1/q^k)."""
    y = np.asarray(y, dtype=float)
    length = float(np.max(np.abs(y)))
    base = spec.base()
    if base.family == "finsleroid":
        length = min(length, finsleroid_data(base, x, y).q)
    return length


def outside_axis_cone(spec: MetricSpec, x, y, half_angle: float = CONE_HALF_ANGLE) -> bool:
    base = spec.base()
    if base.family != "finsleroid":
        return True
    y = np.asarray(y, dtype=float)
    a = a_matrix(base, x)
    bi = axis_covector(base, x)
    quad = y @ a @ y
    b = bi @ y
    # angle to the axis measured in the a-metric: sin^2 = q^2 / a(y, y)
    return (quad - b * b) / quad > math.sin(half_angle) ** 2
