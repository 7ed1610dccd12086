"""The energy along lines c(t) = v + t X_*(p) and its Riccati equation.

With y(t) = E(c(t)) and z = y'/y the degeneracy conditions reduce to

    (a^2 + t^2 b^2 (1 - b^2)) z' + 1/2 (a^2 + t^2 b^2 (1 - 2 b^2)) z^2 + 2 t b^4 z - 2 b^4 = 0,

where a^2 = 2 E_*(v) and b^2 = 2 E_*(X_*).  Once b^2 = 1 the solution with
z(0) = K / F_*(v) is rational in t, and integrating it gives E along the line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import metrics
from .conformal import build_conformal_pack
from .errors import ConfigurationError, FinslerLabError, SingularEvaluationError
from .metrics import MetricSpec, PolyScalar
from .tensors import metric_tensor

BLOW_UP = 1e12


class InadmissibleChargeError(ConfigurationError):
    """|K| >= 4: the closed-form solution would blow up at finite t."""


def check_K(K: float) -> float:
    K = float(K)
    if not -4.0 < K < 4.0:
        raise InadmissibleChargeError(f"K={K} outside (-4, 4)")
    return K


def _fstar(F_star: float) -> float:
    if not F_star > 0:
        raise ConfigurationError(f"F_* must be positive, got {F_star}")
    return float(F_star)


def _scaled(K: float, F_star: float, t, E_star: float | None):
    K = check_K(K)
    F_star = _fstar(F_star)
    if E_star is not None and abs(E_star - 0.5 * F_star**2) > 1e-12 * F_star**2:
        raise ConfigurationError(f"E_* = {E_star} does not equal F_*^2 / 2")
    u = np.asarray(t, dtype=float) / F_star
    # 2u^2 + uK + 2 as a completed square: no cancellation as |K| -> 4
    den = 2.0 * (u + K / 4.0) ** 2 + (4.0 - K) * (4.0 + K) / 8.0
    den = np.where(u == 0.0, 2.0, den)
    return K, F_star, u, den


def closed_form_z(K: float, F_star: float, t, E_star: float | None = None):
    """z = 2(2t + K F_*) / (2t^2 + t K F_* + 4 E_*), evaluated in u = t / F_*.

    At t = 0 this is 2K / (2F_*), i.e. K / F_* bit for bit.
    """
    K, F_star, u, den = _scaled(K, F_star, t, E_star)
    return 2.0 * (2.0 * u + K) / (F_star * den)


def closed_form_dz(K: float, F_star: float, t, E_star: float | None = None):
    """Analytic t-derivative of closed_form_z, 2(2 - w)(2 + w) / (F_* den)^2 with w = 2u + K."""
    K, F_star, u, den = _scaled(K, F_star, t, E_star)
    w = 2.0 * u + K
    return 2.0 * (2.0 - w) * (2.0 + w) / (F_star * den) ** 2


def riccati_residual(t, z, dz, a2: float, b2: float) -> float:
    if not a2 > 0:
        raise ConfigurationError(f"a^2 must be positive, got {a2}")
    t, z, dz = (np.asarray(v, dtype=float) for v in (t, z, dz))
    b4 = b2 * b2
    res = ((a2 + t * t * b2 * (1.0 - b2)) * dz
           + 0.5 * (a2 + t * t * b2 * (1.0 - 2.0 * b2)) * z * z
           + 2.0 * t * b4 * z - 2.0 * b4)
    return float(np.max(np.abs(res)))


def line_exponent(K: float, F_star: float, t):
    """A(v, t); vanishes at t = 0."""
    K = check_K(K)
    F_star = _fstar(F_star)
    s = math.sqrt(16.0 - K * K)
    t = np.asarray(t, dtype=float)
    return K / s * (np.arctan((4.0 * t / F_star + K) / s) - math.atan(K / s))


def energy_along_line(K: float, K_star: float, F_star: float, t):
    if not K_star > 0:
        raise ConfigurationError(f"K* must be positive, got {K_star}")
    t = np.asarray(t, dtype=float)
    quad = F_star**2 + K * F_star * t / 2.0 + t * t
    return K_star * quad * np.exp(2.0 * line_exponent(K, F_star, t))


def integrate_numerically(K: float, F_star: float, t0: float, t1: float, steps: int = 10_000):
    """Classical RK4 for a^2 z' = 2 - 2 t z - (a^2 - t^2) z^2 / 2 with a = F_*.

    Starts from the closed form at t0 and returns (t-grid, z-trajectory).
    """
    K = check_K(K)
    F_star = _fstar(F_star)
    if steps < 100:
        raise ConfigurationError("integrate_numerically needs steps >= 100")
    h = (t1 - t0) / steps
    if h == 0 or abs(h) < 1e-14 * max(1.0, abs(t0), abs(t1)):
        raise SingularEvaluationError("integration step underflow", h)
    a2 = F_star * F_star

    def rhs(t, z):
        return (2.0 - 2.0 * t * z - 0.5 * (a2 - t * t) * z * z) / a2

    ts = t0 + h * np.arange(steps + 1)
    zs = np.empty(steps + 1)
    z = float(closed_form_z(K, F_star, t0))
    zs[0] = z
    for k in range(steps):
        t = ts[k]
        k1 = rhs(t, z)
        k2 = rhs(t + h / 2, z + h / 2 * k1)
        k3 = rhs(t + h / 2, z + h / 2 * k2)
        k4 = rhs(t + h, z + h * k3)
        z = z + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not abs(z) < BLOW_UP:
            raise SingularEvaluationError(f"Riccati trajectory blew up near t={t + h}", z)
        zs[k + 1] = z
    return ts, zs


@dataclass(frozen=True)
class RiccatiLine:
    p: np.ndarray
    v: np.ndarray
    X_star: np.ndarray
    a2: float
    b2: float
    K: float
    K_star: float
    F_star: float


def riccati_line(spec: MetricSpec, alpha: PolyScalar, p, v) -> RiccatiLine:
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    da = alpha.gradient(p)
    if abs(v @ da) > 1e-12 * max(1.0, np.linalg.norm(v) * np.linalg.norm(da)):
        raise ConfigurationError(f"v(alpha) = {v @ da:.3e}: v is not tangent to the level set")
    cp = build_conformal_pack(spec, alpha, p, v, packs=False)
    F_star = math.sqrt(cp.a2)
    z0 = float(cp.X_star @ cp.E_y) / cp.E
    return RiccatiLine(p=p, v=v, X_star=cp.X_star, a2=cp.a2, b2=cp.b2, K=F_star * z0,
                       K_star=cp.E / cp.a2, F_star=F_star)


def extract_line_profile(spec: MetricSpec, alpha: PolyScalar, p, v, ts) -> tuple[RiccatiLine, dict]:
    """Sample y(t) = E(c(t)) from the metric and compare with the rebuilt profile.

    z and z' along the line come from the energy itself (dE and the
    fundamental tensor contracted with X_*), so the Riccati residual tests the
    metric against the ODE rather than the closed form against itself.
    """
    line = riccati_line(spec, alpha, p, v)
    ts = np.asarray(ts, dtype=float)
    kept, ys, zs, dzs = [], [], [], []
    skipped = 0
    Xs = line.X_star
    for t in ts:
        c = line.v + t * Xs
        if not metrics.outside_axis_cone(spec, line.p, c):
            skipped += 1
            continue
        try:
            cp = build_conformal_pack(spec, alpha, line.p, c, packs=False)
            g = metric_tensor(spec, line.p, c)
        except FinslerLabError:
            skipped += 1
            continue
        y = metrics.energy_value(spec, line.p, c)
        z = float(Xs @ cp.E_y) / y
        kept.append(t)
        ys.append(y)
        zs.append(z)
        dzs.append(float(Xs @ g @ Xs) / y - z * z)
    if not kept:
        raise SingularEvaluationError("every grid point was excluded")
    kept, ys, zs, dzs = map(np.array, (kept, ys, zs, dzs))
    rebuilt = energy_along_line(line.K, line.K_star, line.F_star, kept)
    report = {
        "K": line.K,
        "profile": float(np.max(np.abs(ys - rebuilt) / np.abs(rebuilt))),
        "z_vs_closed_form": float(np.max(np.abs(zs - closed_form_z(line.K, line.F_star, kept))
                                         / (1.0 + np.abs(zs)))),
        "riccati": riccati_residual(kept, zs, dzs, line.a2, line.b2),
        "samples": int(len(kept)),
        "skipped": skipped,
    }
    return line, report


def finsleroid_comparison(spec: MetricSpec, alpha: PolyScalar, p, v, ts) -> dict:
    """Energy along c(t) from the line formula against the rescaled Finsleroid energy of charge K/2."""
    if spec.family != "finsleroid":
        raise ConfigurationError("finsleroid_comparison needs a finsleroid spec")
    line, profile = extract_line_profile(spec, alpha, p, v, ts)
    K, F = line.K, line.F_star
    g = K / 2.0
    s = math.sqrt(16.0 - K * K)
    G = 2.0 * K / s
    factor = 2.0 * line.K_star * math.exp(-G * math.atan(G / 2.0))
    main, fins, quad_gap, phi_gap = [], [], 0.0, 0.0
    for t in np.asarray(ts, dtype=float):
        c = line.v + t * line.X_star
        if not metrics.outside_axis_cone(spec, line.p, c):
            continue
        fd = metrics.finsleroid_data(spec, line.p, c)
        quad = fd.b**2 + g * fd.q * fd.b + fd.q**2
        phi = math.atan((2.0 * fd.b + g * fd.q) / (2.0 * math.sqrt(1.0 - g * g / 4.0) * fd.q))
        pred_quad = t * t + K / 2.0 * F * t + F * F
        pred_phi = math.atan((4.0 * t / F + K) / s)
        quad_gap = max(quad_gap, abs(quad - pred_quad) / max(1.0, abs(pred_quad)))
        phi_gap = max(phi_gap, abs(phi - pred_phi))
        main.append(float(energy_along_line(K, line.K_star, F, t)))
        fins.append(factor * 0.5 * math.exp(G * phi) * quad)
    main, fins = np.array(main), np.array(fins)
    return {
        "K": K,
        "charge": spec.charge(line.p),
        "profile": profile["profile"],
        "comparison": float(np.max(np.abs(main - fins) / np.abs(main))),
        "quadratic_identity": float(quad_gap),
        "phi_identity": phi_gap,
        "riccati": profile["riccati"],
        "samples": profile["samples"],
        "skipped": profile["skipped"],
    }
