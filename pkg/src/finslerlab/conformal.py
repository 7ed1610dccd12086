"""Objects attached to a conformal change F -> exp(alpha(x)) F.

The gradient field X^l = g^{lm} alpha_m and everything derived from it is
computed from jets in y at a frozen position, so y-derivatives of X come for
free.  The difference tensors B are available along two paths: differentiating
the algebraic spray difference (y.alpha) y^l - E X^l, and subtracting the
tensor packs of the wrapped and unwrapped metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import metrics, taylor
from .errors import (DimensionError, ExcludedRayError, FinslerLabError, InadmissiblePointError,
                     RegularityError)
from .metrics import MetricSpec, PolyScalar
from .taylor import DegreeCaps
from .tensors import TensorPack, berwald_term_scale, evaluate_pack, maxabs, rel_residual

REGULARITY_EPS = 1e-12
ETA_EPS = 1e-10


@dataclass(frozen=True)
class ConformalPack:
    x: np.ndarray
    y: np.ndarray
    alpha_value: float
    alpha_grad: np.ndarray  # alpha_i
    E: float
    F: float
    E_y: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    C_up: np.ndarray  # C^l_ij
    Q: np.ndarray  # lowered vv-curvature, same layout as TensorPack.Q
    X: np.ndarray  # X^l
    X1: np.ndarray  # [l, i] = dX^l/dy^i
    X2: np.ndarray  # [l, i, j]
    Xa: float  # X^l alpha_l
    Xa1: np.ndarray  # [i] = X^l_i alpha_l
    Xa2: np.ndarray  # [i, j] = X^l_ij alpha_l, from the jet of X.alpha
    XjX2: np.ndarray  # [l, i] = X^j X^l_ij
    W: np.ndarray  # X^s X^l_s
    B2: np.ndarray  # [l, i, j], closed formula
    B3: np.ndarray  # [l, i, j, k], jet of the spray difference
    ya: float  # y^m alpha_m
    eta_vec: np.ndarray
    eta: float
    theta: float  # nan on the excluded ray
    E_star: float
    E_star3: np.ndarray  # third y-derivatives of E_*
    g_star: np.ndarray
    g_star_inv: np.ndarray
    X_star: np.ndarray
    a2: float
    b2: float
    coeffs: dict  # A, P, R, Q (nan on the excluded ray)
    length: float = 1.0  # metrics.derivative_length at (x, y)
    inner: TensorPack | None = None
    wrapped: TensorPack | None = None

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def B2_sub(self) -> np.ndarray | None:
        return None if self.wrapped is None else self.wrapped.G2 - self.inner.G2

    @property
    def B3_sub(self) -> np.ndarray | None:
        return None if self.wrapped is None else self.wrapped.G3 - self.inner.G3

    def scale(self, *arrays) -> float:
        """(1 + F^2)(1 + max|alpha_i|) times the largest compared norm (at least 1)."""
        norm = max([1.0] + [maxabs(a) for a in arrays])
        return (1.0 + self.F**2) * (1.0 + maxabs(self.alpha_grad)) * norm


def _abcd(E, ya, Xa, theta, eta):
    A = Xa - theta * ya / 2.0
    P = theta * ya / (4.0 * E) * (ya / (2.0 * eta) * (theta - ya / E) - 1.0)
    R = theta * E / (2.0 * eta) * (theta - ya / E)
    Q = theta / 2.0 * (1.0 + ya * ya / (2.0 * E * eta) - theta * ya / (2.0 * eta))
    return {"A": A, "P": P, "R": R, "Q": Q}


def build_conformal_pack(spec: MetricSpec, alpha: PolyScalar, x, y, packs: bool = True) -> ConformalPack:
    """Conformal objects of (spec, alpha) at (x, y).

    With ``packs`` the full tensor packs of the inner and wrapped metrics are
    attached as well; they feed the Landsberg law and the second B path.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = spec.dimension
    da = alpha.gradient(x)
    if maxabs(da) <= REGULARITY_EPS:
        raise RegularityError(f"d alpha vanishes at x={list(x)}")
    if not metrics.outside_axis_cone(spec, x, y, half_angle=0.0):
        raise InadmissiblePointError(f"y={list(y)} lies on the Finsleroid axis")
    inner = evaluate_pack(spec, x, y) if packs else None
    wrapped = evaluate_pack(metrics.conformal_wrap(spec, alpha), x, y) if packs else None

    caps = DegreeCaps(n, 0, 5)
    E = metrics.energy_jet(spec, x, y, caps)
    _, ys = taylor.seed_point(x, y, caps)
    gy = E.grad_y().grad_y()
    ginv = taylor.inverse(gy)
    Xj = taylor.matmul(ginv, taylor.constant(da, gy.caps))
    Xa_j = (Xj * da).sum()
    ya_j = (ys * da).sum()
    D = ya_j * ys - E * Xj  # spray difference, wrapped minus inner
    Estar_j = E * Xa_j

    E0 = float(E.value)
    if E0 <= 0:
        raise InadmissiblePointError(f"non-positive energy at y={list(y)}")
    Ey = E.tensor_y(1)
    g = gy.value
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise InadmissiblePointError(f"fundamental tensor not positive definite at y={list(y)}")
    g_inv = ginv.value
    C_up = 0.5 * np.einsum("lm,ijm->lij", g_inv, E.tensor_y(3))
    Q_up = np.einsum("ljm,mik->lijk", C_up, C_up) - np.einsum("lim,mjk->lijk", C_up, C_up)
    X = Xj.value
    X1 = Xj.tensor_y(1)
    X2 = Xj.tensor_y(2)
    Xa = float(Xa_j.value)
    ya = float(y @ da)
    W = X1 @ X
    eta_vec = X - ya / (2.0 * E0) * y
    eta = Xa - ya * ya / (2.0 * E0)

    B2 = (np.einsum("i,lj->lij", da, np.eye(n)) + np.einsum("j,li->lij", da, np.eye(n))
          - np.einsum("ij,l->lij", g, X) - np.einsum("i,lj->lij", Ey, X1)
          - np.einsum("j,li->lij", Ey, X1) - E0 * X2)

    g_star = Estar_j.tensor_y(2)
    g_star_inv = np.linalg.inv(g_star)
    X_star = g_star_inv @ da
    if eta > ETA_EPS:
        theta = float(W @ da) / eta
        coeffs = _abcd(E0, ya, Xa, theta, eta)
    else:
        theta = math.nan
        coeffs = dict.fromkeys("APRQ", math.nan)

    return ConformalPack(
        x=x, y=y, alpha_value=alpha(x), alpha_grad=da, E=E0, F=math.sqrt(2 * E0),
        E_y=Ey, g=g, g_inv=g_inv, C_up=C_up, Q=np.einsum("rt,tpis->pisr", g, Q_up),
        X=X, X1=X1, X2=X2, Xa=Xa,
        Xa1=Xa_j.tensor_y(1), Xa2=Xa_j.tensor_y(2), XjX2=np.einsum("j,lij->li", X, X2),
        W=W, B2=B2, B3=D.tensor_y(3), ya=ya, eta_vec=eta_vec, eta=eta, theta=theta,
        E_star=float(Estar_j.value), E_star3=Estar_j.tensor_y(3), g_star=g_star,
        g_star_inv=g_star_inv, X_star=X_star, a2=2.0 * float(Estar_j.value),
        b2=float(X_star @ da), coeffs=coeffs, length=metrics.derivative_length(spec, x, y),
        inner=inner, wrapped=wrapped,
    )


def check_conformal_invariants(cp: ConformalPack) -> dict[str, float]:
    C_up = cp.C_up
    l = cp.E_y / cp.F
    # eta and W cancel near the X_* ray, so they are compared against the terms they are built from
    w_terms = max(maxabs(cp.W), maxabs(cp.X1) * maxabs(cp.X), 1e-300)
    out = {
        "gradient_reconstruction": rel_residual(cp.g @ cp.X, cp.alpha_grad),
        "lowered_symmetry": rel_residual(cp.g @ cp.X1, (cp.g @ cp.X1).T),
        "cross_lifting": rel_residual(cp.g_inv @ cp.X1.T @ cp.g, cp.X1),
        "first_cartan_contraction": rel_residual(cp.W, -2.0 * np.einsum("s,t,lst->l", cp.X, cp.X, C_up),
                                                 w_terms),
        "eta_tangential": abs(cp.eta_vec @ l) / max(maxabs(cp.eta_vec), maxabs(cp.X), 1e-300),
        "w_tangential": abs(cp.W @ l) / (w_terms * maxabs(l)) if maxabs(cp.W) else 0.0,
        "eta_nonnegative": max(0.0, -cp.eta) / max(cp.Xa, 1e-300),  # 0 <= eta <= X.alpha
    }
    if cp.wrapped is not None:
        out["dual_B2"] = rel_residual(cp.B2, cp.B2_sub, floor=1e-10)
        # B^l_ijk vanishes by cancellation in two dimensions; measure it against G^l_ij
        terms = max(berwald_term_scale(cp.inner, cp.length), berwald_term_scale(cp.wrapped, cp.length), 1e-10)
        out["dual_B3"] = rel_residual(cp.B3, cp.B3_sub, floor=terms)
    return out


# -- transformation laws --------------------------------------------------

def _x2_rhs(cp: ConformalPack) -> np.ndarray:
    """Right side of the X_ij formula times E, as [l, i, j]."""
    C_up = cp.C_up
    E, Ey, X1, y, g = cp.E, cp.E_y, cp.X1, cp.y, cp.g
    return (cp.ya * C_up
            - 0.5 * np.einsum("i,lj->lij", Ey, X1)
            - 0.5 * np.einsum("j,li->lij", Ey, X1)
            - 0.5 * np.einsum("sj,si,l->lij", g, X1, y)
            - E * np.einsum("si,ljs->lij", X1, C_up)
            - E * np.einsum("lis,sj->lij", C_up, X1)
            + E * np.einsum("lm,mij->lij", X1, C_up))


def landsberg_rhs(inner: TensorPack, cp: ConformalPack) -> np.ndarray:
    C_up = inner.C_up
    E, Ey, X1, y, g = cp.E, cp.E_y, cp.X1, cp.y, cp.g
    return (inner.P_landsberg
            - cp.ya * C_up
            + 0.5 * np.einsum("i,lj->lij", Ey, X1)
            + 0.5 * np.einsum("j,li->lij", Ey, X1)
            + 0.5 * np.einsum("sj,si,l->lij", g, X1, y)
            + E * cp.X2
            + E * np.einsum("si,ljs->lij", X1, C_up)
            + E * np.einsum("lis,sj->lij", C_up, X1)
            - E * np.einsum("lr,rij->lij", X1, C_up))


def landsberg_transformation_residual(inner: TensorPack, wrapped: TensorPack, cp: ConformalPack) -> float:
    """max|P~ - rhs| where rhs is assembled from the unwrapped objects."""
    return maxabs(wrapped.P_landsberg - landsberg_rhs(inner, cp))


def invariance_consequences_residual(cp: ConformalPack) -> dict[str, float]:
    rhs = _x2_rhs(cp)
    lhs_a = cp.E * cp.Xa2
    rhs_a = np.einsum("lij,l->ij", rhs, cp.alpha_grad)
    lhs_b = cp.E * cp.XjX2
    rhs_b = np.einsum("j,lij->li", cp.X, rhs)
    return {
        "x2_contracted": maxabs(lhs_a - rhs_a) / cp.scale(lhs_a, rhs_a),
        "x2_transvected": maxabs(lhs_b - rhs_b) / cp.scale(lhs_b, rhs_b),
    }


def degeneracy_sides(cp: ConformalPack) -> tuple[np.ndarray, np.ndarray]:
    """(1/3) X^k X^j B^l_ijk alpha_l and the right side, per free index i."""
    a, X, E, ya = cp.alpha_grad, cp.X, cp.E, cp.ya
    lhs = np.einsum("k,j,lijk,l->i", X, X, cp.B3, a) / 3.0
    Wa = cp.W @ a
    rhs = (0.5 * (cp.Xa * cp.Xa1 - Wa * a)
           + ya / (4.0 * E) * (Wa * cp.E_y - ya * cp.Xa1)
           + E * np.einsum("s,p,r,pisr->i", cp.W, X, X, cp.Q))
    return lhs, rhs


def degeneracy_residual(cp: ConformalPack) -> dict[str, float]:
    lhs, rhs = degeneracy_sides(cp)
    W = cp.W
    c_lhs = W @ lhs
    gram = gram_tests(cp)[0]
    c_rhs = 0.5 * gram + cp.E * np.einsum("s,p,r,i,pisr->", W, cp.X, cp.X, W, cp.Q)
    # the bracket printed with the Gram determinant, evaluated literally
    printed = (W @ cp.Xa1) * cp.eta - (W @ cp.alpha_grad) ** 2
    return {
        "lhs": maxabs(lhs) / cp.scale(lhs),
        "rhs": maxabs(rhs) / cp.scale(rhs),
        "degeneracy_identity": maxabs(lhs - rhs) / cp.scale(lhs, rhs),
        "w_contraction": abs(c_lhs - c_rhs) / cp.scale(c_lhs, c_rhs),
        "gram_bracket": abs(printed - gram) / cp.scale(printed, gram),
    }


def contracted_invariance(cp: ConformalPack) -> dict[str, float]:
    """Scaled |B^l_ijk alpha_l| and |(P~ - P)^l_ij alpha_l| at one point."""
    a = cp.alpha_grad
    b3 = np.einsum("lijk,l->ijk", cp.B3, a)
    out = {"berwald": maxabs(b3) / cp.scale(cp.B3), "berwald_abs": maxabs(b3),
           "uncontracted": maxabs(cp.B3) / cp.scale()}
    if cp.wrapped is not None:
        dl = np.einsum("lij,l->ij", cp.wrapped.P_landsberg - cp.inner.P_landsberg, a)
        out["landsberg"] = maxabs(dl) / cp.scale(cp.wrapped.P_landsberg, cp.inner.P_landsberg)
    return out


def contracted_invariance_residual(spec: MetricSpec, alpha: PolyScalar, points, packs: bool = True) -> dict:
    """Maxima of the per-point contracted residuals over a sample of (x, y)."""
    points = list(points)
    if not points:
        raise ValueError("empty sample")
    best: dict[str, float] = {}
    skipped = 0
    for x, y in points:
        try:
            r = contracted_invariance(build_conformal_pack(spec, alpha, x, y, packs=packs))
        except FinslerLabError:
            skipped += 1
            continue
        for k, v in r.items():
            best[k] = max(best.get(k, 0.0), v)
    best["samples"] = len(points) - skipped
    best["skipped"] = skipped
    return best


# -- degeneracy theorems ----------------------------------------------------

def gram_tests(cp: ConformalPack) -> tuple[float, float]:
    g = cp.g
    vecs1 = np.stack([cp.eta_vec, cp.W])
    gram1 = float(np.linalg.det(vecs1 @ g @ vecs1.T))
    vecs2 = np.stack([cp.X, cp.X_star, cp.y])
    gram2 = float(np.linalg.det(vecs2 @ g @ vecs2.T))
    return gram1, gram2


def gram_norms(cp: ConformalPack) -> tuple[float, float]:
    """Natural scales for the two determinants: norm^4 and norm^6."""
    g = cp.g
    n1 = max(cp.eta_vec @ g @ cp.eta_vec, cp.W @ g @ cp.W, 1e-300)
    n2 = max(cp.X @ g @ cp.X, cp.X_star @ g @ cp.X_star, cp.y @ g @ cp.y)
    return n1 * n1, n2**3


def associated_riemannian(spec: MetricSpec, alpha: PolyScalar, x, ys) -> dict:
    """g_* from E_* = E X.alpha over several directions at one position."""
    packs = [build_conformal_pack(spec, alpha, x, y, packs=False) for y in ys]
    gs = np.stack([cp.g_star for cp in packs])
    mean = gs.mean(axis=0)
    gsn = max(maxabs(mean), 1e-300)
    quad = max(maxabs(cp.E_star3) * maxabs(cp.y) / gsn for cp in packs)
    spread = maxabs(gs - mean) / gsn
    pos_def = bool(np.linalg.eigvalsh(mean).min() > 0)
    b2 = float(alpha.gradient(x) @ np.linalg.solve(mean, alpha.gradient(x))) if pos_def else math.nan
    return {"g_star": mean, "quadraticity": quad, "spread": spread, "b2": b2,
            "positive_definite": pos_def}


def theta_and_gstar_decomposition(cp: ConformalPack) -> dict[str, float]:
    if not cp.eta > ETA_EPS:
        raise ExcludedRayError(f"projected gradient vanishes (eta={cp.eta:.3e})")
    th, E, ya, a, Ey = cp.theta, cp.E, cp.ya, cp.alpha_grad, cp.E_y
    c = cp.coeffs
    proj = th * cp.eta_vec
    xa1_rhs = th * (a - ya / (2.0 * E) * Ey)
    gs = (c["A"] * cp.g + c["P"] * np.outer(Ey, Ey) + c["R"] * np.outer(a, a)
          + c["Q"] * (np.outer(a, Ey) + np.outer(Ey, a)))
    s38 = max(1.0, abs(E * th), abs(2 * E * c["P"]), abs(2 * E * c["Q"]))
    return {
        "theta": th,
        "w_projection": maxabs(cp.W - proj) / cp.scale(cp.W, proj),
        "xa_gradient": maxabs(cp.Xa1 - xa1_rhs) / cp.scale(cp.Xa1, xa1_rhs),
        "gstar_decomposition": maxabs(cp.g_star - gs) / cp.scale(cp.g_star, gs),
        "coefficient_relation_p": abs(2 * E * c["P"] + ya * c["Q"]) / s38,
        "coefficient_relation_q": abs(2 * E * c["Q"] + c["R"] * ya - E * th) / s38,
    }


def kernel_basis(alpha_grad, g_star) -> np.ndarray:
    """Columns spanning ker(d alpha), orthonormal for g_*."""
    K = scipy.linalg.null_space(np.asarray(alpha_grad, dtype=float)[None, :])
    L = np.linalg.cholesky(K.T @ g_star @ K)
    return K @ np.linalg.inv(L).T


def subspace_constancy(spec: MetricSpec, alpha: PolyScalar, x, rng, count: int = 40) -> dict:
    """Spread of X.alpha and F (X^s X^l_s alpha_l) over directions with v(alpha) = 0."""
    n = spec.dimension
    if n < 3:
        raise DimensionError("subspace constancy needs dimension >= 3 (ker d alpha must be connected)")
    x = np.asarray(x, dtype=float)
    da = alpha.gradient(x)
    if maxabs(da) <= REGULARITY_EPS:
        raise RegularityError(f"d alpha vanishes at x={list(x)}")
    probe = _probe_direction(spec, x, da)
    g_star = build_conformal_pack(spec, alpha, x, probe, packs=False).g_star
    basis = kernel_basis(da, g_star)
    xa, fw, k_direct, k_formula = [], [], [], []
    skipped = 0
    X_star = np.linalg.solve(g_star, da)
    for _ in range(count):
        u = rng.standard_normal(basis.shape[1])
        v = basis @ (u / np.linalg.norm(u))
        if not metrics.outside_axis_cone(spec, x, v):
            skipped += 1
            continue
        try:
            cp = build_conformal_pack(spec, alpha, x, v, packs=False)
        except FinslerLabError:
            skipped += 1
            continue
        wa = cp.W @ da
        f_star = math.sqrt(v @ g_star @ v)
        xa.append(cp.Xa)
        fw.append(cp.F * wa)
        k_direct.append(f_star * (X_star @ cp.E_y) / cp.E)
        k_formula.append(-cp.F * wa / cp.Xa**1.5)
    if not xa:
        raise ExcludedRayError("no admissible direction in ker d alpha")

    def spread(vals):
        vals = np.asarray(vals)
        return float(np.ptp(vals) / max(abs(vals.mean()), 1e-300))

    def spread_abs(vals):
        vals = np.asarray(vals)
        return float(np.ptp(vals) / max(abs(vals.mean()), 1.0))

    return {
        "xa_mean": float(np.mean(xa)), "xa_spread": spread(xa),
        "fw_mean": float(np.mean(fw)), "fw_spread": spread_abs(fw),
        "K": float(np.mean(k_direct)), "K_spread": spread_abs(k_direct),
        "K_formula_gap": float(np.max(np.abs(np.array(k_direct) - np.array(k_formula)))),
        "samples": len(xa), "skipped": skipped,
    }


def _probe_direction(spec, x, da):
    """Some admissible direction (the Riemannian E_* does not care which)."""
    for v in np.eye(spec.dimension) + 0.3:
        if metrics.outside_axis_cone(spec, x, v):
            return v
    return np.arange(1.0, spec.dimension + 1.0)


# -- Finsleroid closed forms ----------------------------------------------------

def finsleroid_gradient_residual(spec: MetricSpec, cp: ConformalPack) -> dict[str, float]:
    """E X^l against (b^2 + q^2)/2 b^l - (g q / 2) v^l with v^l = y^l - b b^l.

    The b^l factor on the first term is required for index balance; the
    alpha-contraction must reproduce E_*.
    """
    fd = metrics.finsleroid_data(spec, cp.x, cp.y)
    pred = 0.5 * (fd.b**2 + fd.q**2) * fd.b_up - 0.5 * fd.g * fd.q * fd.v_up
    ex = cp.E * cp.X
    return {
        "componentwise": rel_residual(ex, pred),
        "contraction": rel_residual(pred @ cp.alpha_grad, cp.E_star),
        "e_star_quadratic": rel_residual(cp.E_star, 0.5 * (fd.b**2 + fd.q**2)),
    }
