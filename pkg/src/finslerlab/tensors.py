"""Tensor objects of a Finsler metric at one point of the slit tangent bundle.

Conventions (all indices are plain numpy axes in the order written):

* ``C[i, j, k] = 1/2 dg_ij/dy^k`` -- the half-derivative Cartan tensor; with
  this normalization dg^{lm}/dy^i = -2 C_i^{lm}, the Levi-Civita symbols of
  g_ij(y) on a tangent space are C^k_ij, and the Landsberg tensor reads
  1/2 g^{lm}(d_x g_jm - 2 G^k_i C_jkm - G^k_ij g_km - G^k_im g_jk).
* ``Q_up[l, i, j, k] = C^l_jm C^m_ik - C^l_im C^m_jk``.
* ``Q[p, i, s, r] = g_rt Q^t_pis`` -- lowered into the last slot, which makes
  it antisymmetric in its first two indices.
* ``P_berwald[l, i, j, k] = -d^3 G^l / dy^i dy^j dy^k``; ``P_landsberg[l, i, j]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import metrics, taylor
from .errors import InadmissiblePointError, SingularEvaluationError
from .metrics import MetricSpec
from .taylor import DegreeCaps, TaylorJet


def maxabs(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(a))) if a.size else 0.0


def rel_residual(lhs, rhs, floor: float = 1e-12) -> float:
    """max|lhs - rhs| relative to the larger side's max-norm.

    ``floor`` bounds the denominator from below; pass the size of the terms a
    cancelling tensor is built from so an identically zero tensor is compared
    against that rather than against its own rounding noise.
    """
    return maxabs(np.asarray(lhs) - np.asarray(rhs)) / max(maxabs(lhs), maxabs(rhs), floor)


@dataclass(frozen=True)
class TensorPack:
    x: np.ndarray
    y: np.ndarray
    E: float
    F: float
    l: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    C: np.ndarray
    C_up: np.ndarray
    Q_up: np.ndarray
    Q: np.ndarray
    G: np.ndarray
    G1: np.ndarray  # G^l_i   -> [l, i]
    G2: np.ndarray  # G^l_ij  -> [l, i, j]
    G3: np.ndarray  # G^l_ijk -> [l, i, j, k]
    P_berwald: np.ndarray
    P_landsberg: np.ndarray
    P_landsberg_delta: np.ndarray
    dg_dx: np.ndarray  # [i, j, m] = d g_jm / d x^i
    dginv_dy: np.ndarray  # [l, m, i] = d g^lm / d y^i
    dCup_dy: np.ndarray  # [l, j, k, i] = d C^l_jk / d y^i
    E_y: np.ndarray  # dE/dy^i

    @property
    def n(self) -> int:
        return len(self.y)


class ConvexityError(InadmissiblePointError):
    pass


def evaluate_pack(spec: MetricSpec, x, y, caps: DegreeCaps | None = None) -> TensorPack:
    """All tensor objects of ``spec`` at the chart point (x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = spec.dimension
    caps = caps or DegreeCaps(n, 1, 5)
    if caps.x_cap < 1 or caps.y_cap < 5:
        raise taylor.OrderBudgetError("a full pack needs x_cap >= 1 and y_cap >= 5")
    if not metrics.outside_axis_cone(spec, x, y, half_angle=0.0):
        raise InadmissiblePointError(f"y={list(y)} lies on the Finsleroid axis")
    E = metrics.energy_jet(spec, x, y, caps)
    E0 = float(E.value)
    if E0 <= 0:
        raise InadmissiblePointError(f"non-positive energy {E0} at x={list(x)}, y={list(y)}")
    F = math.sqrt(2.0 * E0)

    Ey = E.grad_y()
    g_jet = Ey.grad_y()  # caps (x, y-2)
    g = g_jet.value
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise ConvexityError(f"fundamental tensor not positive definite at x={list(x)}, y={list(y)}")
    d3E = E.tensor_y(3)
    C = 0.5 * d3E
    dg_dx = np.moveaxis(g_jet.grad_x().value, -1, 0)

    Ey0 = E.drop_x()
    gy = Ey0.grad_y().grad_y()  # (0, y-2)
    ginv = taylor.inverse(gy)
    g_inv = ginv.value

    dxE = E.grad_x()
    mixed = dxE.grad_y()  # [k, m] = d^2E / dx^k dy^m
    _, ys = taylor.seed_point(x, y, mixed.caps)
    s = (mixed * ys.expand(-1)).sum(axis=0) - dxE
    Gjet = 0.5 * taylor.matmul(ginv, s)
    G = Gjet.value
    G1 = Gjet.tensor_y(1)
    G2 = Gjet.tensor_y(2)
    G3 = Gjet.tensor_y(3)

    C_up = np.einsum("lm,ijm->lij", g_inv, C)
    Q_up = np.einsum("ljm,mik->lijk", C_up, C_up) - np.einsum("lim,mjk->lijk", C_up, C_up)
    Q = np.einsum("rt,tpis->pisr", g, Q_up)

    cjet = gy.grad_y()  # [j, k, m], caps (0, y-3)
    cup_jet = 0.5 * (ginv.expand(1).expand(1) * cjet.expand(0)).sum(axis=-1)
    dCup_dy = cup_jet.tensor_y(1)

    P_berwald = -G3
    bracket = (dg_dx
               - 2.0 * np.einsum("ki,jkm->ijm", G1, C)
               - np.einsum("kij,km->ijm", G2, g)
               - np.einsum("kim,jk->ijm", G2, g))
    P_landsberg = 0.5 * np.einsum("lm,ijm->lij", g_inv, bracket)

    # horizontal-derivative form: delta g_jm / delta x^i = d_x^i g_jm - G^k_i d_y^k g_jm
    delta_g = dg_dx - np.einsum("ki,jmk->ijm", G1, d3E)
    bracket_d = delta_g - np.einsum("kij,km->ijm", G2, g) - np.einsum("kim,jk->ijm", G2, g)
    P_landsberg_delta = 0.5 * np.einsum("lm,ijm->lij", g_inv, bracket_d)

    return TensorPack(
        x=x, y=y, E=E0, F=F, l=Ey.value / F, g=g, g_inv=g_inv, C=C, C_up=C_up,
        Q_up=Q_up, Q=Q, G=G, G1=G1, G2=G2, G3=G3, P_berwald=P_berwald,
        P_landsberg=P_landsberg, P_landsberg_delta=P_landsberg_delta,
        dg_dx=dg_dx, dginv_dy=ginv.tensor_y(1), dCup_dy=dCup_dy, E_y=Ey.value,
    )


# -- lower-order evaluators (used by the finite-difference oracle) ----------

def metric_tensor(spec: MetricSpec, x, y) -> np.ndarray:
    E = metrics.energy_jet(spec, x, y, DegreeCaps(spec.dimension, 0, 2))
    return E.tensor_y(2)


def spray_derivatives(spec: MetricSpec, x, y, order: int) -> np.ndarray:
    """y-derivatives of the spray of the given order (0..3)."""
    n = spec.dimension
    E = metrics.energy_jet(spec, x, y, DegreeCaps(n, 1, order + 2))
    ginv = taylor.inverse(E.drop_x().grad_y().grad_y())
    dxE = E.grad_x()
    mixed = dxE.grad_y()
    _, ys = taylor.seed_point(x, y, mixed.caps)
    s = (mixed * ys.expand(-1)).sum(axis=0) - dxE
    Gjet = 0.5 * taylor.matmul(ginv, s)
    return Gjet.value if order == 0 else Gjet.tensor_y(order)


# -- identity checks -----------------------------------------------------

def check_pack_invariants(pack: TensorPack) -> dict[str, float]:
    n = pack.n
    y = pack.y
    Cn = max(maxabs(pack.C), 1e-300)
    Pn = max(maxabs(pack.P_berwald), berwald_term_scale(pack))
    perms = [(0, 2, 1), (1, 0, 2), (2, 1, 0)]
    out = {
        "g_symmetry": rel_residual(pack.g, pack.g.T),
        "g_inverse": maxabs(pack.g_inv @ pack.g - np.eye(n)),
        "cartan_symmetry": max(rel_residual(pack.C, pack.C.transpose(p)) for p in perms),
        "cartan_y_contraction": maxabs(np.einsum("ijk,k->ij", pack.C, y)) / max(Cn * maxabs(y), 1e-12),
        "berwald_symmetry": max(
            rel_residual(pack.P_berwald, pack.P_berwald.transpose((0,) + tuple(q + 1 for q in p)), Pn)
            for p in perms
        ),
        "berwald_y_contraction": maxabs(np.einsum("lijk,k->lij", pack.P_berwald, y))
        / max(Pn * maxabs(y), 1e-12),
    }
    return out


def homogeneity_ladder(pack: TensorPack) -> dict[str, float]:
    y = pack.y
    ny = maxabs(y)
    return {
        "y_l": rel_residual(y @ pack.l, pack.F),
        "y_y_g": rel_residual(y @ pack.g @ y, 2 * pack.E),
        "y_C": maxabs(np.einsum("ijk,k->ij", pack.C, y)) / max(maxabs(pack.C) * ny, 1e-12),
        "y_G1": rel_residual(np.einsum("li,i->l", pack.G1, y), 2 * pack.G),
        "y_G2": rel_residual(np.einsum("lij,j->li", pack.G2, y), pack.G1),
        "y_G3": maxabs(np.einsum("lijk,k->lij", pack.G3, y)) / max(maxabs(pack.G2), 1e-300),
    }


def check_cartan_identities(pack: TensorPack) -> dict[str, float]:
    """Residuals of dg^{lm}/dy^i = -2 C_i^{lm}, the vv-curvature relation and
    the antisymmetry Q_pisr = -Q_ipsr."""
    Ci_up_up = np.einsum("la,abi,bm->lmi", pack.g_inv, pack.C, pack.g_inv)
    inv_gap = rel_residual(pack.dginv_dy, -2.0 * Ci_up_up)
    d = pack.dCup_dy  # [l, j, k, i]
    lhs = np.einsum("ljki->lijk", d) - np.einsum("likj->lijk", d)
    rhs = 2.0 * pack.Q_up
    # Q vanishes identically in two dimensions, so measure against C^2 terms
    cc = maxabs(pack.C_up) ** 2
    vv_gap = rel_residual(lhs, rhs, max(cc, 1e-300))
    anti = rel_residual(pack.Q, -np.swapaxes(pack.Q, 0, 1), max(cc * maxabs(pack.g), 1e-300))
    return {"inverse_derivative": inv_gap, "vv_curvature": vv_gap, "q_antisymmetry": anti}


def check_lowered_landsberg(pack: TensorPack) -> dict[str, float]:
    """P^l_ij + (F/2) l_m g^{kl} P^m_ijk, absolute and relative."""
    rhs = -0.5 * pack.F * np.einsum("m,kl,mijk->lij", pack.l, pack.g_inv, pack.P_berwald)
    diff = maxabs(pack.P_landsberg - rhs)
    return {
        "residual": diff,
        "relative": rel_residual(pack.P_landsberg, rhs),
        "scale": max(maxabs(pack.P_berwald), maxabs(pack.P_landsberg)),
    }


def berwald_term_scale(pack: TensorPack, length: float | None = None) -> float:
    """|G2| / length: the size a third y-derivative of the spray would have
    if nothing cancelled.  ``length`` defaults to |y|."""
    length = maxabs(pack.y) if length is None else length
    return max(maxabs(pack.G2) / max(length, 1e-300), 1e-300)


def landsberg_term_scale(pack: TensorPack) -> float:
    """Size of the terms the Landsberg tensor is assembled from.

    P often vanishes by cancellation, so comparisons of two ways of computing
    it are measured against this rather than against |P| itself.
    """
    return 0.5 * maxabs(pack.g_inv) * max(maxabs(pack.dg_dx), 2.0 * maxabs(pack.G1) * maxabs(pack.C),
                                          2.0 * maxabs(pack.G2) * maxabs(pack.g))


def landsberg_forms_agree(pack: TensorPack) -> float:
    diff = maxabs(pack.P_landsberg - pack.P_landsberg_delta)
    return diff / max(maxabs(pack.P_landsberg), landsberg_term_scale(pack), 1e-300)


def indicatrix_sectional_curvature(pack: TensorPack, u, w) -> float:
    """Sectional curvature of the indicatrix at y/F for the plane (u, w).

    u and w are projected g-orthogonally to the Liouville direction.  The
    curvature term is scaled by 2E so the value does not depend on where
    along the ray the pack was evaluated.
    """
    g = pack.g
    y = pack.y
    yy = y @ g @ y

    def project(v):
        v = np.asarray(v, dtype=float)
        return v - (v @ g @ y) / yy * y

    u = project(u)
    w = project(w)
    guu, gww, guw = u @ g @ u, w @ g @ w, u @ g @ w
    gram = guu * gww - guw * guw
    if gram <= 1e-12 * (u @ u) * (w @ w):
        raise SingularEvaluationError("degenerate plane for the indicatrix curvature", gram)
    term = np.einsum("pisr,p,i,s,r->", pack.Q, u, w, w, u)
    return float(1.0 + 2.0 * pack.E * term / gram)


def christoffel_spray(a_of_x, x, y, h: float = 1e-5) -> np.ndarray:
    """G^l = 1/2 Gamma^l_jk y^j y^k from a Riemannian metric a(x) using the
    classical Christoffel formula; metric derivatives by central differences
    unless ``a_of_x`` returns (a, da) itself."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    res = a_of_x(x)
    if isinstance(res, tuple):
        a, da = res
    else:
        a = res
        da = np.empty((n, n, n))
        for k in range(n):
            e = np.zeros(n)
            e[k] = h
            da[k] = (a_of_x(x + e) - a_of_x(x - e)) / (2 * h)
    ainv = np.linalg.inv(a)
    gamma_low = 0.5 * (np.einsum("jmk->mjk", da) + np.einsum("kmj->mjk", da) - np.einsum("mjk->mjk", da))
    # gamma_low[m, j, k] = 1/2 (d_j a_mk + d_k a_mj - d_m a_jk)
    gamma = np.einsum("lm,mjk->ljk", ainv, gamma_low)
    return 0.5 * np.einsum("ljk,j,k->l", gamma, y, y)
