"""Finite-difference oracle and brute-force sweeps.

Nothing here touches jet arithmetic: derivatives come from central-difference
stencils refined by Richardson extrapolation, so agreement with the jet path
is an independent check.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import FinslerLabError, StencilError

# one-dimensional central stencils, all with O(h^2) truncation error
_STENCILS = {
    0: ((0, 1.0),),
    1: ((-1, -0.5), (1, 0.5)),
    2: ((-1, 1.0), (0, -2.0), (1, 1.0)),
    3: ((-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)),
}


@dataclass(frozen=True)
class FDConfig:
    rel_step: float = 1e-2
    levels: int = 3
    max_step: float | None = None  # caps the coarsest step in every coordinate

    def __post_init__(self):
        if self.rel_step <= 0 or self.levels < 2:
            raise ValueError("FDConfig needs rel_step > 0 and levels >= 2")
        if self.max_step is not None and not self.max_step > 0:
            raise ValueError("max_step must be positive")


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based stream keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))


def _central(f, point: np.ndarray, orders: Sequence[int], steps: np.ndarray):
    active = [(k, o) for k, o in enumerate(orders) if o]
    total = None
    stencil_lists = [_STENCILS[o] for _, o in active]
    for combo in _product(stencil_lists):
        shift = np.zeros_like(point)
        weight = 1.0
        for (k, _), (off, w) in zip(active, combo):
            shift[k] += off * steps[k]
            weight *= w
        try:
            val = np.asarray(f(point + shift), dtype=float)
        except FinslerLabError as exc:
            raise StencilError(f"stencil point {point + shift} inadmissible: {exc}") from exc
        total = weight * val if total is None else total + weight * val
    scale = math.prod(steps[k] ** o for k, o in active)
    return total / scale


def _product(lists):
    if not lists:
        yield ()
        return
    for head in lists[0]:
        for tail in _product(lists[1:]):
            yield (head,) + tail


def fd_partial(f: Callable, point, orders: Sequence[int], config: FDConfig = FDConfig()):
    """Mixed partial of f at point; ``orders[k]`` is the derivative order in
    coordinate k (total order <= 3).  Returns (estimate, error_estimate)."""
    point = np.asarray(point, dtype=float)
    orders = list(orders)
    if len(orders) != len(point) or min(orders) < 0:
        raise ValueError("orders must give a nonnegative order per coordinate")
    if sum(orders) > 3:
        raise ValueError("finite-difference order is capped at 3")
    if sum(orders) == 0:
        return np.asarray(f(point), dtype=float), 0.0
    base = config.rel_step * (1.0 + np.abs(point))
    if config.max_step is not None:
        base = np.minimum(base, config.max_step)
    table = []
    for level in range(config.levels):
        row = [_central(f, point, orders, base / 2**level)]
        for j in range(1, level + 1):
            fac = 4.0**j
            row.append((fac * row[j - 1] - table[level - 1][j - 1]) / (fac - 1.0))
        table.append(row)
    best = table[-1][-1]
    err = float(np.max(np.abs(best - table[-2][-1])))
    return best, err


def fd_gradient(f: Callable, point, config: FDConfig = FDConfig()) -> np.ndarray:
    """Stacked first partials along a new trailing axis."""
    point = np.asarray(point, dtype=float)
    parts = []
    for k in range(len(point)):
        orders = [0] * len(point)
        orders[k] = 1
        parts.append(fd_partial(f, point, orders, config)[0])
    return np.stack(parts, axis=-1)


def fd_hessian(f: Callable, point, config: FDConfig = FDConfig()) -> np.ndarray:
    point = np.asarray(point, dtype=float)
    n = len(point)
    out = None
    for i in range(n):
        for j in range(i, n):
            orders = [0] * n
            orders[i] += 1
            orders[j] += 1
            val = fd_partial(f, point, orders, config)[0]
            if out is None:
                out = np.zeros(np.shape(val) + (n, n))
            out[..., i, j] = out[..., j, i] = val
    return out


def sweep_min(f: Callable, sampler: Callable, count: int, seed: int = 0):
    """Smallest |f| over ``count`` samples; inadmissible samples are skipped.

    Returns (min_value, argmin_sample, skipped).
    """
    return _sweep(f, sampler, count, seed, np.less)


def sweep_max(f: Callable, sampler: Callable, count: int, seed: int = 0):
    return _sweep(f, sampler, count, seed, np.greater)


def _sweep(f, sampler, count, seed, better):
    if count < 1:
        raise ValueError("sweep needs count >= 1")
    rng = make_rng(seed)
    best, where, skipped = None, None, 0
    for _ in range(count):
        sample = sampler(rng)
        try:
            val = abs(float(f(sample)))
        except FinslerLabError:
            skipped += 1
            continue
        if best is None or better(val, best):
            best, where = val, sample
    if best is None:
        raise StencilError("every sweep sample was inadmissible")
    return best, where, skipped


# -- admissible sampling ------------------------------------------------------

def admissible_sampler(spec, radius: float | None = None, max_tries: int = 100):
    """Sampler rng -> (x, y): x uniform in the spec's domain ball, y Gaussian,
    redrawn while inside the Finsleroid axis cone."""
    from . import metrics

    n = spec.dimension
    center = spec.center
    radius = spec.domain_radius if radius is None else radius

    def sample(rng):
        d = rng.standard_normal(n)
        x = center + radius * rng.uniform() ** (1.0 / n) * d / np.linalg.norm(d)
        for _ in range(max_tries):
            y = rng.standard_normal(n)
            if np.linalg.norm(y) > 1e-3 and metrics.outside_axis_cone(spec, x, y):
                return x, y
        raise StencilError("could not draw an admissible direction")

    return sample


def draw_points(spec, count: int, seed: int, radius: float | None = None) -> list:
    sampler = admissible_sampler(spec, radius)
    rng = make_rng(seed)
    return [sampler(rng) for _ in range(count)]


# -- transitive certification of a tensor pack -----------------------------------

AXIS_STEP_FRACTION = 0.03
ORACLE_FLOOR = 1e-4  # absolute floor (metric units) for tensors that vanish identically


def _rel(jet, fd, scale: float = 0.0) -> float:
    """Relative gap; ``scale`` is the size of the terms a cancelling tensor is built from."""
    jet, fd = np.asarray(jet, dtype=float), np.asarray(fd, dtype=float)
    den = max(float(np.max(np.abs(jet))), float(np.max(np.abs(fd))), ORACLE_FLOOR, scale)
    return float(np.max(np.abs(jet - fd))) / den


def pack_oracle_residuals(spec, x, y, config: FDConfig = FDConfig()) -> dict[str, float]:
    """Relative gap between each pack field and its finite-difference oracle.

    E and its first two derivatives come from FD of the float energy; higher
    objects are FD derivatives of jet-computed objects one order lower, so no
    stencil goes beyond third order.
    """
    from . import metrics, tensors, taylor

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    pack = tensors.evaluate_pack(spec, x, y)
    base_spec = spec.base()
    # y-derivatives grow like inverse powers of the distance to the axis:
    # stencils stay well clear of it, and that distance sets the length scale
    length = metrics.derivative_length(spec, x, y)
    if base_spec.family == "finsleroid" and config.max_step is None:
        q = metrics.finsleroid_data(base_spec, x, y).q
        config = dataclasses.replace(config, max_step=AXIS_STEP_FRACTION * q)

    def energy_xy(z):
        return metrics.energy_value(spec, z[:n], z[n:])

    z0 = np.concatenate([x, y])
    H = fd_hessian(energy_xy, z0, config)
    grad = fd_gradient(energy_xy, z0, config)
    E = metrics.energy_value(spec, x, y)
    g = H[n:, n:]
    g_inv = np.linalg.inv(g)
    dxE, Ey = grad[:n], grad[n:]
    mixed = H[:n, n:]  # [k, m]
    G = 0.5 * g_inv @ (y @ mixed - dxE)

    def in_y(fun):
        return lambda yy: fun(x, yy)

    def in_x(fun):
        return lambda xx: fun(xx, y)

    metric = lambda xx, yy: tensors.metric_tensor(spec, xx, yy)  # noqa: E731

    def cartan_up(xx, yy):
        Ej = metrics.energy_jet(spec, xx, yy, taylor.DegreeCaps(n, 0, 3))
        return 0.5 * np.einsum("lm,ijm->lij", np.linalg.inv(Ej.tensor_y(2)), Ej.tensor_y(3))

    C = 0.5 * fd_gradient(in_y(metric), y, config)  # [i, j, k]
    dg_dx = np.moveaxis(fd_gradient(in_x(metric), x, config), -1, 0)
    dginv_dy = fd_gradient(in_y(lambda xx, yy: np.linalg.inv(metric(xx, yy))), y, config)
    dCup_dy = fd_gradient(in_y(cartan_up), y, config)
    G1 = fd_gradient(in_y(lambda xx, yy: tensors.spray_derivatives(spec, xx, yy, 0)), y, config)
    G2 = fd_gradient(in_y(lambda xx, yy: tensors.spray_derivatives(spec, xx, yy, 1)), y, config)
    G3 = fd_gradient(in_y(lambda xx, yy: tensors.spray_derivatives(spec, xx, yy, 2)), y, config)

    C_up = np.einsum("lm,ijm->lij", g_inv, C)
    Q_up = np.einsum("ljm,mik->lijk", C_up, C_up) - np.einsum("lim,mjk->lijk", C_up, C_up)
    bracket = (dg_dx - 2.0 * np.einsum("ki,jkm->ijm", G1, C)
               - np.einsum("kij,km->ijm", G2, g) - np.einsum("kim,jk->ijm", G2, g))
    landsberg = 0.5 * np.einsum("lm,ijm->lij", g_inv, bracket)
    F = math.sqrt(2.0 * E)
    lscale = tensors.landsberg_term_scale(pack)
    bscale = float(np.max(np.abs(pack.G2))) / length
    qscale = float(np.max(np.abs(pack.C_up))) ** 2

    return {
        "E": _rel(pack.E, E), "F": _rel(pack.F, F), "E_y": _rel(pack.E_y, Ey),
        "l": _rel(pack.l, Ey / F), "g": _rel(pack.g, g), "g_inv": _rel(pack.g_inv, g_inv),
        "C": _rel(pack.C, C), "C_up": _rel(pack.C_up, C_up),
        "Q_up": _rel(pack.Q_up, Q_up, qscale),
        "Q": _rel(pack.Q, np.einsum("rt,tpis->pisr", g, Q_up), qscale * float(np.max(np.abs(g)))),
        "G": _rel(pack.G, G), "G1": _rel(pack.G1, G1), "G2": _rel(pack.G2, G2),
        "G3": _rel(pack.G3, G3, bscale), "P_berwald": _rel(pack.P_berwald, -G3, bscale),
        "P_landsberg": _rel(pack.P_landsberg, landsberg, lscale),
        "P_landsberg_delta": _rel(pack.P_landsberg_delta, landsberg, lscale),
        "dg_dx": _rel(pack.dg_dx, dg_dx), "dginv_dy": _rel(pack.dginv_dy, dginv_dy),
        "dCup_dy": _rel(pack.dCup_dy, dCup_dy),
    }
