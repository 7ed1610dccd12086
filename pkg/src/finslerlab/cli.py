"""Command-line front end: run check suites on a metric spec and emit reports.

Reports are JSON objects with a fixed, versioned layout; ``--format table``
prints a summary instead.  Exit codes: 0 when every check passes or the
conformal hypothesis could not be established, 1 on a residual failure,
2 on spec or usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Iterable

import numpy as np
import scipy.linalg

from . import conformal, metrics, oracle, riccati, tensors
from .errors import ConfigurationError, DimensionError, FinslerLabError
from .metrics import MetricSpec, PolyScalar

REPORT_VERSION = 1
SUITES = ("identities", "conformal", "rigidity", "riccati", "compare")
HYPOTHESIS_TOL = 1e-6
PASS, FAIL, HNE = "pass", "fail", "hypothesis_not_established"


@dataclass
class Check:
    name: str
    anchor: str
    max_residual: float
    tolerance: float
    samples: int = 1
    skipped: int = 0
    bound: str = "upper"   # "upper": residual <= tol; "lower": residual > tol
    gated: bool = False    # conclusion only asserted for hypothesis pairs

    def record(self, tol_scale: float, hypothesis: bool) -> dict:
        tol = self.tolerance * tol_scale if self.bound == "upper" else self.tolerance
        value = float(self.max_residual)
        if math.isnan(value) or self.samples == 0:
            ok = False
        elif self.bound == "upper":
            ok = value <= tol
        else:
            ok = value > tol
        if self.gated and not hypothesis:
            status = HNE
        else:
            status = PASS if ok else FAIL
        return {
            "name": self.name, "anchor": self.anchor, "samples": int(self.samples),
            "skipped": int(self.skipped), "max_residual": value, "tolerance": tol,
            "bound": self.bound, "pass": status == PASS, "status": status,
        }


def _accumulate(items: Iterable, fn: Callable[..., dict]) -> tuple[dict, int, int]:
    """Maximum of each residual returned by fn over items; errors count as skips."""
    best: dict[str, float] = {}
    kept = skipped = 0
    for item in items:
        try:
            res = fn(item)
        except FinslerLabError:
            skipped += 1
            continue
        kept += 1
        for k, v in res.items():
            v = float(v)
            best[k] = v if math.isnan(v) else max(best.get(k, -math.inf), v)
    return best, kept, skipped


def parse_vector(text: str, n: int | None = None) -> np.ndarray:
    try:
        vec = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise ConfigurationError(f"cannot parse vector {text!r}") from None
    if n is not None and len(vec) != n:
        raise ConfigurationError(f"expected {n} components, got {len(vec)}")
    return vec


def conformal_pair(spec: MetricSpec, alpha_text: str | None = None) -> tuple[MetricSpec, PolyScalar]:
    """(F, alpha): a conformal spec supplies both; otherwise alpha is linear
    with coefficients from ``alpha_text`` (default x^1)."""
    if spec.family == "conformal" and alpha_text is None:
        return spec.inner, spec.alpha
    if alpha_text is None:
        coeffs = np.zeros(spec.dimension)
        coeffs[0] = 1.0
    else:
        coeffs = parse_vector(alpha_text, spec.dimension)
    return spec, PolyScalar.linear(coeffs)


class SuiteRunner:
    """Runs suites on one spec, sharing sampled points and conformal packs."""

    def __init__(self, spec: MetricSpec, *, samples: int = 100, seed: int = 0, grid: int = 101,
                 alpha: str | None = None, oracle_points: int | None = None):
        if samples < 1 or grid < 2:
            raise ConfigurationError("samples must be >= 1 and grid >= 2")
        self.spec = spec
        self.samples = samples
        self.seed = seed
        self.grid = grid
        self.oracle_points = min(samples, 10) if oracle_points is None else oracle_points
        self.F, self.alpha = conformal_pair(spec, alpha)
        self.spec_points = oracle.draw_points(spec, samples, seed)
        self.pair_points = oracle.draw_points(self.F, samples, seed + 1)
        self._cps: list | None = None
        self._hyp: Check | None = None

    # -- shared state ---------------------------------------------------------

    def packs(self) -> list:
        """Conformal packs at the pair sample; inadmissible points become None."""
        if self._cps is None:
            self._cps = []
            for x, y in self.pair_points:
                try:
                    self._cps.append(conformal.build_conformal_pack(self.F, self.alpha, x, y))
                except FinslerLabError:
                    self._cps.append(None)
        return self._cps

    def _over_packs(self, fn) -> tuple[dict, int, int]:
        def guarded(cp):
            if cp is None:
                raise FinslerLabError("inadmissible sample")
            return fn(cp)
        return _accumulate(self.packs(), guarded)

    def hypothesis_check(self) -> Check:
        if self._hyp is None:
            best, kept, skipped = self._over_packs(conformal.contracted_invariance)
            self._hyp = Check("hypothesis_contracted_berwald", "alpha-contracted Berwald invariance",
                              best.get("berwald", math.nan), HYPOTHESIS_TOL, kept, skipped,
                              gated=True)
        return self._hyp

    @property
    def hypothesis(self) -> bool:
        h = self.hypothesis_check()
        return h.samples > 0 and h.max_residual <= h.tolerance

    def _need_dimension(self, suite: str) -> None:
        if self.spec.dimension < 3:
            raise DimensionError(
                f"suite {suite!r} needs dimension >= 3: in two dimensions ker d(alpha) is a "
                "line with two rays, the subspace constants may differ between them, and "
                "the singular two-dimensional solutions are not implemented")

    def _line_setup(self, rng) -> tuple[np.ndarray, np.ndarray]:
        """Base point p = domain center and a unit admissible v in ker d(alpha)."""
        p = self.F.center
        da = self.alpha.gradient(p)
        basis = scipy.linalg.null_space(da[None, :])
        for _ in range(100):
            u = rng.standard_normal(basis.shape[1])
            v = basis @ (u / np.linalg.norm(u))
            v = v - (v @ da) / (da @ da) * da
            if metrics.outside_axis_cone(self.F, p, v):
                return p, v
        raise ConfigurationError("no admissible direction in ker d(alpha) at the base point")

    def _grid(self) -> np.ndarray:
        return np.linspace(-10.0, 10.0, self.grid)

    # -- suites -------------------------------------------------------------

    def identities(self) -> list[Check]:
        spec = self.spec
        pts = self.spec_points
        riemannian = spec.base().family == "riemannian"

        def at(pt):
            pack = tensors.evaluate_pack(spec, *pt)
            low = tensors.check_lowered_landsberg(pack)
            return {
                "invariants": max(tensors.check_pack_invariants(pack).values()),
                "homogeneity": max(tensors.homogeneity_ladder(pack).values()),
                "cartan": max(tensors.check_cartan_identities(pack).values()),
                "lowered": low["residual"] / max(1.0, low["scale"]),
                "forms": tensors.landsberg_forms_agree(pack),
                "vanishing": max(tensors.maxabs(pack.P_landsberg), tensors.maxabs(pack.P_berwald)),
            }

        best, kept, skipped = _accumulate(pts, at)
        checks = [
            Check("pack_symmetries", "index symmetries and inverse of the pack",
                  best.get("invariants", math.nan), 1e-9, kept, skipped),
            Check("homogeneity_ladder", "homogeneity degrees of E, g, C and spray derivatives",
                  best.get("homogeneity", math.nan), 1e-9, kept, skipped),
            Check("cartan_identities", "inverse-metric derivative, vv-curvature, Q antisymmetry",
                  best.get("cartan", math.nan), 1e-8, kept, skipped),
            Check("lowered_landsberg", "Landsberg tensor as the Liouville contraction of Berwald",
                  best.get("lowered", math.nan), 1e-8, kept, skipped),
            Check("landsberg_forms", "Landsberg tensor from spray and from Berwald contraction",
                  best.get("forms", math.nan), 1e-9, kept, skipped),
        ]
        if riemannian:
            checks.append(Check("riemannian_landsberg_berwald_vanish",
                                "Landsberg and Berwald tensors of a Riemannian metric",
                                best.get("vanishing", math.nan), 1e-12, kept, skipped))

        fields, okept, oskipped = _accumulate(
            pts[: self.oracle_points], lambda pt: oracle.pack_oracle_residuals(spec, *pt))
        checks.append(Check("oracle_agreement", "jet tensors against finite differences",
                            max(fields.values()) if fields else math.nan, 1e-6, okept, oskipped))

        rng = oracle.make_rng(self.seed + 2)
        target = self._indicatrix_target()

        def curvature(pt):
            pack = tensors.evaluate_pack(spec, *pt)
            ks = np.array([tensors.indicatrix_sectional_curvature(
                pack, rng.standard_normal(spec.dimension), rng.standard_normal(spec.dimension))
                for _ in range(3)])
            out = {"spread": float(np.ptp(ks) / abs(ks.mean()))}
            if target is not None:
                out["target"] = float(np.max(np.abs(ks - target(pt[0]))))
            return out

        if spec.dimension >= 3:
            curv, ckept, cskipped = _accumulate(pts, curvature)
            checks.append(Check("indicatrix_curvature_constancy",
                                "indicatrix sectional curvature independent of the plane",
                                curv.get("spread", math.nan), 1e-6, ckept, cskipped))
            if target is not None:
                checks.append(Check("indicatrix_curvature_value",
                                    "indicatrix curvature 1 (Riemannian) or 1 - g^2/4 (Finsleroid)",
                                    curv.get("target", math.nan), 1e-9, ckept, cskipped))

        if spec.base().family == "finsleroid":
            base = spec.base()

            def phi(pt):
                r = metrics.phi_forms_agree(base, *pt)
                return {"residual": r["residual"], "limit_error": r["limit_error"]}

            ph, pkept, pskipped = _accumulate(pts, phi)
            checks.append(Check("phi_branch_identity", "piecewise Phi against the arctan form",
                                ph.get("residual", math.nan), 1e-12, pkept, pskipped))
            checks.append(Check("phi_axis_limit", "Phi at |b| = 1e-6 against its b -> 0 limit",
                                ph.get("limit_error", math.nan), 1e-8, pkept, pskipped))
        return checks

    def _indicatrix_target(self):
        base = self.spec.base()
        if base.family == "riemannian":
            return lambda x: 1.0
        if base.family == "finsleroid":
            return lambda x: 1.0 - base.charge(x) ** 2 / 4.0
        return None

    def conformal(self) -> list[Check]:
        inv, kept, skipped = self._over_packs(conformal.check_conformal_invariants)
        consistency = max((v for k, v in inv.items() if not k.startswith("dual_")), default=math.nan)
        dual = max(inv.get("dual_B2", math.nan), inv.get("dual_B3", math.nan))

        def transformation(cp):
            r = conformal.landsberg_transformation_residual(cp.inner, cp.wrapped, cp)
            return {"landsberg": r / cp.scale(cp.wrapped.P_landsberg)}

        tr, tkept, tskipped = self._over_packs(transformation)
        cons, ckept, cskipped = self._over_packs(conformal.invariance_consequences_residual)
        ci, _, _ = self._over_packs(conformal.contracted_invariance)
        return [
            Check("gradient_lifting_identities", "X = g^{-1} d(alpha) and its y-derivatives",
                  consistency, 1e-9, kept, skipped),
            Check("dual_difference_tensors", "closed-form B against wrapped-minus-inner spray",
                  dual, 1e-8, kept, skipped),
            Check("landsberg_transformation", "conformal transformation law of the Landsberg tensor",
                  tr.get("landsberg", math.nan), 1e-8, tkept, tskipped),
            self.hypothesis_check(),
            Check("contracted_landsberg_invariance", "alpha-contracted Landsberg difference",
                  ci.get("landsberg", math.nan), 1e-8, kept, skipped, gated=True),
            Check("invariance_consequences", "second derivatives of X.alpha under invariance",
                  max(cons.get("x2_contracted", math.nan), cons.get("x2_transvected", math.nan)),
                  1e-8, ckept, cskipped, gated=True),
        ]

    def rigidity(self) -> list[Check]:
        self._need_dimension("rigidity")
        F, alpha = self.F, self.alpha
        deg, kept, skipped = self._over_packs(conformal.degeneracy_residual)

        def grams(cp):
            g1, g2 = conformal.gram_tests(cp)
            n1, n2 = conformal.gram_norms(cp)
            return {"gram1": abs(g1) / n1, "gram2": abs(g2) / n2,
                    "b2": abs(cp.b2 - 1.0), "quadratic": tensors.maxabs(cp.E_star3) / cp.scale()}

        gr, gkept, gskipped = self._over_packs(grams)
        dec, dkept, dskipped = self._over_packs(conformal.theta_and_gstar_decomposition)
        ci, _, _ = self._over_packs(conformal.contracted_invariance)

        checks = [
            self.hypothesis_check(),
            Check("degeneracy_identity_sides", "both sides of the cubic degeneracy identity vanish",
                  max(deg.get("lhs", math.nan), deg.get("rhs", math.nan)), 1e-7, kept, skipped,
                  gated=True),
            Check("degeneracy_identity", "cubic degeneracy identity, sides assembled independently",
                  deg.get("degeneracy_identity", math.nan), 1e-7, kept, skipped, gated=True),
            Check("w_contracted_identity", "degeneracy identity contracted with W",
                  deg.get("w_contraction", math.nan), 1e-7, kept, skipped, gated=True),
            Check("gram_bracket", "bracket expansion of the (eta, W) Gram determinant",
                  deg.get("gram_bracket", math.nan), 1e-9, kept, skipped),
            Check("gram_eta_w", "Gram determinant of eta and W vanishes",
                  gr.get("gram1", math.nan), 1e-8, gkept, gskipped, gated=True),
            Check("gram_x_xstar_y", "Gram determinant of X, X_* and y vanishes",
                  gr.get("gram2", math.nan), 1e-8, gkept, gskipped, gated=True),
            Check("unit_b2", "b^2 = 1 for the associated Riemannian metric",
                  gr.get("b2", math.nan), 1e-8, gkept, gskipped, gated=True),
            Check("associated_quadraticity", "third y-derivatives of E_* vanish",
                  gr.get("quadratic", math.nan), 1e-9, gkept, gskipped, gated=True),
            Check("theta_coefficient_relations", "coefficient relations of the g_* decomposition",
                  max(dec.get("coefficient_relation_p", math.nan),
                      dec.get("coefficient_relation_q", math.nan)), 1e-9, dkept, dskipped),
            Check("gstar_decomposition", "W, d(X.alpha) and g_* through theta",
                  max(dec.get("w_projection", math.nan), dec.get("xa_gradient", math.nan),
                      dec.get("gstar_decomposition", math.nan)), 1e-8, dkept, dskipped, gated=True),
        ]

        base = F.base()
        if base.family == "finsleroid" and any(
                abs(base.charge(x)) > 1e-12 for x, _ in self.pair_points):
            checks.append(Check("full_invariance_excluded", "uncontracted Berwald difference is nonzero",
                                ci.get("uncontracted", math.nan), 1e-3, kept, skipped, bound="lower"))
        elif base.family == "riemannian":
            checks.append(Check("full_invariance_riemannian", "Riemannian Berwald difference vanishes",
                                ci.get("uncontracted", math.nan), 1e-12, kept, skipped))

        if F.family == "finsleroid":
            fg, fkept, fskipped = self._over_packs(
                lambda cp: conformal.finsleroid_gradient_residual(F, cp))
            checks.append(Check("finsleroid_gradient_closed_form", "E X against the Finsleroid axis form",
                                max(fg.values()) if fg else math.nan, 1e-9, fkept, fskipped,
                                gated=True))

        p = F.center
        try:
            sub = conformal.subspace_constancy(F, alpha, p, oracle.make_rng(self.seed + 3), count=40)
            checks += [
                Check("subspace_constant_xa", "X.alpha constant on ker d(alpha)",
                      sub["xa_spread"], 1e-8, sub["samples"], sub["skipped"], gated=True),
                Check("subspace_constant_fw", "F W.alpha constant on ker d(alpha)",
                      sub["fw_spread"], 1e-8, sub["samples"], sub["skipped"], gated=True),
                Check("charge_two_ways", "K from the line derivative and from the subspace constants",
                      sub["K_formula_gap"], 1e-7, sub["samples"], sub["skipped"], gated=True),
            ]
            if F.family in ("finsleroid", "riemannian"):
                charge = F.charge(p) if F.family == "finsleroid" else 0.0
                checks.append(Check("charge_correspondence", "K(p) = 2 g(p)",
                                    abs(sub["K"] - 2.0 * charge), 1e-7, sub["samples"], sub["skipped"],
                                    gated=True))
        except FinslerLabError:
            checks.append(Check("subspace_constant_xa", "X.alpha constant on ker d(alpha)",
                                math.nan, 1e-8, 0, 40, gated=True))
        return checks

    def riccati(self) -> list[Check]:
        rng = oracle.make_rng(self.seed + 4)
        checks = ode_checks(rng)
        if self.spec.dimension < 3:
            return checks
        p, v = self._line_setup(rng)
        try:
            _, rep = riccati.extract_line_profile(self.F, self.alpha, p, v, self._grid())
        except FinslerLabError:
            rep = {"profile": math.nan, "z_vs_closed_form": math.nan, "riccati": math.nan,
                   "samples": 0, "skipped": self.grid}
        s, k = rep["samples"], rep["skipped"]
        checks += [
            Check("line_energy_profile", "metric energy along c(t) against the line formula",
                  rep["profile"], 1e-8, s, k, gated=True),
            Check("line_log_derivative", "y'/y along c(t) against the closed-form z",
                  rep["z_vs_closed_form"], 1e-8, s, k, gated=True),
            Check("line_riccati_residual", "metric-derived z, z' in the Riccati equation",
                  rep["riccati"], 1e-8, s, k, gated=True),
        ]
        return checks

    def compare(self) -> list[Check]:
        self._need_dimension("compare")
        checks = [self.hypothesis_check()]
        if self.F.family != "finsleroid":
            return checks
        rng = oracle.make_rng(self.seed + 5)
        p, v = self._line_setup(rng)
        try:
            rep = riccati.finsleroid_comparison(self.F, self.alpha, p, v, self._grid())
        except FinslerLabError:
            rep = {key: math.nan for key in ("K", "charge", "profile", "comparison",
                                             "quadratic_identity", "phi_identity")}
            rep.update(samples=0, skipped=self.grid)
        s, k = rep["samples"], rep["skipped"]
        checks += [
            Check("finsleroid_charge", "K = 2g at the base point",
                  abs(rep["K"] - 2.0 * rep["charge"]), 1e-7, s, k, gated=True),
            Check("line_energy_profile", "metric energy along c(t) against the line formula",
                  rep["profile"], 1e-8, s, k, gated=True),
            Check("finsleroid_energy_match", "line formula against the rescaled Finsleroid energy",
                  rep["comparison"], 1e-8, s, k, gated=True),
            Check("quadratic_identity", "Finsleroid quadratic form along the line",
                  rep["quadratic_identity"], 1e-10, s, k, gated=True),
            Check("phi_identity", "Finsleroid Phi along the line",
                  rep["phi_identity"], 1e-10, s, k, gated=True),
        ]
        return checks

    def run(self, suite: str) -> list[Check]:
        if suite == "all":
            if self.spec.dimension < 3:
                self._need_dimension("all")
            seen, out = set(), []
            for name in SUITES:
                for c in getattr(self, name)():
                    if c.name not in seen:
                        seen.add(c.name)
                        out.append(c)
            return out
        if suite not in SUITES:
            raise ConfigurationError(f"unknown suite {suite!r}; choose from {SUITES + ('all',)}")
        return getattr(self, suite)()


def ode_checks(rng, cases: int = 20) -> list[Check]:
    """Closed-form Riccati checks independent of any metric."""
    ts = np.linspace(-10.0, 10.0, 201)
    res = rk = z0 = 0.0
    for _ in range(cases):
        K = rng.uniform(-3.9, 3.9)
        F = rng.uniform(0.3, 3.0)
        z = riccati.closed_form_z(K, F, ts)
        dz = riccati.closed_form_dz(K, F, ts)
        res = max(res, riccati.riccati_residual(ts, z, dz, F * F, 1.0) / (1.0 + np.max(np.abs(z))))
        z0 = max(z0, abs(float(riccati.closed_form_z(K, F, 0.0)) - K / F) / max(1.0, abs(K / F)))
    for K, F in ((rng.uniform(-3.9, 3.9), rng.uniform(0.5, 2.0)) for _ in range(3)):
        t, zs = riccati.integrate_numerically(K, F, -10.0, 10.0, steps=4000)
        rk = max(rk, float(np.max(np.abs(zs - riccati.closed_form_z(K, F, t)))))
    rejected = 0
    for K in (4.0, -4.0, 5.5):
        try:
            riccati.closed_form_z(K, 1.0, 0.0)
        except riccati.InadmissibleChargeError:
            rejected += 1
    return [
        Check("riccati_closed_form", "closed-form z in the reduced Riccati equation", res, 1e-10, cases),
        Check("riccati_initial_value", "z(0) = K / F_*", z0, 0.0, cases),
        Check("riccati_rk4", "RK4 trajectory against the closed form", rk, 1e-6, 3),
        Check("riccati_charge_range", "|K| >= 4 rejected", 3 - rejected, 0.0, 3),
    ]


# -- reports --------------------------------------------------------------

def assemble(suite: str, spec_digest: str | None, seed: int | None, checks: list[dict],
             wall_time: float, extra: dict | None = None) -> dict:
    statuses = [c["status"] for c in checks]
    if FAIL in statuses:
        status = FAIL
    elif HNE in statuses:
        status = HNE
    else:
        status = PASS
    report = {"version": REPORT_VERSION, "suite": suite, "spec_digest": spec_digest, "seed": seed}
    if extra:
        report.update(extra)
    report.update(checks=checks, status=status, pass_=status == PASS, wall_time=wall_time)
    report["pass"] = report.pop("pass_")
    report["wall_time"] = report.pop("wall_time")
    return report


def run_suite(suite: str, spec: MetricSpec, *, samples: int = 100, seed: int = 0,
              tol_scale: float = 1.0, grid: int = 101, alpha: str | None = None) -> dict:
    if not tol_scale > 0:
        raise ConfigurationError("tol-scale must be positive")
    start = time.perf_counter()
    runner = SuiteRunner(spec, samples=samples, seed=seed, grid=grid, alpha=alpha)
    checks = runner.run(suite)
    hyp = runner.hypothesis if any(c.gated for c in checks) else True
    records = [c.record(tol_scale, hyp) for c in checks]
    return assemble(suite, spec.digest(), seed, records, time.perf_counter() - start)


def strip_timing(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "wall_time"}


def exit_code(report: dict) -> int:
    return 1 if report["status"] == FAIL else 0


def format_table(report: dict) -> str:
    rows = [("check", "status", "max_residual", "bound", "tolerance", "samples", "skipped")]
    for c in report["checks"]:
        rows.append((c["name"], c["status"], f"{c['max_residual']:.3e}",
                     "<=" if c["bound"] == "upper" else ">", f"{c['tolerance']:.1e}",
                     str(c["samples"]), str(c["skipped"])))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    lines.append(f"suite={report['suite']} status={report['status']} "
                 f"wall_time={report['wall_time']:.2f}s")
    return "\n".join(lines)


# -- subcommands ----------------------------------------------------------

def load_spec(path: str) -> MetricSpec:
    """Read a spec file; ``bundled:NAME`` selects a spec shipped with the package."""
    if path.startswith("bundled:"):
        name = path.split(":", 1)[1]
        try:
            text = resources.files("finslerlab").joinpath(f"specs/{name}.json").read_text()
        except FileNotFoundError:
            raise ConfigurationError(f"no bundled spec named {name!r}") from None
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigurationError(f"cannot read spec {path!r}: {exc}") from None
    try:
        return metrics.parse_spec(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"spec {path!r} is not valid JSON: {exc}") from None


def bundled_specs() -> list[str]:
    folder = resources.files("finslerlab").joinpath("specs")
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def _cmd_eval(args) -> dict:
    spec = load_spec(args.spec)
    x = parse_vector(args.x, spec.dimension)
    y = parse_vector(args.y, spec.dimension)
    pack = tensors.evaluate_pack(spec, x, y)
    fields = {
        "g": ("g", "g_inv"),
        "cartan": ("C", "C_up", "Q"),
        "spray": ("G", "G1", "G2"),
        "berwald": ("P_berwald",),
        "landsberg": ("P_landsberg",),
        "pack": ("E", "F", "E_y", "g", "g_inv", "C", "C_up", "Q", "G", "G1", "G2", "G3",
                 "P_berwald", "P_landsberg"),
    }[args.tensor]
    return {"version": REPORT_VERSION, "spec_digest": spec.digest(), "x": x.tolist(),
            "y": y.tolist(), "tensors": {k: np.asarray(getattr(pack, k)).tolist() for k in fields}}


def _cmd_check(args) -> dict:
    return run_suite(args.suite, load_spec(args.spec), samples=args.samples, seed=args.seed,
                     tol_scale=args.tol_scale, alpha=args.alpha)


def _cmd_compare(args) -> dict:
    return run_suite("compare", load_spec(args.spec), samples=args.samples, seed=args.seed,
                     tol_scale=args.tol_scale, grid=args.grid, alpha=args.alpha)


def _cmd_riccati(args) -> dict:
    start = time.perf_counter()
    K, F = riccati.check_K(args.K), args.fstar
    t0, t1 = args.t0, args.t1
    ts = np.linspace(t0, t1, 201)
    z = riccati.closed_form_z(K, F, ts)
    res = riccati.riccati_residual(ts, z, riccati.closed_form_dz(K, F, ts), F * F, 1.0)
    t, zs = riccati.integrate_numerically(K, F, t0, t1, steps=args.steps)
    z0 = abs(float(riccati.closed_form_z(K, F, 0.0)) - K / F) / max(1.0, abs(K / F))
    checks = [
        Check("riccati_closed_form", "closed-form z in the reduced Riccati equation",
              res / (1.0 + float(np.max(np.abs(z)))), 1e-10, len(ts)),
        Check("riccati_initial_value", "z(0) = K / F_*", z0, 0.0),
        Check("riccati_rk4", "RK4 trajectory against the closed form",
              float(np.max(np.abs(zs - riccati.closed_form_z(K, F, t)))), 1e-6, args.steps + 1),
    ]
    records = [c.record(args.tol_scale, True) for c in checks]
    extra = {"K": K, "F_star": F, "K_star_unit_energy": 1.0 / (F * F)}
    return assemble("riccati", None, None, records, time.perf_counter() - start, extra)


SWEEP_QUANTITIES = ("indicatrix-curvature", "gram1", "gram2", "b-contraction")


def _cmd_sweep(args) -> dict:
    start = time.perf_counter()
    spec = load_spec(args.spec)
    F, alpha = conformal_pair(spec, args.alpha)
    rng = oracle.make_rng(args.seed + 6)

    if args.quantity == "indicatrix-curvature":
        sampler_spec = spec

        def value(pt):
            pack = tensors.evaluate_pack(spec, *pt)
            return tensors.indicatrix_sectional_curvature(
                pack, rng.standard_normal(spec.dimension), rng.standard_normal(spec.dimension))
    else:
        sampler_spec = F

        def value(pt):
            cp = conformal.build_conformal_pack(F, alpha, *pt, packs=False)
            if args.quantity == "b-contraction":
                return conformal.contracted_invariance(cp)["berwald"]
            g1, g2 = conformal.gram_tests(cp)
            n1, n2 = conformal.gram_norms(cp)
            return abs(g1) / n1 if args.quantity == "gram1" else abs(g2) / n2

    values, where = [], None
    skipped = 0
    for pt in oracle.draw_points(sampler_spec, args.samples, args.seed):
        try:
            val = float(value(pt))
        except FinslerLabError:
            skipped += 1
            continue
        if where is None or abs(val) > max(abs(v) for v in values):
            where = pt
        values.append(val)
    if not values:
        raise ConfigurationError("every sweep sample was inadmissible")
    arr = np.array(values)
    stats = {
        "quantity": args.quantity, "samples": len(arr), "skipped": skipped,
        "min": float(arr.min()), "max": float(arr.max()), "mean": float(arr.mean()),
        "std": float(arr.std()), "max_abs": float(np.max(np.abs(arr))),
        "argmax_abs": {"x": where[0].tolist(), "y": where[1].tolist()},
    }
    return {"version": REPORT_VERSION, "suite": "sweep", "spec_digest": spec.digest(),
            "seed": args.seed, "sweep": stats, "status": PASS, "pass": True,
            "wall_time": time.perf_counter() - start}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finslerlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, spec=True):
        if spec:
            p.add_argument("--spec", required=True,
                           help="spec JSON file, or bundled:NAME for a shipped example")
        p.add_argument("--format", choices=("json", "table"), default="json")

    p = sub.add_parser("eval", help="evaluate tensors at one point")
    common(p)
    p.add_argument("--x", required=True, help="comma-separated position")
    p.add_argument("--y", required=True, help="comma-separated direction")
    p.add_argument("--tensor", default="pack",
                   choices=("g", "cartan", "spray", "berwald", "landsberg", "pack"))
    p.set_defaults(func=_cmd_eval)

    for name, func in (("check", _cmd_check), ("compare", _cmd_compare)):
        p = sub.add_parser(name, help="run a check suite" if name == "check"
                           else "compare line energies with the Finsleroid")
        common(p)
        if name == "check":
            p.add_argument("--suite", required=True, choices=SUITES + ("all",))
        else:
            p.add_argument("--grid", type=int, default=101)
        p.add_argument("--samples", type=int, default=100)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol-scale", type=float, default=1.0)
        p.add_argument("--alpha", help="comma-separated coefficients of a linear alpha "
                       "(default: the spec's own alpha, else x^1)")
        p.set_defaults(func=func)

    p = sub.add_parser("riccati", help="closed-form Riccati checks for one (K, F_*)")
    common(p, spec=False)
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--fstar", type=float, required=True)
    p.add_argument("--t0", type=float, default=-10.0)
    p.add_argument("--t1", type=float, default=10.0)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--tol-scale", type=float, default=1.0)
    p.set_defaults(func=_cmd_riccati)

    p = sub.add_parser("sweep", help="brute-force extremes of a scalar quantity")
    common(p)
    p.add_argument("--quantity", required=True, choices=SWEEP_QUANTITIES)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha")
    p.set_defaults(func=_cmd_sweep)

    sub.add_parser("list-specs", help="names usable as bundled:NAME").set_defaults(func=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    if args.command == "list-specs":
        print("\n".join(bundled_specs()))
        return 0
    try:
        report = args.func(args)
    except FinslerLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.format == "table" and "checks" in report:
        print(format_table(report))
    else:
        print(json.dumps(report, indent=2))
    return exit_code(report) if "status" in report else 0


if __name__ == "__main__":
    sys.exit(main())
