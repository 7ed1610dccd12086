import numpy as np
import pytest

from finslerlab import tensors
from finslerlab.errors import SingularEvaluationError
from finslerlab.metrics import parse_spec

from conftest import IDENTITY3, bundled, finsleroid_doc, lin, points


def test_euclidean_pack_vanishes_exactly():
    pack = tensors.evaluate_pack(bundled("euclidean"), np.zeros(3), [0.3, -1.0, 2.0])
    for name in ("C", "Q", "G", "G1", "G2", "G3", "P_berwald", "P_landsberg"):
        assert np.all(getattr(pack, name) == 0), name


def test_spray_matches_christoffel_formula():
    spec = parse_spec({"dimension": 3, "family": "riemannian",
                       "a": [[lin([1, 0, 0], 1), 0, 0], [0, lin([1, 0, 0], 1), 0],
                             [0, 0, lin([1, 0, 0], 1)]]})

    def a_of_x(x):
        a = (1 + x[0]) * np.eye(3)
        da = np.zeros((3, 3, 3))
        da[0] = np.eye(3)
        return a, da

    x = np.zeros(3)
    for _, y in points(spec, 10):
        pack = tensors.evaluate_pack(spec, x, y)
        assert tensors.rel_residual(pack.G, tensors.christoffel_spray(a_of_x, x, y)) <= 1e-10


def test_locally_minkowski_has_no_spray():
    spec = parse_spec(finsleroid_doc(a=[[2, 0, 0], [0, 1, 0.3], [0, 0.3, 1]], axis=(2 ** 0.5, 0, 0)))
    for x, y in points(spec, 10):
        pack = tensors.evaluate_pack(spec, x, y)
        for name in ("G", "P_landsberg", "P_berwald"):
            assert tensors.maxabs(getattr(pack, name)) <= 1e-12, name


@pytest.mark.parametrize("name", ["curved_riemannian", "finsleroid", "conformal_finsleroid"])
def test_pack_invariants(name):
    spec = bundled(name)
    for x, y in points(spec, 20):
        pack = tensors.evaluate_pack(spec, x, y)
        inv = tensors.check_pack_invariants(pack)
        assert inv["g_inverse"] <= 1e-12
        assert max(inv.values()) <= 1e-10, inv
        assert tensors.landsberg_forms_agree(pack) <= 1e-10


@pytest.mark.parametrize("name", ["curved_riemannian", "finsleroid", "conformal_finsleroid"])
def test_cartan_identities(name):
    spec = bundled(name)
    for x, y in points(spec, 20):
        rep = tensors.check_cartan_identities(tensors.evaluate_pack(spec, x, y))
        assert rep["inverse_derivative"] <= 1e-9
        assert rep["vv_curvature"] <= 1e-9
        assert rep["q_antisymmetry"] <= 1e-10


def test_lowered_landsberg_on_wrapped_finsleroid():
    from finslerlab.metrics import PolyScalar, conformal_wrap
    spec = conformal_wrap(bundled("finsleroid"), PolyScalar.linear([0.1, 0, 0]))
    for x, y in points(spec, 20):
        rep = tensors.check_lowered_landsberg(tensors.evaluate_pack(spec, x, y))
        assert rep["residual"] <= 1e-8 * rep["scale"]


def test_riemannian_landsberg_zero():
    spec = bundled("curved_riemannian")
    for x, y in points(spec, 20):
        pack = tensors.evaluate_pack(spec, x, y)
        assert tensors.maxabs(pack.P_landsberg) <= 1e-12
        assert tensors.maxabs(pack.P_berwald) <= 1e-12
        assert tensors.check_lowered_landsberg(pack)["residual"] <= 1e-12


def test_indicatrix_curvature_riemannian_is_one(rng):
    spec = bundled("curved_riemannian")
    for x, y in points(spec, 10):
        pack = tensors.evaluate_pack(spec, x, y)
        for _ in range(5):
            k = tensors.indicatrix_sectional_curvature(pack, rng.standard_normal(3), rng.standard_normal(3))
            assert k == pytest.approx(1.0, abs=1e-9)


def test_indicatrix_curvature_finsleroid_constant(rng):
    spec = parse_spec(finsleroid_doc(0.8))
    ks = []
    for x, y in points(spec, 10):
        pack = tensors.evaluate_pack(spec, x, y)
        ks += [tensors.indicatrix_sectional_curvature(pack, rng.standard_normal(3), rng.standard_normal(3))
               for _ in range(50)]
    ks = np.array(ks)
    assert ks.mean() > 0
    assert ks.std() / ks.mean() <= 1e-6


def test_degenerate_plane_rejected():
    pack = tensors.evaluate_pack(bundled("finsleroid"), np.zeros(3), [0.3, 0.5, 0.7])
    u = np.array([0.0, 1.0, -0.4])
    with pytest.raises(SingularEvaluationError):
        tensors.indicatrix_sectional_curvature(pack, u, 2 * u)

