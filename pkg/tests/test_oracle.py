import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from finslerlab import oracle
from finslerlab.errors import InadmissiblePointError, StencilError
from finslerlab.oracle import FDConfig, fd_gradient, fd_hessian, fd_partial, sweep_max, sweep_min

from conftest import bundled, points

E, A, S, C = np.exp, np.arctan, np.sin, np.cos

# (field, point, orders, exact derivative)
FIELDS = [
    (lambda p: p[0] ** 3, (2.0, 0.0), (3, 0), 6.0),
    (lambda p: p[0] ** 2 * p[1], (0.7, -1.3), (2, 1), 2.0),
    (lambda p: p[0] ** 4 - 3 * p[0] * p[1] ** 2, (0.5, 0.2), (1, 2), -6.0),
    (lambda p: p[0] ** 5, (1.2, 0.0), (2, 0), 20 * 1.2 ** 3),
    (lambda p: E(p[0] + p[1]), (0.0, 0.0), (1, 1), 1.0),
    (lambda p: E(2 * p[0]), (0.3, 0.0), (3, 0), 8 * math.exp(0.6)),
    (lambda p: E(p[0] * p[1]), (0.4, 0.9), (1, 1), math.exp(0.36) * (1 + 0.36)),
    (lambda p: E(-p[0] ** 2), (0.5, 0.0), (2, 0), (4 * 0.25 - 2) * math.exp(-0.25)),
    (lambda p: A(p[0]), (0.3, 0.0), (1, 0), 1 / 1.09),
    (lambda p: A(p[0]), (0.3, 0.0), (2, 0), -0.6 / 1.09 ** 2),
    (lambda p: A(p[0]), (0.3, 0.0), (3, 0), (6 * 0.09 - 2) / 1.09 ** 3),
    (lambda p: A(p[1] / p[0]), (1.0, 0.5), (0, 1), 1.0 / 1.25),
    (lambda p: A(p[1] / p[0]), (1.0, 0.5), (1, 0), -0.5 / 1.25),
    (lambda p: A(p[0] + 2 * p[1]), (0.1, 0.2), (1, 1), -2 * 2 * 0.5 / 1.25 ** 2),
    (lambda p: E(p[0]) * A(p[1]), (0.2, 0.4), (1, 1), math.exp(0.2) / 1.16),
    (lambda p: np.log(1 + p[0] ** 2), (0.5, 0.0), (1, 0), 1.0 / 1.25),
    (lambda p: np.sqrt(1 + p[0] ** 2 + p[1] ** 2), (0.3, 0.4), (1, 1), -0.12 / 1.25 ** 1.5),
    (lambda p: 1.0 / (2 + p[0]), (0.5, 0.0), (3, 0), -6 / 2.5 ** 4),
    (lambda p: S(p[0]) * C(p[1]), (0.3, 0.6), (2, 1), math.sin(0.3) * math.sin(0.6)),
    (lambda p: E(A(p[0])), (0.0, 0.0), (2, 0), 1.0),
]


def test_twenty_fields():
    assert len(FIELDS) == 20


@pytest.mark.parametrize("idx", range(len(FIELDS)))
def test_closed_form_fields(idx):
    f, point, orders, exact = FIELDS[idx]
    est, err = fd_partial(f, point, orders)
    assert abs(est - exact) <= 1e-7 * max(1.0, abs(exact))
    assert err >= 0


def test_cube_example():
    est, _ = fd_partial(lambda p: p[0] ** 3, [2.0, 0.0, 0.0], [3, 0, 0])
    assert est == pytest.approx(6.0, abs=1e-8)


def test_exp_mixed_example():
    est, _ = fd_partial(lambda p: math.exp(p[0] + p[1]), [0.0, 0.0], [1, 1])
    assert est == pytest.approx(1.0, abs=1e-8)


def test_order_cap_and_shape():
    with pytest.raises(ValueError):
        fd_partial(lambda p: p[0], [0.0, 0.0], [2, 2])
    with pytest.raises(ValueError):
        fd_partial(lambda p: p[0], [0.0, 0.0], [1])


def test_config_validation():
    with pytest.raises(ValueError):
        FDConfig(rel_step=0.0)
    with pytest.raises(ValueError):
        FDConfig(levels=1)


def test_stencil_error():
    def f(p):
        if p[0] < 0:
            raise InadmissiblePointError("negative")
        return p[0] ** 2
    with pytest.raises(StencilError):
        fd_partial(f, [0.001, 0.0], [1, 0])


def test_gradient_and_hessian_of_quadratic():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    f = lambda p: 0.5 * p @ A @ p
    x = np.array([0.3, -0.7])
    assert np.allclose(fd_gradient(f, x), A @ x, atol=1e-10)
    assert np.allclose(fd_hessian(f, x), A, atol=1e-8)


def test_finsleroid_hessian_matches_jet():
    from finslerlab import metrics, tensors
    spec = bundled("finsleroid")
    for x, y in points(spec, 5):
        fd = fd_hessian(lambda v: metrics.energy_value(spec, x, v), y)
        g = tensors.metric_tensor(spec, x, y)
        assert np.max(np.abs(fd - g)) <= 1e-6 * np.max(np.abs(g))


def sampler(rng):
    return rng.uniform(-1, 1, 3)


def test_sweep_zero_field():
    best, where, skipped = sweep_min(lambda s: 0.0, sampler, 10)
    assert best == 0.0 and skipped == 0 and where.shape == (3,)


def test_sweep_deterministic_and_counts_skips():
    def f(s):
        if s[0] > 0.5:
            raise InadmissiblePointError("skip")
        return s @ s
    a = sweep_min(f, sampler, 200, seed=4)
    b = sweep_min(f, sampler, 200, seed=4)
    assert a[0] == b[0] and np.array_equal(a[1], b[1]) and a[2] == b[2] > 0
    assert sweep_max(f, sampler, 200, seed=4)[0] >= a[0]


def test_sweep_all_inadmissible():
    def f(s):
        raise InadmissiblePointError("never")
    with pytest.raises(StencilError):
        sweep_min(f, sampler, 5)
    with pytest.raises(ValueError):
        sweep_min(f, sampler, 0)


def test_draw_points_reproducible():
    spec = bundled("finsleroid")
    a = oracle.draw_points(spec, 10, seed=9)
    b = oracle.draw_points(spec, 10, seed=9)
    assert all(np.array_equal(p[0], q[0]) and np.array_equal(p[1], q[1]) for p, q in zip(a, b))


@pytest.mark.parametrize("name", ["euclidean", "curved_riemannian", "finsleroid", "conformal_finsleroid"])
def test_pack_oracle(name):
    spec = bundled(name)
    for x, y in points(spec, 5, seed=2):
        res = oracle.pack_oracle_residuals(spec, x, y)
        assert max(res.values()) <= 1e-6, res


@given(st.floats(-2, 2), st.floats(-2, 2), st.integers(1, 3))
def test_polynomial_derivatives_property(a, b, k):
    # p(x) = (a + b x)^3 has k-th derivative 3!/(3-k)! b^k (a + b x)^(3-k)
    f = lambda p: (a + b * p[0]) ** 3
    est, _ = fd_partial(f, [0.4], [k])
    exact = math.factorial(3) / math.factorial(3 - k) * b ** k * (a + 0.4 * b) ** (3 - k)
    assert abs(est - exact) <= 1e-7 * max(1.0, abs(exact), (abs(a) + abs(b)) ** 3)
