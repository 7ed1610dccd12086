import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from finslerlab import taylor
from finslerlab.errors import ConfigurationError, OrderBudgetError, SingularEvaluationError
from finslerlab.oracle import fd_partial
from finslerlab.taylor import DegreeCaps, extract_partial

CAPS = DegreeCaps(3, 1, 5)


def variables(x, y, caps=CAPS):
    xs, ys = taylor.seed_point(x, y, caps)
    return xs, ys


def test_monomial_partial():
    _, ys = variables([0, 0, 0], [0.0, 0.0, 0.0])
    u = ys[0] * ys[0] * ys[1]
    assert extract_partial(u, (0, 0, 0), (2, 1, 0)) == pytest.approx(2.0, abs=0)


def test_exp_derivatives_at_zero():
    _, ys = variables([0, 0, 0], [0.0, 0.0, 0.0])
    u = taylor.exp(ys[0])
    for k in range(6):
        assert extract_partial(u, (0, 0, 0), (k, 0, 0)) == pytest.approx(1.0, rel=1e-15)


def test_mixed_xy_partial():
    xs, ys = variables([0.5, 0, 0], [2.0, 0, 0])
    u = xs[0] * ys[0] ** 3
    # d/dx d^3/dy^3 (x y^3) = 6
    assert extract_partial(u, (1, 0, 0), (3, 0, 0)) == pytest.approx(6.0)


def test_outside_truncation_set_rejected():
    _, ys = variables([0, 0, 0], [1.0, 0, 0])
    with pytest.raises(OrderBudgetError):
        extract_partial(ys[0], (2, 0, 0), (0, 0, 0))
    with pytest.raises(OrderBudgetError):
        extract_partial(ys[0], (0, 0, 0), (6, 0, 0))


def test_truncate_cannot_raise_caps():
    _, ys = variables([0, 0, 0], [1.0, 0, 0], DegreeCaps(3, 0, 2))
    with pytest.raises(OrderBudgetError):
        ys.truncate(DegreeCaps(3, 1, 5))


def test_caps_are_data():
    caps = DegreeCaps(2, 0, 7)
    _, ys = taylor.seed_point([0, 0], [0.3, 0.0], caps)
    u = ys[0] ** 7
    assert extract_partial(u, (0, 0), (7, 0)) == pytest.approx(5040.0)


@pytest.mark.parametrize("f, r", [("log", None), ("power", 0.5), ("power", -1.0)])
def test_domain_errors(f, r):
    _, ys = variables([0, 0, 0], [0.0, 1.0, 0])
    with pytest.raises(SingularEvaluationError):
        taylor.compose_elementary(f, ys[0] - 1.0 if f == "log" else ys[0], r)


def test_unknown_function():
    _, ys = variables([0, 0, 0], [1.0, 1.0, 0])
    with pytest.raises(ConfigurationError):
        taylor.compose_elementary("sinh", ys[0])


def test_inverse_of_jet_matrix():
    xs, ys = variables([0.1, -0.2, 0.3], [0.7, 0.2, -0.4])
    m = taylor.stack([
        taylor.stack([2.0 + ys[0] * ys[0], ys[1] * xs[0], 0.0 * ys[0] + 0.1]),
        taylor.stack([ys[1] * xs[0], 3.0 + ys[1] * ys[2], ys[0]]),
        taylor.stack([0.0 * ys[0] + 0.1, ys[0], 1.5 + xs[2] * ys[2] ** 2]),
    ])
    inv = taylor.inverse(m)
    prod = taylor.matmul(m, inv)
    eye = np.eye(3)
    assert np.max(np.abs(prod.coeffs[..., 0] - eye)) < 1e-14
    assert np.max(np.abs(prod.coeffs[..., 1:])) < 1e-12


# -- properties -------------------------------------------------------------

coef = st.floats(-1.0, 1.0, allow_nan=False)


def random_jet(seed, caps=DegreeCaps(2, 1, 3)):
    r = np.random.default_rng(seed)
    size = taylor._table(caps).size
    return taylor.TaylorJet(caps, r.uniform(-1, 1, size))


@given(st.integers(0, 2**32 - 1))
def test_distributivity(seed):
    u, v, w = (random_jet(seed + k) for k in range(3))
    lhs = (u + v) * w
    rhs = u * w + v * w
    assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) <= 1e-14 * max(1.0, np.max(np.abs(lhs.coeffs)))


@given(st.integers(0, 2**32 - 1))
def test_leibniz_first_order(seed):
    u, v = random_jet(seed), random_jet(seed + 1)
    prod = u * v
    n = u.caps.n
    for i in range(n):
        beta = [0] * n
        beta[i] = 1
        lhs = extract_partial(prod, (0,) * n, beta)
        rhs = u.value * extract_partial(v, (0,) * n, beta) + v.value * extract_partial(u, (0,) * n, beta)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-14)


@given(st.integers(0, 2**32 - 1))
def test_log_exp_roundtrip(seed):
    u = random_jet(seed)
    back = taylor.log(taylor.exp(u))
    scale = max(1.0, np.max(np.abs(u.coeffs)))
    assert np.max(np.abs(back.coeffs - u.coeffs)) <= 1e-10 * scale


@given(st.integers(0, 2**32 - 1))
def test_reciprocal_times_self(seed):
    u = random_jet(seed) + 3.0
    one = u * taylor.reciprocal(u)
    assert one.value == pytest.approx(1.0, rel=1e-14)
    assert np.max(np.abs(one.coeffs[1:])) < 1e-12


# -- oracle agreement on smooth scalar fields ---------------------------------

FIELDS = {
    "poly": (lambda v: v[0] ** 2 * v[1] + 3 * v[2] * v[3] ** 2 - v[1] * v[2],
             lambda V: V[0] ** 2 * V[1] + 3 * V[2] * V[3] ** 2 - V[1] * V[2]),
    "exp": (lambda v: np.exp(0.3 * v[0] - v[2] + 0.5 * v[3]),
            lambda V: taylor.exp(0.3 * V[0] - V[2] + 0.5 * V[3])),
    "arctan": (lambda v: np.arctan(v[1] * v[3] + v[2]),
               lambda V: taylor.arctan(V[1] * V[3] + V[2])),
    "log_sqrt": (lambda v: np.log(2 + v[2] ** 2) * np.sqrt(1 + v[0] ** 2 + v[3] ** 2),
                 lambda V: taylor.log(2 + V[2] ** 2) * taylor.sqrt(1 + V[0] ** 2 + V[3] ** 2)),
    "power": ((lambda v: (1.5 + v[1] * v[2] + v[3] ** 2) ** -1.5),
              lambda V: taylor.power(1.5 + V[1] * V[2] + V[3] ** 2, -1.5)),
    "reciprocal": (lambda v: 1.0 / (2.0 + v[0] * v[3] + v[2]),
                   lambda V: taylor.reciprocal(2.0 + V[0] * V[3] + V[2])),
}


@pytest.mark.parametrize("name", sorted(FIELDS))
def test_jet_matches_oracle(name):
    f, fj = FIELDS[name]
    caps = DegreeCaps(2, 1, 3)
    point = np.array([0.2, -0.3, 0.4, 0.7])
    xs, ys = taylor.seed_point(point[:2], point[2:], caps)
    jet = fj([xs[0], xs[1], ys[0], ys[1]])
    table = taylor._table(caps)
    for m in table.position:
        if sum(m) > 3 or sum(m) == 0:
            continue
        want, _ = fd_partial(f, point, m)
        got = extract_partial(jet, m[:2], m[2:])
        assert abs(got - want) <= 1e-6 * max(1.0, abs(want)), (m, got, want)


def test_batched_product_matches_scalar():
    caps = DegreeCaps(2, 1, 2)
    a = random_jet(1, caps)
    b = random_jet(2, caps)
    batch = taylor.stack([a, b]) * taylor.stack([b, a])
    single = a * b
    assert np.allclose(batch.coeffs[0], single.coeffs, rtol=0, atol=1e-15)
    assert np.allclose(batch.coeffs[1], single.coeffs, rtol=0, atol=1e-15)
    assert math.isclose(float(batch[0].value), float(a.value * b.value))
