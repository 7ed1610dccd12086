import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from finslerlab import cli, oracle
from finslerlab.metrics import PolyScalar, parse_spec

settings.register_profile(
    "finslerlab", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile(
    "stress", deadline=None, max_examples=500,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("finslerlab")

IDENTITY3 = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]


def lin(coeffs, const=0.0):
    """Polynomial document for const + sum c_k x^k."""
    n = len(coeffs)
    terms = [{"powers": [int(i == k) for i in range(n)], "coeff": c}
             for k, c in enumerate(coeffs) if c]
    if const:
        terms.append({"powers": [0] * n, "coeff": const})
    return {"terms": terms}


def finsleroid_doc(charge=0.8, axis=(1, 0, 0), a=IDENTITY3):
    return {"dimension": 3, "family": "finsleroid", "a": a, "b": list(axis), "charge": charge}


def axis_pair(charge=0.8):
    """Finsleroid with axis e1 and alpha = x^1 (so b = d alpha, a^ij b_i b_j = 1)."""
    return parse_spec(finsleroid_doc(charge)), PolyScalar.linear([1.0, 0.0, 0.0])


def bundled(name):
    return cli.load_spec(f"bundled:{name}")


def points(spec, count, seed=0):
    return oracle.draw_points(spec, count, seed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
