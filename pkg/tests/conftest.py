import numpy as np
import pytest

from dflab.domain import SignedDistanceField
from dflab.examples import MuCuspFamily, MuTwoCircles, WormLikeParams, baseline_ball, worm_like_domain

ACCEPTANCE = {}


def record(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    line = f"CRITERION {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"CRITERION {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def ball():
    dom = baseline_ball(2)
    return dom, SignedDistanceField(dom)


@pytest.fixture(scope="session")
def two_circles():
    p = WormLikeParams(mu=MuTwoCircles(0.5))
    dom = worm_like_domain(p)
    return p, dom, SignedDistanceField(dom)


@pytest.fixture(scope="session")
def cusp():
    p = WormLikeParams(mu=MuCuspFamily(4, 3, 0.5))
    dom = worm_like_domain(p)
    return p, dom, SignedDistanceField(dom)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
