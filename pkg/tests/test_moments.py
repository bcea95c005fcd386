import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from onlinecov.errors import DegenerateData, InvalidParams, SingularBaseline, UnsupportedKind
from onlinecov.functions import NAMED, custom, get_function
from onlinecov.moments import (
    closed_form,
    estimate_nu4,
    moment_schedule,
    numeric_form,
    step_moments_closed,
    step_moments_numeric,
)
from onlinecov.rmt import SpectralParams, spectral_moments

GRID = list(itertools.product((0.2, 0.5, 0.8), (0.3, 0.5, 1.0, 2.0)))


@pytest.mark.parametrize("kind", NAMED)
@pytest.mark.parametrize("c1,c2", GRID)
@pytest.mark.parametrize("nu4", [3.0, 1.8, 4.0])
def test_closed_matches_numeric(kind, c1, c2, nu4):
    p = 100.0
    mu_c, var_c = closed_form(kind, c1, c2, p, nu4)
    mu_n, var_n = numeric_form(get_function(kind), c1, c2, p, nu4)
    assert abs(mu_c - mu_n) <= 1e-6 * max(1.0, abs(mu_c))
    assert abs(var_c - var_n) <= 1e-6 * max(1.0, abs(var_c))
    assert var_c > 0


def test_linear_mean_is_zero():
    for c1, c2 in GRID:
        assert closed_form("linear", c1, c2, 100, 3.0)[0] == 0.0
        assert abs(numeric_form(get_function("linear"), c1, c2, 100, 3.0)[0]) < 1e-8


def test_linear_variance_example():
    # M1 = 1, M2 = 5 at c1 = c2 = 1/2, so sigma2 = -(2/200)(1 - 5)
    mu, var = closed_form("linear", 0.5, 0.5, 100, 3.0)
    assert var == pytest.approx(0.04, rel=1e-13)


def test_square_mean_gaussian_example():
    c1, c2, p = 0.5, 0.5, 100
    m = spectral_moments(SpectralParams(c1, c2))
    mu, _ = closed_form("square", c1, c2, p, 3.0)
    assert mu == pytest.approx(-m.M1**2 + m.M2 / (p / c2), rel=1e-13)


def test_log_and_mix_share_the_mean():
    for c1, c2 in GRID:
        assert closed_form("log1p", c1, c2, 80, 3.5)[0] == closed_form("mix", c1, c2, 80, 3.5)[0]


def test_step_moments_counts():
    m = step_moments_closed("log1p", 100, 150, 301, 3.0)
    assert m.k2 == 150
    assert m.c2_k == pytest.approx(100 / 150)
    assert m.sigma == pytest.approx(math.sqrt(m.sigma2))
    num = step_moments_numeric("log1p", 100, 150, 301, 3.0)
    assert num.mu == pytest.approx(m.mu, rel=1e-6)
    assert num.sigma2 == pytest.approx(m.sigma2, rel=1e-6)


def test_step_moments_errors():
    with pytest.raises(SingularBaseline):
        step_moments_closed("linear", 100, 100, 250, 3.0)
    with pytest.raises(InvalidParams):
        step_moments_closed("linear", 10, 20, 21, 3.0)
    with pytest.raises(UnsupportedKind):
        step_moments_closed(custom(np.exp, np.exp, np.exp), 10, 20, 40, 3.0)


@given(a=st.floats(-3, 3), b=st.floats(-3, 3), c1=st.floats(0.1, 0.9), c2=st.floats(0.2, 2.5))
@settings(max_examples=25, deadline=None)
def test_numeric_mean_is_linear_in_f(a, b, c1, c2):
    g = custom(
        lambda x: a * x + b * np.log1p(x),
        lambda x: a + b / (1 + x),
        lambda x: -b / (1 + x) ** 2,
    )
    mu, _ = numeric_form(g, c1, c2, 100, 3.0)
    expect = a * closed_form("linear", c1, c2, 100, 3.0)[0] + b * closed_form("log1p", c1, c2, 100, 3.0)[0]
    assert mu == pytest.approx(expect, abs=1e-7)


def test_custom_function_variance_polarization():
    # var is a quadratic form in f: var(f+g) + var(f-g) = 2 var(f) + 2 var(g)
    lin, log = get_function("linear"), get_function("log1p")
    plus = custom(lambda x: x + np.log1p(x), lambda x: 1 + 1 / (1 + x), lambda x: -1 / (1 + x) ** 2)
    minus = custom(lambda x: x - np.log1p(x), lambda x: 1 - 1 / (1 + x), lambda x: 1 / (1 + x) ** 2)
    args = (0.4, 0.7, 60, 3.0)
    lhs = numeric_form(plus, *args)[1] + numeric_form(minus, *args)[1]
    rhs = 2 * numeric_form(lin, *args)[1] + 2 * numeric_form(log, *args)[1]
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_schedule_is_affine_in_nu4():
    sched = moment_schedule("mix", 50, 80, 131, 20)
    for nu4 in (1.8, 3.0, 4.0, 6.5):
        mu, sigma = sched.at(nu4)
        for j, k in enumerate(range(131, 151)):
            ref = step_moments_closed("mix", 50, 80, k, nu4)
            assert mu[j] == pytest.approx(ref.mu, rel=1e-12, abs=1e-14)
            assert sigma[j] == pytest.approx(ref.sigma, rel=1e-12)


def _nu4_brute(y):
    p, n = y.shape
    S = sum(np.outer(y[:, j], y[:, j]) for j in range(n)) / n
    tau = np.trace(S @ S) - np.trace(S) ** 2 / n
    norms = [sum(y[i, j] ** 2 for i in range(p)) for j in range(n)]
    mean = sum(norms) / n
    gamma = sum((v - mean) ** 2 for v in norms) / (n - 1)
    omega2 = sum((sum(y[i, j] ** 2 for j in range(n)) / n) ** 2 for i in range(p))
    return max(3 + (gamma - 2 * tau) / omega2, 1.0)


def test_nu4_toy_matrix_brute_force():
    y = np.array([[1.0, -1.0, 1.0, -1.0], [0.5, 2.0, -1.5, 0.0]])
    assert estimate_nu4(y) == pytest.approx(_nu4_brute(y), rel=1e-13)


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_nu4_matches_brute_force(seed):
    y = np.random.default_rng(seed).standard_normal((4, 7))
    assert estimate_nu4(y) == pytest.approx(_nu4_brute(y), rel=1e-10)


def test_nu4_gaussian_concentration():
    hits = 0
    for seed in range(200):
        y = np.random.default_rng(seed).standard_normal((50, 5000))
        hits += 2.7 <= estimate_nu4(y) <= 3.3
    assert hits >= 190


def test_nu4_heavier_and_lighter_tails():
    rng = np.random.default_rng(3)
    uni = rng.uniform(-math.sqrt(3), math.sqrt(3), (50, 5000))
    t10 = rng.standard_t(10, (50, 5000)) / math.sqrt(1.25)
    assert estimate_nu4(uni) == pytest.approx(1.8, abs=0.15)
    assert estimate_nu4(t10) == pytest.approx(4.0, abs=0.6)


def test_nu4_degenerate():
    with pytest.raises(DegenerateData):
        estimate_nu4(np.zeros((3, 5)))
