import math

import numpy as np
import pytest

from onlinecov.errors import QuadratureFailure, UnsupportedKind
from onlinecov.functions import LOG1P, MIX, NAMED, custom, get_function
from onlinecov.quadrature import adaptive_interval, composite_nodes, rectangle_contour, rectangle_path


def test_composite_rule_integrates_polynomials_exactly():
    nodes, weights = composite_nodes(-1.0, 3.0, 4, order=8)
    assert nodes @ weights == pytest.approx(4.0, rel=1e-14)
    assert (nodes**9) @ weights == pytest.approx((3.0**10 - 1.0) / 10, rel=1e-13)


def test_adaptive_interval_vector_integrand():
    val = adaptive_interval(lambda x: np.stack([np.sin(x), np.exp(x)]), 0.0, math.pi)
    assert val[0] == pytest.approx(2.0, abs=1e-12)
    assert val[1] == pytest.approx(math.exp(math.pi) - 1.0, rel=1e-12)


def test_adaptive_interval_failure_raises():
    rng = np.random.default_rng(0)
    with pytest.raises(QuadratureFailure):
        adaptive_interval(lambda x: rng.standard_normal(x.shape), 0.0, 1.0, max_refinements=3)


def test_rectangle_path_is_closed_and_anticlockwise():
    z, dz = rectangle_path(-1.0, 2.0, 0.5, 64)
    assert abs(dz.sum()) < 1e-13
    # enclosed area = (1/2i) * contour integral of conj(z) dz
    area = (np.conj(z) @ dz / 2j).real
    assert area == pytest.approx(3.0 * 1.0, rel=1e-10)


def test_rectangle_contour_residues():
    assert rectangle_contour(lambda z: 1.0 / (z - 0.3), -1, 2, 0.5) == pytest.approx(1.0, abs=1e-12)
    assert abs(rectangle_contour(lambda z: 1.0 / (z - 5.0), -1, 2, 0.5)) < 1e-12
    val = rectangle_contour(lambda z: np.exp(z) / (z - 1.0) ** 2, -1, 2, 0.5)
    assert val == pytest.approx(math.e, rel=1e-10)


def test_named_functions_and_aliases():
    for alias, kind in (("x", "linear"), ("x2", "square"), ("log", "log1p"), ("x+log", "mix")):
        assert get_function(alias).kind == kind
    assert set(NAMED) == {"linear", "square", "log1p", "mix"}
    with pytest.raises(UnsupportedKind):
        get_function("cube")


@pytest.mark.parametrize("name", NAMED)
def test_derivatives_match_finite_differences(name):
    f = get_function(name)
    x = np.array([0.0, 0.3, 1.7, 12.0])
    h = 1e-5
    assert np.allclose(f.df(x), (f.f(x + h) - f.f(x - h)) / (2 * h), rtol=1e-8, atol=1e-9)
    assert np.allclose(f.d2f(x), (f.df(x + h) - f.df(x - h)) / (2 * h), rtol=1e-6, atol=1e-7)


def test_log_functions_at_zero():
    assert LOG1P.f(0.0) == 0.0
    assert MIX.f(np.array([2.0, 3.0])).sum() == pytest.approx(5 + math.log(3) + math.log(4))


def test_custom_wraps_callables():
    g = custom(np.exp, np.exp, np.exp)
    assert g.kind == "custom"
    assert not g.polynomial
    assert g(1.0) == pytest.approx(math.e)
