import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from givenscd.errors import NumericError
from givenscd.linesearch import golden_section, line_minimize_periodic
from givenscd.manifold import wrap_angle


def test_cos_minimum_is_the_period_endpoint():
    res = line_minimize_periodic(math.cos)
    assert res.theta == -math.pi
    assert res.value == -1.0


def test_periodic_quadratic():
    res = line_minimize_periodic(lambda t: (wrap_angle(t) - 0.4) ** 2, tol=1e-10)
    assert abs(res.theta - 0.4) <= 1e-9


def test_constant_function_ties_to_smallest_angle():
    res = line_minimize_periodic(lambda t: 2.5)
    assert res.theta == -math.pi
    assert res.g0 == 2.5


def test_reports_value_at_zero():
    res = line_minimize_periodic(lambda t: math.sin(t) + 0.25)
    assert res.g0 == pytest.approx(0.25, abs=1e-15)
    assert res.theta == pytest.approx(-math.pi / 2, abs=1e-9)


def test_vectorized_and_scalar_paths_agree():
    def g(t):
        return np.cos(3 * t) + 0.3 * np.sin(t)

    def gv(t):
        return g(t)

    gv.vectorized = True
    a = line_minimize_periodic(lambda t: float(g(t)))
    b = line_minimize_periodic(gv)
    assert a.theta == b.theta and a.value == b.value


def test_non_finite_value_raises_with_theta():
    def g(t):
        return math.nan if t > 1.0 else math.cos(t)

    with pytest.raises(NumericError) as info:
        line_minimize_periodic(g)
    assert info.value.theta > 1.0


def test_golden_section_on_parabola():
    x, fx, n = golden_section(lambda t: (t - 0.123) ** 2, -1.0, 1.0, 1e-10)
    assert abs(x - 0.123) < 1e-9
    assert n > 2


def trig_cubic(coef):
    c3, s3, c1, s1 = coef

    def g(t):
        c, s = np.cos(t), np.sin(t)
        return c3 * c ** 3 + s3 * s ** 3 + c1 * c + s1 * s

    return g


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_dense_grid_on_trig_cubics(seed):
    g = trig_cubic(np.random.default_rng(seed).standard_normal(4))
    res = line_minimize_periodic(lambda t: float(g(t)), tol=1e-10)
    grid = np.linspace(-math.pi, math.pi, 10**6, endpoint=False)
    brute = float(np.min(g(grid)))
    # never worse than the 1e6 grid (up to its own resolution) and never below the true minimum
    assert res.value <= brute + 1e-10
    assert res.value >= brute - 1e-10
    assert -math.pi <= res.theta < math.pi


@given(st.integers(0, 2**32 - 1))
def test_result_beats_coarse_grid(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(2), rng.standard_normal(2)

    def g(t):
        return a[0] * math.cos(t) + b[0] * math.sin(t) + a[1] * math.cos(2 * t) + b[1] * math.sin(5 * t)

    res = line_minimize_periodic(g)
    grid = -math.pi + 2 * math.pi / 32 * np.arange(32)
    assert all(res.value <= g(t) for t in grid)


def test_deterministic():
    g = trig_cubic([0.3, -1.2, 0.5, 0.9])
    assert line_minimize_periodic(g) == line_minimize_periodic(g)
