import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from neckstokes.geometry import (GeometryError, NeckGeometry, OutOfNeckError, Region, classify_point,
                                 delta)
from neckstokes.jet import Jet


def test_delta_quadratic_values(quad):
    assert delta(quad, 0.0) == pytest.approx(0.01, abs=1e-15)
    assert delta(quad, 0.1) == pytest.approx(0.02, rel=1e-14)


def test_delta_circle_matches_high_precision(circle):
    mpmath.mp.dps = 40
    exact = mpmath.mpf("0.01") + 2 * (1 - mpmath.sqrt(1 - mpmath.mpf("0.1") ** 2))
    assert delta(circle, 0.1) == pytest.approx(float(exact), rel=1e-14)
    assert float(exact) == pytest.approx(0.0200252, abs=1e-7)


def test_delta_out_of_neck(quad):
    with pytest.raises(OutOfNeckError):
        delta(quad, 2 * quad.R + 0.01)


@settings(max_examples=60, deadline=None)
@given(x1=st.floats(-1.0, 1.0), eps=st.floats(1e-4, 0.2), profile=st.sampled_from(["quadratic", "circle"]))
def test_delta_even_and_above_eps(x1, eps, profile):
    g = NeckGeometry(epsilon=eps, profile=profile)
    d = float(g.delta(x1))
    assert d == float(g.delta(-x1))
    assert d >= eps
    if abs(x1) > 1e-6:
        assert d > eps


def test_circle_and_quadratic_agree_near_origin():
    x = np.linspace(-0.2, 0.2, 401)
    c = NeckGeometry(epsilon=0.01, profile="circle").delta(x)
    q = NeckGeometry(epsilon=0.01, profile="quadratic").delta(x)
    assert np.max(np.abs(c - q) / q) <= 1e-2


def test_profile_vanishes_to_second_order(quad, circle):
    for g in (quad, circle):
        assert float(g.h(0.0)) == 0.0
        assert float(g.dh(0.0)) == 0.0


def test_dh_matches_finite_difference(quad, circle):
    x = np.linspace(-0.9, 0.9, 37)
    step = 1e-6
    for g in (quad, circle):
        fd = (g.h(x + step) - g.h(x - step)) / (2 * step)
        assert np.allclose(g.dh(x), fd, rtol=1e-7, atol=1e-9)


@pytest.mark.parametrize("point,region", [
    ((0.0, 0.0), Region.NECK_FLUID),
    ((0.0, 0.006), Region.INSIDE_D1),
    ((0.0, -0.006), Region.INSIDE_D2),
    ((5.0, 0.0), Region.OUTSIDE_CONTAINER),
    ((3.0, 0.0), Region.OUTER_FLUID),
])
def test_classify_examples(quad, point, region):
    assert classify_point(quad, np.array(point)) is region


def test_classify_neck_radius(quad):
    x = np.array([0.7, 0.0])
    assert classify_point(quad, x, quad.R) is Region.OUTER_FLUID
    assert classify_point(quad, x, 2 * quad.R) is Region.NECK_FLUID


@settings(max_examples=200, deadline=None)
@given(x1=st.floats(-4.5, 4.5), x2=st.floats(-4.5, 4.5), profile=st.sampled_from(["quadratic", "circle"]))
def test_classify_point_reflection_symmetry(x1, x2, profile):
    g = NeckGeometry(epsilon=0.02, profile=profile)
    swap = {Region.INSIDE_D1: Region.INSIDE_D2, Region.INSIDE_D2: Region.INSIDE_D1}
    a = classify_point(g, np.array([x1, x2]))
    b = classify_point(g, np.array([-x1, -x2]))
    assert swap.get(a, a) is b


@settings(max_examples=100, deadline=None)
@given(x1=st.floats(-0.99, 0.99), t=st.floats(0.001, 0.999))
def test_neck_predicate_matches_gap(x1, t):
    g = NeckGeometry(epsilon=0.02, profile="quadratic")
    x2 = -float(g.top(x1)) + t * float(g.delta(x1))
    assert classify_point(g, np.array([x1, x2]), 2 * g.R) is Region.NECK_FLUID


@pytest.mark.parametrize("kwargs", [
    {"epsilon": 0.0},
    {"epsilon": -0.1},
    {"epsilon": 0.01, "profile": "ellipse"},
    {"epsilon": 0.01, "R": 0.6},
    {"epsilon": 0.01, "container_radius": 2.5},
])
def test_invalid_geometry(kwargs):
    with pytest.raises(GeometryError):
        NeckGeometry(**kwargs)


def test_container_clearance_by_sampling():
    g = NeckGeometry(epsilon=0.05, profile="quadratic")
    theta = np.linspace(0, 2 * np.pi, 2000)
    for i in (1, 2):
        r = np.hypot(*g.boundary_points(i, theta).T)
        assert r.max() + 1.0 <= g.container_radius


def test_quadratic_closure_is_exact_graph_in_neck(quad):
    x1 = np.linspace(-2 * quad.R, 2 * quad.R, 51)
    top = quad.top(x1)
    assert np.allclose(top, 0.5 * quad.epsilon + 0.5 * x1**2, rtol=1e-14)
    pts = np.column_stack([x1, top])
    X1, X2 = Jet.variable(pts[:, 0], 0), Jet.variable(pts[:, 1], 1)
    assert np.max(np.abs(quad.normal_coordinate(1, X1, X2).v)) < 1e-12


def test_dict_round_trip(quad):
    assert NeckGeometry.from_dict(quad.to_dict()) == quad
    assert quad.with_epsilon(0.5 * quad.epsilon).epsilon == 0.005
