import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from neckstokes.geometry import NeckGeometry
from neckstokes.mesh import (ConfigurationError, TAGS, audit_mesh, build_mesh, gap_layers,
                             size_function)


@pytest.fixture(scope="module")
def mesh04():
    g = NeckGeometry(epsilon=0.04)
    return g, build_mesh(g, 0.005, 0.3)


def test_layers_at_origin(mesh04):
    g, m = mesh04
    assert gap_layers(m, g, np.array([0.0]))[0] >= 4


def test_audit_passes(mesh04):
    g, m = mesh04
    rep = audit_mesh(m, g)
    assert rep["passed"], rep
    assert rep["min_quality"] >= 0.2
    assert rep["min_layers"] >= 4


def test_h_min_too_large():
    with pytest.raises(ConfigurationError):
        build_mesh(NeckGeometry(epsilon=0.04), 0.02, 0.3)
    with pytest.raises(ConfigurationError):
        build_mesh(NeckGeometry(epsilon=0.04), 0.005, 0.004)


@pytest.mark.xfail(strict=True, reason="structured strip plus h_max=0.3 exterior grows by about 1.3x; see ledger")
def test_vertex_growth_band():
    small = build_mesh(NeckGeometry(epsilon=0.01), 0.002, 0.3)
    big = build_mesh(NeckGeometry(epsilon=0.04), 0.005, 0.3)
    assert 1.5 <= small.n_vertices / big.n_vertices <= 8


def test_vertex_count_grows():
    small = build_mesh(NeckGeometry(epsilon=0.01), 0.002, 0.3)
    big = build_mesh(NeckGeometry(epsilon=0.04), 0.005, 0.3)
    assert small.n_vertices > big.n_vertices
    assert len(small.neck_elements()) > len(big.neck_elements())


def test_mesh_is_symmetric(mesh04):
    _, m = mesh04
    v = m.vertices
    key = lambda a: {tuple(np.round(p, 12)) for p in a}
    base = key(v)
    assert key(v * [-1, 1]) == base
    assert key(v * [1, -1]) == base


def test_boundary_tags_lie_on_their_curves(mesh04):
    g, m = mesh04
    v, t = m.vertices, m.vertex_tags
    outer = v[t == TAGS["outer"]]
    assert np.allclose(np.hypot(*outer.T), g.container_radius, rtol=1e-12)
    for i, tag in ((1, "D1"), (2, "D2")):
        pts = v[t == TAGS[tag]]
        assert len(pts)
        r, theta = g._polar(i, pts)
        assert np.allclose(r, g.polar_radius(theta)[0], atol=1e-9)


def test_triangles_counter_clockwise(mesh04):
    _, m = mesh04
    assert np.all(m.areas() > 0)
    assert np.isclose(m.areas().sum(), np.pi * 16 - 2 * np.pi, rtol=2e-3)


def test_neck_size_follows_field(mesh04):
    g, m = mesh04
    ne = m.neck_elements()
    p = m.vertices[m.triangles[ne]]
    width = p[:, :, 0].max(axis=1) - p[:, :, 0].min(axis=1)
    x1 = np.abs(m.centroids()[ne, 0])
    target = np.clip(0.25 * g.delta(x1), 0.005, 0.3)
    assert np.all(width <= 1.5 * target)
    assert np.all(width >= target / 1.5)


@settings(max_examples=30, deadline=None)
@given(x=st.floats(-3.9, 3.9), y=st.floats(-3.9, 3.9))
def test_size_function_bounds(x, y):
    g = NeckGeometry(epsilon=0.02)
    s = size_function(g, 0.002, 0.3)(np.array([[x, y]]))[0]
    assert 0.002 <= s <= 0.3


def test_export_text(tmp_path, mesh04):
    _, m = mesh04
    path = tmp_path / "mesh.txt"
    m.export_text(path)
    lines = path.read_text().splitlines()
    assert lines[0] == f"vertices {m.n_vertices}"
    assert lines[m.n_vertices + 1] == f"triangles {m.n_triangles}"
    assert len(lines) == m.n_vertices + m.n_triangles + 2
    x, y, tag = lines[1].split()
    assert float(x) == m.vertices[0, 0] and float(y) == m.vertices[0, 1]


def test_build_is_deterministic():
    g = NeckGeometry(epsilon=0.02, profile="quadratic")
    a, b = build_mesh(g, 0.02 / 6, 0.3), build_mesh(g, 0.02 / 6, 0.3)
    assert np.array_equal(a.vertices, b.vertices) and np.array_equal(a.triangles, b.triangles)
