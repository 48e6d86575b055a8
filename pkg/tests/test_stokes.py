import math

import numpy as np
import pytest
import sympy as sp

from neckstokes.geometry import NeckGeometry
from neckstokes.mesh import TAGS
from neckstokes.rigid import psi
from neckstokes.singular_fields import FieldId, aux_field
from neckstokes.stokes import (BoundaryData, IncompatibleDataError, OutsideMeshError, convergence_orders,
                               discretize, disk_mesh, energy_inner_product, evaluate, export_probe_csv,
                               mms_errors, mms_exact, solve_dirichlet, stress)


def _rigid(alpha):
    return BoundaryData.uniform(lambda x: psi(alpha, x), label=f"psi{alpha}")


@pytest.fixture(scope="module")
def mesh04(shear04):
    return shear04.total.mesh


def test_rigid_translation_reproduced(mesh04):
    f = solve_dirichlet(mesh04, 1.0, _rigid(1))
    assert np.max(np.abs(f.velocity - [1.0, 0.0])) <= 1e-10
    assert np.max(np.abs(f.pressure)) <= 1e-10


def test_rotation_has_zero_stress(mesh04):
    f = solve_dirichlet(mesh04, 1.0, _rigid(3))
    pts = np.array([[0.0, 0.0], [0.3, 0.01], [2.0, 1.0], [-1.5, -2.5]])
    assert np.max(np.abs(stress(f, pts))) <= 1e-9
    assert abs(energy_inner_product(f, f)) <= 1e-9


def test_mms_body_force_matches_sympy():
    x, y = sp.symbols("x y")
    s = sp.sin(sp.pi * x) * sp.sin(sp.pi * y)
    u = sp.Matrix([sp.diff(s, y), -sp.diff(s, x)])
    p = sp.cos(sp.pi * x) * sp.cos(sp.pi * y)
    f = sp.Matrix([-sp.diff(u[i], x, 2) - sp.diff(u[i], y, 2) + sp.diff(p, v) for i, v in enumerate((x, y))])
    fn = sp.lambdify((x, y), f)
    un = sp.lambdify((x, y), u)
    pts = np.array([[0.1, 0.2], [-0.4, 0.5], [0.7, -0.3]])
    vel, _, pres, force = mms_exact(pts)
    for k, (a, b) in enumerate(pts):
        assert np.allclose(force[k], np.ravel(fn(a, b)), rtol=1e-12, atol=1e-12)
        assert np.allclose(vel[k], np.ravel(un(a, b)), rtol=1e-12, atol=1e-12)


def test_mms_convergence_orders():
    errs = mms_errors(levels=3)
    v = convergence_orders(errs, "velocity_l2")
    h1 = convergence_orders(errs, "velocity_h1")
    pr = convergence_orders(errs, "pressure_l2")
    assert min(v) >= 1.9 and min(h1) >= 0.9 and min(pr) >= 0.9


def test_disk_mesh_refinement_counts():
    m0, m1 = disk_mesh(16, 0), disk_mesh(16, 1)
    assert m1.n_triangles == 4 * m0.n_triangles
    assert np.allclose(np.hypot(*m1.vertices[m1.vertex_tags == TAGS["outer"]].T), 1.0)


def test_weak_incompressibility_and_gauge(shear04):
    for f in list(shear04.fields.values()):
        assert f.divergence_residual() <= 1e-10 * max(np.linalg.norm(f.velocity), 1.0)
        assert abs(f.mean_pressure()) <= 1e-12 * max(np.max(np.abs(f.pressure)), 1.0)


def test_galerkin_orthogonality(shear04, rng):
    f = shear04.fields[FieldId(1, 1)]
    d = f.disc
    w = rng.standard_normal(2 * d.n_nodes)
    w[d.fixed] = 0.0
    Au = d.A @ f.velocity.ravel()
    lhs = w @ Au
    rhs = -(w @ (d.B.T @ f.pressure))
    assert abs(lhs - rhs) <= 1e-9 * np.linalg.norm(w) * np.linalg.norm(Au)


def test_neck_gradient_against_closed_form(shear04):
    f = shear04.fields[FieldId(1, 1)]
    ne = f.mesh.neck_elements()
    g = np.linalg.norm(f.element_gradients(ne), axis=(1, 2)).max()
    eps = shear04.geom.epsilon
    assert 0.5 / eps <= g <= 2.0 / eps


def test_evaluate_dirichlet_vertices(shear04):
    f11, u0 = shear04.fields[FieldId(1, 1)], shear04.fields["u0"]
    f13 = shear04.fields[FieldId(1, 3)]
    m = f11.mesh
    pts = m.vertices[m.vertex_tags == TAGS["D1"]][:20]
    assert np.allclose(evaluate(f11, pts)["velocity"], psi(1, pts), atol=1e-14)
    assert np.allclose(evaluate(f13, pts)["velocity"], psi(3, pts), atol=1e-14)
    assert np.allclose(evaluate(u0, pts)["velocity"], 0.0, atol=1e-14)


def test_evaluate_at_origin(shear04):
    eps = shear04.geom.epsilon
    ev = evaluate(shear04.fields[FieldId(1, 1)], np.array([0.0, 0.0]))
    assert abs(ev["velocity_gradient"][0, 1] - 1 / eps) <= 0.25 / eps


def test_evaluate_outside_mesh(shear04):
    with pytest.raises(OutsideMeshError):
        evaluate(shear04.total, np.array([5.0, 0.0]))


def test_shear_stress_at_origin_scales(shear04, shear01):
    vals = []
    for sol in (shear04, shear01):
        s = stress(sol.total, np.array([0.0, 0.0]), sol.q_R)
        vals.append(abs(s[0, 1]) * math.sqrt(sol.geom.epsilon))
    assert min(vals) > 0.5
    assert max(vals) / min(vals) < 1.5


def test_stress_bounded_outside_neck(shear04, shear01):
    maxima = []
    for sol in (shear04, shear01):
        m = sol.total.mesh
        cen = m.centroids()
        far = np.flatnonzero(np.hypot(*cen.T) > 1.5 * sol.geom.R + 2.5)
        lam = np.full((len(far), 3), 1 / 3)
        maxima.append(np.abs(sol.stress_at(far, lam)).max())
    assert max(maxima) / min(maxima) < 1.5


def test_energy_rigid_is_zero(shear04):
    f = solve_dirichlet(shear04.total.mesh, 1.0, _rigid(2))
    scale = energy_inner_product(shear04.total, shear04.total)
    assert abs(energy_inner_product(f, shear04.total)) <= 1e-9 * scale


@pytest.mark.xfail(strict=True, reason="O(1) far-field energy dominates at these gaps; see ledger")
def test_energy_ratio_follows_inverse_sqrt(shear04, shear01):
    e = [energy_inner_product(s.fields[FieldId(1, 1)], s.fields[FieldId(1, 1)]) for s in (shear04, shear01)]
    assert 1.5 <= e[1] / e[0] <= 2.5


def test_energy_ratio_grows(shear04, shear01):
    e = [energy_inner_product(s.fields[FieldId(1, 1)], s.fields[FieldId(1, 1)]) for s in (shear04, shear01)]
    assert e[1] > e[0]


def test_mixed_energy_over_log(shear04, shear01):
    for s in (shear04, shear01):
        a = energy_inner_product(s.fields[FieldId(1, 1)], s.fields[FieldId(1, 2)])
        assert abs(a) / math.log(1 / s.geom.epsilon) <= 1e-8


def test_energy_symmetric(shear04):
    f, g = shear04.fields[FieldId(1, 1)], shear04.fields[FieldId(2, 3)]
    assert energy_inner_product(f, g) == pytest.approx(energy_inner_product(g, f), rel=1e-12, abs=1e-12)


def test_energy_rejects_mesh_mismatch(shear04):
    other = solve_dirichlet(disk_mesh(8, 0), 1.0, _rigid(1))
    with pytest.raises(ValueError):
        energy_inner_product(shear04.total, other)


def test_bounded_nodal_values(shear04):
    f = shear04.fields[FieldId(1, 1)]
    assert np.max(np.linalg.norm(f.velocity, axis=1)) <= 1.1


def test_squeeze_flow_peak_matches_closed_form(shear04):
    # the squeezing mode expels fluid at speed ~ 1/sqrt(eps), so the band is taken from the closed form
    g = NeckGeometry(epsilon=shear04.geom.epsilon, profile="quadratic")
    x1 = np.linspace(0, g.R, 2001)
    peak = np.abs(aux_field(FieldId(1, 2), g, np.column_stack([x1, 0 * x1])).velocity[:, 0]).max()
    f = shear04.fields[FieldId(1, 2)]
    assert np.max(np.linalg.norm(f.velocity, axis=1)) <= 1.1 * peak


def test_mirror_symmetry(shear04):
    f11, f21 = shear04.fields[FieldId(1, 1)], shear04.fields[FieldId(2, 1)]
    nodes = f11.disc.nodes
    key = {tuple(np.round(p, 11)): k for k, p in enumerate(nodes)}
    mirror = np.array([key[tuple(np.round(p, 11))] for p in nodes * [1, -1]])
    reflected = f11.velocity[mirror] * [1, -1]
    assert np.max(np.abs(reflected - f21.velocity)) <= 1e-8


def test_incompatible_data_rejected(shear04):
    data = BoundaryData({"outer": lambda x: np.column_stack([0 * x[:, 0], x[:, 1]])})
    with pytest.raises(IncompatibleDataError) as info:
        solve_dirichlet(shear04.total.mesh, 1.0, data)
    assert info.value.flux == pytest.approx(16 * math.pi, rel=2e-3)


def test_export_probe_csv(tmp_path, shear04):
    pts = np.array([[0.0, 0.0], [1.0, 2.0]])
    path = tmp_path / "probe.csv"
    export_probe_csv(path, {"u": shear04.total}, pts)
    rows = path.read_text().splitlines()
    assert rows[0] == "x1,x2,u_u1,u_u2,u_p"
    vals = [float(v) for v in rows[2].split(",")]
    ev = evaluate(shear04.total, pts[1])
    assert vals[2:] == [ev["velocity"][0], ev["velocity"][1], ev["pressure"]]


def test_fields_survive_discretization_rebuild(shear04):
    from neckstokes.stokes import Discretization

    mesh = shear04.total.mesh
    f = Discretization(mesh, 1.0).solve(_rigid(1))
    assert abs(energy_inner_product(f, shear04.total)) <= 1e-9 * energy_inner_product(shear04.total, shear04.total)
