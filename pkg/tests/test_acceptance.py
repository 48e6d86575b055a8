"""Acceptance criteria, each at its stated tolerance."""
import time

import numpy as np
import pytest

from neckstokes.analysis import (DEFAULT_EPS, SCALING_EPS, MeshParams, constants_verdict, evaluate_sweep,
                                 interaction_scaling_check, remainder_check, run_epsilon, variation)
from neckstokes.geometry import NeckGeometry
from neckstokes.rigid import LinearDatum, balance_residuals, solve_system
from neckstokes.singular_fields import ALL_IDS, FieldId, aux_field, bound_ratio, field_check_report, neck_samples
from neckstokes.stokes import convergence_orders, mms_errors

CIRCLE = {"profile": "circle"}


@pytest.fixture(scope="module")
def sweep():
    t0 = time.perf_counter()
    records = [run_epsilon(CIRCLE, e, LinearDatum.preset("shear"), MeshParams()) for e in DEFAULT_EPS]
    return records, time.perf_counter() - t0


@pytest.fixture(scope="module")
def scaling_records():
    return [run_epsilon(CIRCLE, e, LinearDatum.preset("shear"), MeshParams()) for e in SCALING_EPS]


def test_1_field_identity_suite(criterion):
    t0 = time.perf_counter()
    rep = field_check_report(NeckGeometry(epsilon=0.01, profile="quadratic"), n_samples=10_000)
    dt = time.perf_counter() - t0
    ok = rep["passed"] and dt < 10
    criterion("1_field_identities", ok, f"failures={rep['failures']}, {dt:.2f}s")
    assert rep["passed"], rep["failures"]
    assert dt < 10


def _fd_errors(fid, geom, pts):
    """Largest relative gap between analytic and central-difference derivatives."""
    h = 1e-5 * geom.delta(pts[:, 0])[:, None]
    ev = aux_field(fid, geom, pts)
    steps = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    plus = [aux_field(fid, geom, pts + h * e) for e in steps]
    minus = [aux_field(fid, geom, pts - h * e) for e in steps]
    G = np.stack([(p.velocity - m.velocity) / (2 * h) for p, m in zip(plus, minus)], -1)
    H = np.stack([(p.velocity_gradient - m.velocity_gradient) / (2 * h[:, :, None])
                  for p, m in zip(plus, minus)], -1)
    P = np.stack([(p.pressure - m.pressure) / (2 * h[:, 0]) for p, m in zip(plus, minus)], -1)
    rel = lambda fd, an: float(np.max(np.abs(fd - an)) / np.max(np.abs(an)))
    return {"gradient": rel(G, ev.velocity_gradient), "hessian": rel(H, ev.velocity_hessian),
            "pressure_gradient": rel(P, ev.pressure_gradient)}


def test_2_derivative_consistency(criterion):
    geom = NeckGeometry(epsilon=0.01, profile="quadratic")
    pts = neck_samples(geom, 1000)
    t0 = time.perf_counter()
    worst = {str(fid): _fd_errors(fid, geom, pts) for fid in ALL_IDS}
    dt = time.perf_counter() - t0
    peak = max(max(v.values()) for v in worst.values())
    criterion("2_derivative_consistency", peak <= 1e-4 and dt < 10, f"max rel {peak:.2e}, {dt:.2f}s")
    assert peak <= 1e-4, worst
    assert dt < 10


def test_3_residual_bound_ratios(criterion):
    t0 = time.perf_counter()
    eps = (1e-2, 2.5e-3, 6.25e-4)
    ratios = {a: [bound_ratio(FieldId(1, a), NeckGeometry(epsilon=e, profile="quadratic")) for e in eps]
              for a in (1, 2, 3)}
    dt = time.perf_counter() - t0
    var = {a: variation(r) for a, r in ratios.items()}
    ok = all(v < 4 for v in var.values()) and dt < 30
    criterion("3_residual_bounds", ok, ", ".join(f"mode {a} x{v:.2f}" for a, v in var.items()) + f", {dt:.1f}s")
    assert all(v < 4 for v in var.values()), ratios
    assert dt < 30


def test_4_solver_mms(criterion):
    t0 = time.perf_counter()
    errs = mms_errors(levels=3)
    dt = time.perf_counter() - t0
    vel = convergence_orders(errs, "velocity_l2")
    pre = convergence_orders(errs, "pressure_l2")
    ok = len(vel) >= 3 and min(vel) >= 1.9 and min(pre) >= 0.9 and dt < 120
    criterion("4_solver_mms", ok, f"velocity {min(vel):.2f}, pressure {min(pre):.2f}, {dt:.1f}s")
    assert len(vel) >= 3
    assert min(vel) >= 1.9 and min(pre) >= 0.9
    assert dt < 120


def test_5_rate_reproduction(sweep, criterion):
    records, dt = sweep
    rep = evaluate_sweep(records)
    v = rep.verdicts["5_rate_reproduction"]
    criterion("5_rate_reproduction", bool(v["passed"]) and dt < 900,
              f"grad slope {v['grad_slope']:.3f} r2 {v['grad_r2']:.4f}, "
              f"pressure slope {v['pressure_slope']:.3f}, {dt:.0f}s")
    assert -0.6 <= v["grad_slope"] <= -0.4
    assert v["grad_r2"] >= 0.98
    assert -1.2 <= v["pressure_slope"] <= -0.8
    assert dt < 900


def test_6_stress_rate(sweep, criterion):
    records, _ = sweep
    v = evaluate_sweep(records).verdicts["6_stress_rate"]
    floors = [r["stress_floor"] for r in records]
    criterion("6_stress_rate", bool(v["passed"]),
              f"slope {v['stress_slope']:.3f}, floor variation {v['stress_floor_variation']:.2f}")
    assert -0.6 <= v["stress_slope"] <= -0.4
    assert min(floors) > 0 and variation(floors) < 3


def test_7_remainder_boundedness(criterion):
    rows = remainder_check(NeckGeometry(epsilon=0.04, profile="quadratic"), SCALING_EPS)
    var = {a: variation([r[f"remainder_{a}"] for r in rows]) for a in (1, 2, 3)}
    g = [r["max_grad_1"] for r in rows]
    growth = [g[k + 1] / g[k] for k in range(len(g) - 1)]
    ok = all(v < 3 for v in var.values()) and all(3.0 <= x <= 5.0 for x in growth)
    criterion("7_remainder_bounds", ok, ", ".join(f"R{a} x{v:.2f}" for a, v in var.items())
              + ", growth " + "/".join(f"{x:.2f}" for x in growth))
    assert all(v < 3 for v in var.values()), rows
    assert all(3.0 <= x <= 5.0 for x in growth), growth


def test_8_interaction_scalings(scaling_records, criterion):
    rows = interaction_scaling_check(scaling_records)
    var = {k: variation([r[k] for r in rows]) for k in ("a11_11_sqrt_eps", "a11_22_eps_3_2", "a11_33_sqrt_eps")}
    off = max(max(r["a11_12_rel"], r["a11_23_rel"]) for r in rows)
    ok = all(v < 2 for v in var.values()) and off <= 1e-3
    criterion("8_interaction_scalings", ok, ", ".join(f"{k} x{v:.2f}" for k, v in var.items())
              + f", off-diagonal {off:.1e}")
    assert off <= 1e-3
    assert all(v < 2 for v in var.values()), var


def test_9_constants(sweep, scaling_records, criterion):
    records, _ = sweep
    shear = constants_verdict(records)
    mixed = constants_verdict([run_epsilon(CIRCLE, e, LinearDatum.preset("mixed"), MeshParams())
                               for e in SCALING_EPS])
    bounded = shear["max_abs_C"] < 10 and mixed["max_abs_C"] < 10
    ok = shear["passed"] and mixed["passed"] and bounded and mixed["C2_diff_variation"] is not None
    criterion("9_constants", ok, f"C1 diff x{shear['C1_diff_variation']:.2f}, "
              f"C2 diff x{mixed['C2_diff_variation']:.2f}, symmetry {max(shear['C1_sum_rel'], shear['C3_diff_rel']):.1e}")
    assert bounded
    assert shear["C1_sum_rel"] <= 1e-6 and shear["C3_diff_rel"] <= 1e-6
    assert shear["C1_diff_variation"] < 3
    assert mixed["C2_diff_variation"] is not None and mixed["C2_diff_variation"] < 3


def test_10_lower_bound(sweep, criterion):
    records, _ = sweep
    v = evaluate_sweep(records).verdicts["10_lower_bound"]
    zero = [run_epsilon(CIRCLE, e, LinearDatum.preset("zero"), MeshParams(h_max=0.5, h_min_ratio=4))
            for e in DEFAULT_EPS[:3]]
    vz = evaluate_sweep(zero).verdicts["10_lower_bound"]
    ok = v["verdict"] == "pass" and vz["verdict"] == "inconclusive"
    criterion("10_lower_bound", ok, f"b*={v['b_star_1']:.3f}, floor variation {v['floor_variation']:.2f}, "
              f"zero datum {vz['verdict']}")
    assert v["verdict"] == "pass" and v["min_floor"] > 0 and v["floor_variation"] < 3
    assert vz["verdict"] == "inconclusive" and vz["passed"] is None


def test_11_balance(sweep, criterion):
    records, _ = sweep
    sweep_rel = max(float(np.max(np.abs(r["balance_residuals"]))) / r["energy_scale"] for r in records)
    g = NeckGeometry(epsilon=0.04)
    levels = [MeshParams(), MeshParams(h_max=0.15, h_min_ratio=12, c0=0.125),
              MeshParams(h_max=0.075, h_min_ratio=24, c0=0.0625)]
    vol, bnd = [], []
    for m in levels:
        b = balance_residuals(solve_system(g, m.build(g), LinearDatum.preset("shear")))
        vol.append(float(np.max(np.abs(b["volume"]))) / b["energy_scale"])
        bnd.append(float(np.max(np.abs(b["boundary"]))) / b["energy_scale"])
    shrinking = all(y < x for x, y in zip(bnd, bnd[1:]))
    ok = sweep_rel <= 1e-8 and max(vol) <= 1e-8 and shrinking
    criterion("11_balance", ok, f"volume {max(sweep_rel, max(vol)):.1e}, boundary "
              + " > ".join(f"{x:.1e}" for x in bnd))
    assert sweep_rel <= 1e-8 and max(vol) <= 1e-8
    assert shrinking, bnd


def test_12_determinism(tmp_path, criterion):
    eps = DEFAULT_EPS[:3]
    mesh = MeshParams(h_max=0.5, h_min_ratio=4)
    paths = []
    for k in range(2):
        recs = [run_epsilon(CIRCLE, e, LinearDatum.preset("shear"), mesh) for e in eps]
        p = tmp_path / f"run{k}.csv"
        evaluate_sweep(recs).write_csv(p)
        paths.append(p)
    same = paths[0].read_bytes() == paths[1].read_bytes()
    criterion("12_determinism", same)
    assert same
