"""Epsilon sweeps, rate fits and verdicts on the blow-up claims."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import NeckGeometry
from .mesh import build_mesh, Mesh
from .rigid import (AssembledSolution, LinearDatum, b_tilde, balance_residuals, extrapolate_sqrt,
                    solve_system, subproblem_data)
from .singular_fields import ALL_IDS, FieldId, aux_field, neck_samples
from .stokes import discretize, stress_tensor

DEFAULT_EPS = (0.08, 0.04, 0.02, 0.01, 0.005)
SCALING_EPS = (0.04, 0.01, 0.0025)

TOLERANCES = {
    "grad_slope": (-0.6, -0.4),
    "grad_r2": 0.98,
    "pressure_slope": (-1.2, -0.8),
    "stress_slope": (-0.6, -0.4),
    "floor_factor": 3.0,
    "scaling_factor": 2.0,
    "symmetric_zero": 1e-3,
    "constant_factor": 3.0,
    "symmetry_rel": 1e-6,
    "balance_rel": 1e-8,
    "hessian_slope": (-1.6, -1.4),
    "proxy_slope_min": -1.8,
}


class InsufficientDataError(ValueError):
    pass


@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "r_squared": self.r_squared}


def fit_rate(points) -> RateFit:
    """Least-squares line through ``(log eps, log value)``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 2:
        raise InsufficientDataError("fit_rate needs at least two points")
    if np.any(pts <= 0):
        raise ValueError("fit_rate needs positive epsilon and values")
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    slope, intercept = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), r2)


def variation(values) -> float:
    """max/min of the absolute values; inf if any is zero."""
    v = np.abs(np.asarray(values, dtype=float))
    return float(v.max() / v.min()) if v.min() > 0 else math.inf


# ----------------------------------------------------------------------
@dataclass
class MeshParams:
    h_max: float = 0.3
    h_min_ratio: float = 6.0
    c0: float = 0.25
    h_min: float | None = None

    def build(self, geom: NeckGeometry) -> Mesh:
        h_min = self.h_min if self.h_min is not None else geom.epsilon / self.h_min_ratio
        return build_mesh(geom, h_min, self.h_max, self.c0)


def segment_points(geom: NeckGeometry, n: int = 41) -> np.ndarray:
    x2 = np.linspace(-0.5 * geom.epsilon, 0.5 * geom.epsilon, n)
    return np.column_stack([np.zeros(n), x2])


def neck_measurements(sol: AssembledSolution) -> dict:
    """Maxima of gradient, stress and the second-derivative proxy over the neck elements."""
    geom, u = sol.geom, sol.total
    mesh = u.mesh
    ne = mesh.neck_elements()
    cen = mesh.centroids()[ne]
    third = np.full((len(ne), 3), 1 / 3)
    _, G, P = u.at(ne, third)
    gnorm = np.linalg.norm(G, axis=(1, 2))
    sig = stress_tensor(G, P - sol.q_R, geom.mu)
    verts = np.unique(mesh.triangles[ne])
    p = u.pressure[verts]

    d = u.disc
    nb = d.neighbors[ne]
    is_neck = np.zeros(d.nt, bool)
    is_neck[ne] = True
    pos = np.full(d.nt, -1)
    pos[ne] = np.arange(len(ne))
    a_idx, k = np.nonzero((nb >= 0) & is_neck[np.maximum(nb, 0)])
    b_idx = pos[nb[a_idx, k]]
    dG = np.linalg.norm(G[a_idx] - G[b_idx], axis=(1, 2))
    dist = np.linalg.norm(cen[a_idx] - cen[b_idx], axis=1)
    proxy = float(np.max(dG / dist)) if len(dist) else 0.0

    # P1 pressure gradient, constant per element; reported only
    tv = mesh.vertices[mesh.triangles[ne]]
    J = np.stack([tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0]], axis=1)
    tp = u.pressure[mesh.triangles[ne]]
    dp = np.linalg.solve(J, (tp[:, 1:] - tp[:, :1])[..., None])[..., 0]

    eps = geom.epsilon
    x1 = cen[:, 0]
    return {
        "max_grad_neck": float(gnorm.max()),
        "pressure_osc": float(0.5 * (p.max() - p.min())),
        "pressure_midrange": float(0.5 * (p.max() + p.min())),
        "max_stress": float(np.linalg.norm(sig, axis=(1, 2)).max()),
        "max_pressure_gradient": float(np.linalg.norm(dp, axis=1).max()),
        "second_derivative_proxy": proxy,
        "envelope_ratio": float(np.max(gnorm * (eps + x1**2) / (math.sqrt(eps) + np.abs(x1)))),
        "headline_envelope_ratio": float(np.max(gnorm * np.sqrt(eps + x1**2))),
        "min_layers": int(mesh.size_field.get("layers", 0)),
    }


def segment_measurements(sol: AssembledSolution, n: int = 41) -> dict:
    geom, u = sol.geom, sol.total
    pts = segment_points(geom, n)
    elem, lam = u.disc.locate(pts)
    _, G, P = u.at(elem, lam)
    sig = stress_tensor(G, P - sol.q_R, geom.mu)
    g = np.linalg.norm(G, axis=(1, 2))
    s = np.linalg.norm(sig, axis=(1, 2))
    r = math.sqrt(geom.epsilon)
    return {"max_grad_segment": float(g.max()), "grad_floor": float(r * g.min()),
            "stress_floor": float(r * s.min())}


def gradient_envelope_check(sol: AssembledSolution, geom: NeckGeometry | None = None) -> float:
    return neck_measurements(sol)["envelope_ratio"]


def lower_bound_check(sol: AssembledSolution, geom: NeckGeometry | None, b_star: dict) -> dict:
    """Floor ``min sqrt(eps) |grad u(0, x2)|`` on the segment, or inconclusive if ``b~* ~ 0``."""
    if b_star.get("near_zero", False):
        return {"verdict": "inconclusive", "grad_floor": None, "stress_floor": None}
    seg = segment_measurements(sol)
    return {"verdict": "pass" if seg["grad_floor"] > 0 else "fail",
            "grad_floor": seg["grad_floor"], "stress_floor": seg["stress_floor"]}


# ----------------------------------------------------------------------
def run_epsilon(geometry: dict, eps: float, phi: LinearDatum, mesh: MeshParams) -> dict:
    """Full pipeline at one gap width; returns a plain, picklable record."""
    geom = NeckGeometry.from_dict({**geometry, "epsilon": eps})
    m = mesh.build(geom)
    sol = solve_system(geom, m, phi)
    a, b, C = sol.system.a, sol.system.b, sol.system.C
    bal = balance_residuals(sol)
    rec = {"epsilon": eps, "n_vertices": m.n_vertices, "n_triangles": m.n_triangles}
    rec.update(neck_measurements(sol))
    rec.update(segment_measurements(sol))
    rec.update({
        "a": a.tolist(), "b": b.tolist(), "C": C.tolist(),
        "b_tilde": b_tilde(sol).tolist(), "q_R": sol.q_R,
        "balance_residuals": bal["volume"].tolist(),
        "boundary_balance": bal["boundary"].tolist(),
        "energy_scale": bal["energy_scale"],
        "condition_number": sol.system.diagnostics["condition_number"],
        "min_eigenvalue": sol.system.diagnostics["min_eigenvalue"],
        "asymmetry": sol.system.diagnostics["asymmetry"],
    })
    return rec


def neck_integral(eps: float, R: float) -> float:
    """``int_{-R}^{R} dx1 / (eps + x1^2)``, the leading-order neck energy of the shear mode."""
    r = math.sqrt(eps)
    return 2.0 / r * math.atan(R / r)


def interaction_scaling_check(records, R: float = 0.5, mu: float = 1.0) -> list[dict]:
    out = []
    for r in records:
        a = np.asarray(r["a"])
        e = r["epsilon"]
        lg = math.log(1 / e)
        out.append({
            "epsilon": e,
            "a11_11_leading_order": mu * neck_integral(e, R),
            "a11_11_sqrt_eps": a[0, 0] * math.sqrt(e),
            "a11_22_eps_3_2": a[1, 1] * e**1.5,
            "a11_33_sqrt_eps": a[2, 2] * math.sqrt(e),
            "a11_12_over_log": a[0, 1] / lg,
            "a11_23_over_log": a[1, 2] / lg,
            "a11_13": a[0, 2],
            "a11_12_rel": abs(a[0, 1]) / math.sqrt(a[0, 0] * a[1, 1]),
            "a11_23_rel": abs(a[1, 2]) / math.sqrt(a[0, 0] * a[1, 1]),
        })
    return out


def remainder_check(geom: NeckGeometry, eps_list, mesh: MeshParams | None = None) -> list[dict]:
    """Per-epsilon maxima over the neck of ``|grad(u_1^alpha - v_1^alpha)|``.

    For ``alpha = 2`` the difference is weighted by ``sqrt(delta(x1))``.
    """
    if geom.profile != "quadratic":
        raise ValueError("remainder_check requires the quadratic profile")
    mesh = mesh or MeshParams()
    rows = []
    for eps in eps_list:
        g = geom.with_epsilon(eps)
        m = mesh.build(g)
        disc = discretize(m, g.mu)
        ne = m.neck_elements()
        cen = m.centroids()[ne]
        row = {"epsilon": eps}
        for alpha in (1, 2, 3):
            fid = FieldId(1, alpha)
            u = disc.solve(subproblem_data(fid))
            G = u.element_gradients(ne)
            V = aux_field(fid, g, cen).velocity_gradient
            diff = np.linalg.norm(G - V, axis=(1, 2))
            if alpha == 2:
                diff = diff * np.sqrt(g.delta(cen[:, 0]))
            row[f"remainder_{alpha}"] = float(diff.max())
            row[f"max_grad_{alpha}"] = float(np.linalg.norm(G, axis=(1, 2)).max())
        rows.append(row)
    return rows


def closed_form_hessian_max(geom: NeckGeometry, n: int = 20000) -> float:
    """Max over the neck of the Frobenius norm of the exact Hessian of v_1^1."""
    pts = neck_samples(geom, n)
    # add a line of points through the x1 = sqrt(eps/3) ridge where the maximum sits
    x1 = np.sqrt(geom.epsilon) * np.linspace(0.0, 2.0, 201)
    t = np.linspace(-0.5, 0.5, 41)
    X, T = np.meshgrid(x1, t)
    ridge = np.column_stack([X.ravel(), (T * geom.delta(X)).ravel()])
    pts = np.concatenate([pts, ridge])
    H = aux_field(FieldId(1, 1), geom, pts).velocity_hessian
    return float(np.max(np.linalg.norm(H.reshape(len(pts), -1), axis=1)))


def second_derivative_rate(records) -> dict:
    """Slope of the discrete second-derivative proxy; warns below six layers."""
    if len(records) < 3:
        raise InsufficientDataError("second_derivative_rate needs at least three epsilon values")
    lo = TOLERANCES["proxy_slope_min"]
    if min(r.get("min_layers", 6) for r in records) < 6:
        warnings.warn("fewer than six layers across the gap; widening the proxy tolerance")
        lo -= 0.3
    fit = fit_rate([(r["epsilon"], r["second_derivative_proxy"]) for r in records])
    return {"fit": fit.to_dict(), "lower": lo}


# ----------------------------------------------------------------------
@dataclass
class SweepReport:
    records: list
    fits: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    extrapolation: list = field(default_factory=list)

    CSV_COLUMNS = ["epsilon", "max_grad_neck", "max_grad_segment", "pressure_osc", "max_stress",
                   "a11_11", "a11_22", "a11_33", "C1_1", "C1_2", "C1_3", "C2_1", "C2_2", "C2_3",
                   "b_tilde_1", "b_tilde_2", "b_tilde_3", "q_R", "second_derivative_proxy",
                   "grad_floor", "stress_floor", "n_vertices"]

    def csv_rows(self):
        for r in self.records:
            a, C, bt = np.asarray(r["a"]), r["C"], r["b_tilde"]
            yield [r["epsilon"], r["max_grad_neck"], r["max_grad_segment"], r["pressure_osc"],
                   r["max_stress"], a[0, 0], a[1, 1], a[2, 2], *C, *bt[0], r["q_R"],
                   r["second_derivative_proxy"], r["grad_floor"], r["stress_floor"], r["n_vertices"]]

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(self.CSV_COLUMNS) + "\n")
            for row in self.csv_rows():
                fh.write(",".join(_fmt(v) for v in row) + "\n")

    def write_gnuplot(self, path):
        """Columns: log10 eps, then log10 of each rate quantity."""
        keys = ["max_grad_neck", "pressure_osc", "max_stress", "second_derivative_proxy"]
        with open(path, "w") as fh:
            fh.write("# log10(epsilon) " + " ".join(f"log10({k})" for k in keys) + "\n")
            for r in self.records:
                vals = [math.log10(r["epsilon"])] + [math.log10(r[k]) if r[k] > 0 else float("nan")
                                                     for k in keys]
                fh.write(" ".join(_fmt(v) for v in vals) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _band(value, band) -> bool:
    return band[0] <= value <= band[1]


def evaluate_sweep(records: list, tol: dict | None = None) -> SweepReport:
    """Fit rates and evaluate the criteria a sweep can decide."""
    tol = {**TOLERANCES, **(tol or {})}
    records = sorted(records, key=lambda r: -r["epsilon"])
    if len(records) < 3:
        raise InsufficientDataError("a sweep needs at least three epsilon values")
    eps = np.array([r["epsilon"] for r in records])
    fits = {}
    for k in ("max_grad_neck", "max_grad_segment", "pressure_osc", "max_stress",
              "second_derivative_proxy"):
        vals = [r[k] for r in records]
        fits[k] = fit_rate(list(zip(eps, vals))).to_dict() if min(vals) > 0 else None
    v = {}
    g, p, s = fits["max_grad_neck"], fits["pressure_osc"], fits["max_stress"]
    if g is None or p is None or s is None:
        # identically vanishing solution: bounds hold trivially, rates are undefined
        note = "solution vanishes in the neck; rates undefined"
        v["5_rate_reproduction"] = {"passed": None, "note": note}
        v["6_stress_rate"] = {"passed": None, "note": note}
    else:
        v["5_rate_reproduction"] = {
            "passed": _band(g["slope"], tol["grad_slope"]) and g["r_squared"] >= tol["grad_r2"]
            and _band(p["slope"], tol["pressure_slope"]),
            "grad_slope": g["slope"], "grad_r2": g["r_squared"], "pressure_slope": p["slope"],
        }
        sf = [r["stress_floor"] for r in records]
        v["6_stress_rate"] = {
            "passed": _band(s["slope"], tol["stress_slope"]) and min(sf) > 0
            and variation(sf) < tol["floor_factor"],
            "stress_slope": s["slope"], "stress_floor_variation": variation(sf),
        }
    sc = interaction_scaling_check(records)
    diag_var = {k: variation([row[k] for row in sc])
                for k in ("a11_11_sqrt_eps", "a11_22_eps_3_2", "a11_33_sqrt_eps")}
    zero_rel = max(max(row["a11_12_rel"], row["a11_23_rel"]) for row in sc)
    v["8_interaction_scalings"] = {
        "passed": all(x < tol["scaling_factor"] for x in diag_var.values())
        and zero_rel <= tol["symmetric_zero"],
        **{f"{k}_variation": x for k, x in diag_var.items()}, "max_offdiag_rel": zero_rel,
    }
    v["9_constants"] = constants_verdict(records, tol)

    bt = np.array([r["b_tilde"][0] for r in records])
    extrap = [extrapolate_sqrt(eps, bt[:, beta]) for beta in range(3)]
    floors = [r["grad_floor"] for r in records]
    if extrap[0]["near_zero"]:
        v["10_lower_bound"] = {"passed": None, "verdict": "inconclusive", "b_star_1": extrap[0]["c0"]}
    else:
        ok = min(floors) > 0 and variation(floors) < tol["floor_factor"]
        v["10_lower_bound"] = {"passed": ok, "verdict": "pass" if ok else "fail",
                               "b_star_1": extrap[0]["c0"], "floor_variation": variation(floors),
                               "min_floor": min(floors)}
    bal = max(float(np.max(np.abs(r["balance_residuals"]))) / (r["energy_scale"] or 1.0) for r in records)
    v["11_balance"] = {"passed": bal <= tol["balance_rel"], "max_relative_residual": bal}
    return SweepReport(records, fits, v, extrap)


def constants_verdict(records, tol=None) -> dict:
    tol = {**TOLERANCES, **(tol or {})}
    C = np.array([r["C"] for r in records])
    eps = np.array([r["epsilon"] for r in records])
    d1 = np.abs(C[:, 0] - C[:, 3]) / np.sqrt(eps)
    d2 = np.abs(C[:, 1] - C[:, 4]) / eps**1.5
    scale = np.maximum(np.max(np.abs(C), axis=1), np.finfo(float).tiny)
    sym1 = float(np.max(np.abs(C[:, 0] + C[:, 3]) / scale))
    sym3 = float(np.max(np.abs(C[:, 2] - C[:, 5]) / scale))
    d1_active = bool(np.all(np.abs(C[:, 0] - C[:, 3]) > 1e-10 * scale))
    d2_active = bool(np.all(np.abs(C[:, 1] - C[:, 4]) > 1e-10 * scale))
    out = {
        "max_abs_C": float(np.max(np.abs(C))),
        "C1_diff_variation": variation(d1) if d1_active else None,
        "C2_diff_variation": variation(d2) if d2_active else None,
        "C1_sum_rel": sym1, "C3_diff_rel": sym3,
    }
    ok = sym1 <= tol["symmetry_rel"] and sym3 <= tol["symmetry_rel"]
    if d1_active:
        ok = ok and variation(d1) < tol["constant_factor"]
    if d2_active:
        ok = ok and variation(d2) < tol["constant_factor"]
    else:
        out["note"] = "C_1^2 - C_2^2 vanishes for this datum; its scaling is not tested"
    out["passed"] = bool(ok)
    return out
