"""Rigid-inclusion decomposition.

The solution with free rigid motions on the inclusions is written as

    u = sum_{i, alpha} C_i^alpha u_i^alpha + u_0,

where ``u_i^alpha`` equals ``psi_alpha`` on dD_i and vanishes on the other
boundaries, and ``u_0`` carries the container datum ``phi``.  Stress balance on
each inclusion gives a 6x6 symmetric positive definite system for ``C``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .geometry import NeckGeometry
from .mesh import Mesh
from .singular_fields import ALL_IDS, FieldId, psi
from .stokes import (BoundaryData, Discretization, MixedField, boundary_traction_moment,
                     discretize, energy_inner_product, stress_tensor)

PHI_PRESETS = {
    "shear": ((0.0, 1.0), (0.0, 0.0)),
    "extension": ((1.0, 0.0), (0.0, -1.0)),
    "rotation": ((0.0, 1.0), (-1.0, 0.0)),
    "mixed": ((1.0, 1.0), (0.0, -1.0)),
    "zero": ((0.0, 0.0), (0.0, 0.0)),
}


class InteractionError(RuntimeError):
    pass


class ConditioningError(InteractionError):
    pass


@dataclass(frozen=True)
class LinearDatum:
    """Container datum ``phi(x) = matrix @ x + offset``."""

    matrix: tuple = ((0.0, 1.0), (0.0, 0.0))
    offset: tuple = (0.0, 0.0)
    name: str = "shear"

    @classmethod
    def preset(cls, name: str) -> "LinearDatum":
        if name not in PHI_PRESETS:
            raise ValueError(f"unknown phi preset {name!r}; choose from {sorted(PHI_PRESETS)}")
        return cls(PHI_PRESETS[name], (0.0, 0.0), name)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x @ np.asarray(self.matrix).T + np.asarray(self.offset)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.matrix) and not np.any(self.offset)


def _psi_trace(alpha):
    return lambda x: psi(alpha, x)


def subproblem_data(fid: FieldId) -> BoundaryData:
    tag = "D1" if fid.inclusion == 1 else "D2"
    return BoundaryData({tag: _psi_trace(fid.mode)}, label=f"u{fid}")


def solve_subproblems(geom: NeckGeometry, mesh: Mesh, phi) -> dict:
    """The six rigid-mode fields keyed by FieldId plus ``"u0"`` for the container datum."""
    disc = discretize(mesh, geom.mu)
    out = {fid: disc.solve(subproblem_data(fid)) for fid in ALL_IDS}
    out["u0"] = disc.solve(BoundaryData({"outer": phi}, label="u0"))
    return out


@dataclass
class InteractionSystem:
    a: np.ndarray
    b: np.ndarray
    C: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def entry(self, i, alpha, j, beta) -> float:
        return float(self.a[ALL_IDS.index(FieldId(i, alpha)), ALL_IDS.index(FieldId(j, beta))])

    def constant(self, i, alpha) -> float:
        return float(self.C[ALL_IDS.index(FieldId(i, alpha))])


def build_interaction(fields: dict) -> InteractionSystem:
    u = [fields[fid] for fid in ALL_IDS]
    a = np.array([[energy_inner_product(fi, fj) for fj in u] for fi in u])
    b = np.array([-energy_inner_product(fields["u0"], fj) for fj in u])
    asym = float(np.max(np.abs(a - a.T)) / np.max(np.abs(a)))
    a = 0.5 * (a + a.T)
    eig = np.linalg.eigvalsh(a)
    diag = {"asymmetry": asym, "min_eigenvalue": float(eig[0]), "max_eigenvalue": float(eig[-1]),
            "condition_number": float(eig[-1] / eig[0]) if eig[0] > 0 else math.inf}
    if eig[0] <= 1e-13 * eig[-1]:
        raise InteractionError(f"interaction matrix is not positive definite (min eigenvalue {eig[0]:.3e})")
    return InteractionSystem(a, b, None, diag)


def solve_constants(system: InteractionSystem, max_condition: float = 1e14) -> np.ndarray:
    cond = system.diagnostics.get("condition_number", np.linalg.cond(system.a))
    if not cond < max_condition:
        raise ConditioningError(f"interaction matrix condition number {cond:.3e}")
    # symmetric scaling keeps the Cholesky factor well balanced despite the eps-dependent entries
    s = 1.0 / np.sqrt(np.diag(system.a))
    As = system.a * s[:, None] * s[None, :]
    fac = sla.cho_factor(As)
    C = s * sla.cho_solve(fac, s * system.b)
    for _ in range(3):
        r = system.b - system.a @ C
        C = C + s * sla.cho_solve(fac, s * r)
    res = float(np.linalg.norm(system.b - system.a @ C))
    nb = float(np.linalg.norm(system.b))
    system.C = C
    system.diagnostics["solve_residual"] = res
    system.diagnostics["relative_solve_residual"] = res / nb if nb > 0 else res
    return C


# ----------------------------------------------------------------------
def neck_pressure(mode: int, geom: NeckGeometry, pts: np.ndarray) -> np.ndarray:
    """Singular pressure ``pbar_1^alpha`` written with the geometry's own gap ``delta(x1)``."""
    x1, x2 = pts[:, 0], pts[:, 1]
    mu = geom.mu
    d = geom.delta(x1)
    k = x2 / d
    if mode == 1:
        return 2 * mu * x1 * k / d
    if mode == 2:
        return -3 * mu / d**2 + 18 * mu / d * (2 * x1**2 / d - 1 / 3) * k**2
    return 2 * mu * x1 / d**2 + 12 * mu * x1 / d * (1 - 2 * x1**2 / d) * k**2


def _annulus_mean(field: MixedField, geom: NeckGeometry, mode: int) -> float:
    """Mean of ``p - pbar_1^mode`` over the neck elements with ``R/2 <= |x1| < R``."""
    from .stokes import QUAD5

    d = field.disc
    elems = field.mesh.neck_elements()
    cen = field.mesh.centroids()[elems]
    elems = elems[np.abs(cen[:, 0]) >= 0.5 * geom.R]
    p = field.mesh.vertices[field.mesh.triangles[elems]]
    area = d.area[elems]
    total = 0.0
    for lam, w in zip(*QUAD5):
        x = np.einsum("k,tkd->td", lam, p)
        ph = field.pressure[field.mesh.triangles[elems]] @ lam
        total += float(np.sum(w * area * (ph - neck_pressure(mode, geom, x))))
    return total / float(area.sum())


@dataclass
class AssembledSolution:
    geom: NeckGeometry
    fields: dict
    system: InteractionSystem
    total: MixedField
    q_R: float
    q_parts: dict

    def constants(self) -> dict:
        return {str(fid): float(c) for fid, c in zip(ALL_IDS, self.system.C)}

    def evaluate(self, x):
        from .stokes import evaluate

        return evaluate(self.total, x)

    def stress_at(self, elem, lam) -> np.ndarray:
        _, grad, pres = self.total.at(elem, lam)
        return stress_tensor(grad, pres - self.q_R, self.geom.mu)


def assemble(geom: NeckGeometry, fields: dict, system: InteractionSystem) -> AssembledSolution:
    C = system.C
    u = fields["u0"]
    for fid, c in zip(ALL_IDS, C):
        u = u.combine(fields[fid], 1.0, float(c))
    q_parts = {}
    q_R = 0.0
    for alpha in (1, 2, 3):
        q = _annulus_mean(fields[FieldId(1, alpha)], geom, alpha)
        q_parts[alpha] = q
        q_R += (system.constant(1, alpha) - system.constant(2, alpha)) * q
    return AssembledSolution(geom, fields, system, u, q_R, q_parts)


def solve_system(geom: NeckGeometry, mesh: Mesh, phi) -> AssembledSolution:
    fields = solve_subproblems(geom, mesh, phi)
    system = build_interaction(fields)
    solve_constants(system)
    return assemble(geom, fields, system)


# ----------------------------------------------------------------------
def balance_residuals(sol: AssembledSolution) -> dict:
    """Rigid-balance residuals ``int_{dD_j} psi_beta . sigma nu`` for the six (j, beta).

    ``volume`` uses the energy form against ``u_j^beta``; ``boundary`` integrates the
    raw discrete traction over the polygonal inclusion boundary as a cross-check.
    """
    vol = np.array([energy_inner_product(sol.total, sol.fields[fid]) for fid in ALL_IDS])
    a, C, b = sol.system.a, sol.system.C, sol.system.b
    scale = float(np.max(np.abs(a) @ np.abs(C) + np.abs(b)))
    bnd = np.array([boundary_traction_moment(sol.total, "D1" if fid.inclusion == 1 else "D2",
                                             _psi_trace(fid.mode), sol.q_R) for fid in ALL_IDS])
    return {"volume": vol, "boundary": bnd, "energy_scale": scale}


def b_tilde(sol: AssembledSolution) -> np.ndarray:
    """``b~_j^beta`` for ``u_b = sum_alpha C_2^alpha (u_1^alpha + u_2^alpha) + u_0``; rows j=1,2."""
    a, b = sol.system.a, sol.system.b
    out = np.zeros((2, 3))
    for j in (1, 2):
        for beta in (1, 2, 3):
            col = ALL_IDS.index(FieldId(j, beta))
            acc = b[col]
            for alpha in (1, 2, 3):
                c2 = sol.system.constant(2, alpha)
                acc -= c2 * (a[ALL_IDS.index(FieldId(1, alpha)), col] + a[ALL_IDS.index(FieldId(2, alpha)), col])
            out[j - 1, beta - 1] = acc
    return out


def extrapolate_sqrt(eps: np.ndarray, values: np.ndarray) -> dict:
    """Fit ``c0 + c1 sqrt(eps)``; least squares when three or more points are given."""
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(eps) < 2:
        raise ValueError("extrapolation needs at least two epsilon values")
    X = np.column_stack([np.ones_like(eps), np.sqrt(eps)])
    coef, *_ = np.linalg.lstsq(X, values, rcond=None)
    resid = values - X @ coef
    dof = len(eps) - 2
    if dof > 0:
        s2 = float(resid @ resid) / dof
        cov = s2 * np.linalg.inv(X.T @ X)
        stderr = float(math.sqrt(cov[0, 0]))
    else:
        stderr = 0.0
    spread = float(np.ptp(values))
    scale = float(np.max(np.abs(values))) if len(values) else 0.0
    near_zero = abs(coef[0]) <= max(3 * stderr, 1e-8 * scale) or scale == 0.0
    return {"c0": float(coef[0]), "c1": float(coef[1]), "stderr": stderr,
            "max_residual": float(np.max(np.abs(resid))), "spread": spread, "near_zero": bool(near_zero)}


def blow_up_functional(geom: NeckGeometry, phi, eps_list, mesh_for) -> dict:
    """``b~_1^beta`` per epsilon and their extrapolation to zero gap.

    ``mesh_for(geom_eps)`` returns the mesh used at each epsilon.
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 2:
        raise ValueError("blow_up_functional needs at least two epsilon values")
    rows = []
    for eps in eps_list:
        g = geom.with_epsilon(eps)
        sol = solve_system(g, mesh_for(g), phi)
        rows.append(b_tilde(sol))
    vals = np.array(rows)
    extrap = [extrapolate_sqrt(np.array(eps_list), vals[:, 0, beta]) for beta in range(3)]
    return {"epsilon": eps_list, "b_tilde": vals, "extrapolated": extrap}
