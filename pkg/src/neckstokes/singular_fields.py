"""Closed-form singular velocity/pressure pairs for the narrow gap.

For inclusion ``i`` and rigid mode ``alpha`` the pair ``(v, pbar)`` equals
``psi_alpha`` on dD_i, vanishes on the other inclusion and on the container,
and captures the leading singular behaviour of the Stokes solution in the neck.
All derivatives up to second order are exact (propagated by :mod:`.jet`).

The neck formulas are written for the curvature ``kappa2 = 1``; other values
are handled by substituting ``x1 -> sqrt(kappa2) * x1``.  That substitution
matches the boundary traces of a ``kappa2`` profile but is divergence free
only at ``kappa2 = 1``.

Outside the neck ``|x1| < R`` the pair is blended away with a cutoff
``chi(|x1|)`` and the Dirichlet traces are restored by a boundary layer of
width ``L`` along each inclusion.  The pressure is simply ``chi * pbar``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .geometry import NeckGeometry, smoothstep
from .jet import Jet, where

MODES = (1, 2, 3)


class FieldDomainError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class FieldId:
    inclusion: int
    mode: int

    def __post_init__(self):
        if self.inclusion not in (1, 2) or self.mode not in MODES:
            raise ValueError(f"invalid field id ({self.inclusion}, {self.mode})")

    def __str__(self):
        return f"{self.inclusion}{self.mode}"


ALL_IDS = tuple(FieldId(i, a) for i in (1, 2) for a in MODES)


@dataclass
class FieldEval:
    """Field values at one point or a batch of points.

    ``velocity_gradient[..., a, b]`` is ``d v_a / d x_b`` and
    ``velocity_hessian[..., a, b, c]`` is ``d^2 v_a / d x_b d x_c``.
    """

    velocity: np.ndarray
    pressure: np.ndarray
    velocity_gradient: np.ndarray
    velocity_hessian: np.ndarray
    pressure_gradient: np.ndarray
    residual: np.ndarray

    @property
    def divergence(self) -> np.ndarray:
        return self.velocity_gradient[..., 0, 0] + self.velocity_gradient[..., 1, 1]


def psi(alpha: int, x: np.ndarray) -> np.ndarray:
    """Rigid motion ``psi_alpha`` evaluated at points ``x`` (shape (..., 2))."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    if alpha == 1:
        out[..., 0] = 1.0
    elif alpha == 2:
        out[..., 1] = 1.0
    else:
        out[..., 0] = x[..., 1]
        out[..., 1] = -x[..., 0]
    return out


def _require_quadratic(geom: NeckGeometry):
    if geom.profile != "quadratic":
        raise FieldDomainError("singular fields are defined for the quadratic profile only")


def keller(geom: NeckGeometry, x, inclusion: int = 1) -> float:
    x1, x2 = (float(c) for c in x)
    tol = 1e-12 * max(1.0, abs(x2))
    if abs(x1) > 2 * geom.R or abs(x2) > float(geom.top(min(abs(x1), 2 * geom.R))) + tol:
        raise FieldDomainError(f"point {tuple(x)} lies outside the neck Omega_2R")
    k = x2 / float(geom.delta(x1))
    return k if inclusion == 1 else -k


# ----------------------------------------------------------------------
# neck formulas for inclusion 1 (kappa2 = 1)
def _neck_pair(alpha: int, X1: Jet, X2: Jet, eps: float, mu: float):
    delta = X1 * X1 + eps
    idelta = delta.reciprocal()
    k = X2 * idelta
    k2q = k * k - 0.25
    if alpha == 1:
        v1 = k + 0.5
        v2 = X1 * k2q
        p = X1 * k * idelta * (2 * mu)
    elif alpha == 2:
        g = X1 * X1 * idelta * 2.0 - 1.0 / 3.0
        v1 = X1 * k2q * idelta * 6.0
        v2 = k + 0.5 + X2 * g * k2q * idelta * 6.0
        p = idelta * idelta * (-3 * mu) + g * k * k * idelta * (18 * mu)
    else:
        r = X1 * X1 * idelta
        v1 = X2 * (k + 0.5) + (1.0 - r * 4.0 - X2 * k * 5.0) * k2q
        v2 = -X1 * (k + 0.5) + X1 * k * (2.0 - r * 4.0 - X2 * k * 3.0) * k2q * 2.0
        p = X1 * idelta * idelta * (2 * mu) + X1 * idelta * (1.0 - r * 2.0) * k * k * (12 * mu)
    return v1, v2, p


def _psi_jets(alpha: int, X1: Jet, X2: Jet):
    shape = X1.v.shape
    if alpha == 1:
        return Jet.constant(1.0, shape), Jet.constant(0.0, shape)
    if alpha == 2:
        return Jet.constant(0.0, shape), Jet.constant(1.0, shape)
    return X2, -X1


def layer_width(geom: NeckGeometry) -> float:
    return min(0.1, 0.8 * float(geom.h(geom.R)))


def _field_inclusion1(alpha, geom, X1: Jet, X2: Jet, kappa2: float):
    """(v1, v2, p) jets of the inclusion-1 field at the jet point (X1, X2)."""
    eps, mu, R = geom.epsilon, geom.mu, geom.R
    x1, x2 = X1.v, X2.v
    ax = np.abs(x1)
    strip = (ax < 2 * R) & (np.abs(x2) <= geom.top(np.minimum(ax, 2 * R)) * (1 + 1e-9))

    absX1 = X1.apply(ax, np.sign(x1), np.zeros_like(x1))
    S, dS, d2S = smoothstep((ax - R) / R)
    chi = 1.0 - absX1.apply(S, dS / R, d2S / R**2)

    n = geom.normal_coordinate(1, X1, X2)
    L = layer_width(geom)
    B, dB, d2B = smoothstep(n.v / L)
    beta = 1.0 - n.apply(B, dB / L, d2B / L**2)
    s1, s2 = _psi_jets(alpha, X1, X2)
    w1, w2 = s1 * beta, s2 * beta

    shape = x1.shape
    zero = Jet.constant(0.0, shape)
    if np.any(strip):
        sq = math.sqrt(kappa2)
        n1, n2, pn = _neck_pair(alpha, X1[strip] * sq, X2[strip], eps, mu)
        def put(part):
            full = Jet.constant(0.0, shape)
            full.v[strip], full.g[:, strip], full.h[:, :, strip] = part.v, part.g, part.h
            return full
        n1, n2, pn = put(n1), put(n2), put(pn)
        omc = 1.0 - chi
        v1 = where(strip, chi * n1 + omc * w1, w1)
        v2 = where(strip, chi * n2 + omc * w2, w2)
        p = where(strip, chi * pn, zero)
    else:
        v1, v2, p = w1, w2, zero
    return v1, v2, p


MIRROR_SIGN = {1: 1.0, 2: -1.0, 3: -1.0}


def _check_fluid(geom: NeckGeometry, pts: np.ndarray):
    r = np.hypot(pts[:, 0], pts[:, 1])
    if np.any(r > geom.container_radius * (1 + 1e-12)):
        raise FieldDomainError("point outside the container")
    for i in (1, 2):
        X1 = Jet.variable(pts[:, 0], 0)
        X2 = Jet.variable(pts[:, 1], 1)
        n = geom.normal_coordinate(i, X1, X2).v
        if np.any(n < -1e-9):
            raise FieldDomainError(f"point inside inclusion D{i}")


def aux_field(fid: FieldId, geom: NeckGeometry, x, kappa2: float | None = None) -> FieldEval:
    """Evaluate the singular pair ``(v_i^alpha, pbar_i^alpha)`` at ``x``.

    ``x`` may be a single point or an array of shape (N, 2).  ``kappa2``
    defaults to the geometry's curvature.
    """
    _require_quadratic(geom)
    kappa2 = geom.kappa2 if kappa2 is None else kappa2
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    _check_fluid(geom, pts)

    X1 = Jet.variable(pts[:, 0], 0)
    X2 = Jet.variable(pts[:, 1], 1)
    if fid.inclusion == 1:
        v1, v2, p = _field_inclusion1(fid.mode, geom, X1, X2, kappa2)
    else:
        # reflection x2 -> -x2 maps D2 onto D1
        s = MIRROR_SIGN[fid.mode]
        m1, m2, mp = _field_inclusion1(fid.mode, geom, X1, -X2, kappa2)
        v1, v2, p = m1 * s, m2 * (-s), mp * s

    vel = np.stack([v1.v, v2.v], axis=-1)
    grad = np.stack([np.moveaxis(v1.g, 0, -1), np.moveaxis(v2.g, 0, -1)], axis=-2)
    hess = np.stack([np.moveaxis(v1.h, (0, 1), (-2, -1)), np.moveaxis(v2.h, (0, 1), (-2, -1))], axis=-3)
    pg = np.moveaxis(p.g, 0, -1)
    lap = hess[..., 0, 0] + hess[..., 1, 1]
    res = geom.mu * lap - pg
    out = FieldEval(vel, p.v, grad, hess, pg, res)
    if single:
        out = FieldEval(*(getattr(out, f)[0] for f in
                          ("velocity", "pressure", "velocity_gradient", "velocity_hessian",
                           "pressure_gradient", "residual")))
    return out


def divergence(fid: FieldId, geom: NeckGeometry, x, kappa2: float | None = None):
    return aux_field(fid, geom, x, kappa2).divergence


def residual(fid: FieldId, geom: NeckGeometry, x, kappa2: float | None = None):
    return aux_field(fid, geom, x, kappa2).residual


# ----------------------------------------------------------------------
def neck_samples(geom: NeckGeometry, n: int, r: float | None = None) -> np.ndarray:
    """Deterministic low-discrepancy points strictly inside the neck ``|x1| < r``."""
    r = geom.R if r is None else r
    u = qmc.Halton(d=2, scramble=False).random(n + 1)[1:]
    x1 = r * (2 * u[:, 0] - 1)
    x2 = (u[:, 1] - 0.5) * geom.delta(x1)
    return np.column_stack([x1, x2])


def bound_ratio(fid: FieldId, geom: NeckGeometry, sample_count: int = 10_000,
                kappa2: float | None = None) -> float:
    """Sup of the residual against its envelope over the neck ``Omega_R``.

    The envelope is ``1/delta`` for modes 1 and 3 and
    ``(|x1| + sqrt(delta)) / delta**2`` for mode 2.
    """
    if sample_count < 1000:
        raise ValueError("sample_count must be at least 1000")
    pts = neck_samples(geom, sample_count)
    f = np.linalg.norm(residual(fid, geom, pts, kappa2), axis=-1)
    d = geom.delta(pts[:, 0])
    if fid.mode == 2:
        ratio = f * d**2 / (np.abs(pts[:, 0]) + np.sqrt(d))
    else:
        ratio = f * d
    return float(np.max(ratio))


def boundary_samples(geom: NeckGeometry, n: int, inclusion: int) -> np.ndarray:
    """Points of dD_i with ``|x1| < 2R``."""
    u = qmc.Halton(d=1, scramble=False).random(n + 1)[1:, 0]
    x1 = 2 * geom.R * (2 * u - 1)
    x2 = geom.top(x1)
    return np.column_stack([x1, x2 if inclusion == 1 else -x2])


def field_check_report(geom: NeckGeometry, kappa2: float | None = None,
                       n_samples: int = 10_000, n_boundary: int = 1000,
                       divergence_tol: float = 1e-8, boundary_tol: float = 1e-10,
                       identity_tol: float = 1e-12) -> dict:
    """Run the identity suite for all six fields.

    Returns ``{"passed": bool, "failures": [...], "fields": {id: {...}}}``.
    """
    _require_quadratic(geom)
    mu = geom.mu
    interior = neck_samples(geom, n_samples)
    wide = neck_samples(geom, n_samples, 2 * geom.R)
    bnd = {i: boundary_samples(geom, n_boundary, i) for i in (1, 2)}
    report, failures = {}, []

    for fid in ALL_IDS:
        ev = aux_field(fid, geom, interior, kappa2)
        g = ev.velocity_gradient
        div_rel = np.abs(ev.divergence) / (np.abs(g[:, 0, 0]) + np.abs(g[:, 1, 1]) + 1.0)

        defect = 0.0
        for j in (1, 2):
            vb = aux_field(fid, geom, bnd[j], kappa2).velocity
            target = psi(fid.mode, bnd[j]) if j == fid.inclusion else 0.0
            defect = max(defect, float(np.max(np.abs(vb - target))))

        entry = {
            "max_divergence": float(np.max(div_rel)),
            "max_boundary_defect": defect,
            "bound_ratio": bound_ratio(fid, geom, n_samples, kappa2),
            "identity_residuals": {},
        }
        if fid == FieldId(1, 1):
            ew = aux_field(fid, geom, wide, kappa2)
            a, b = mu * ew.velocity_gradient[:, 1, 1], ew.pressure
            entry["identity_residuals"]["dx2_v2_minus_p"] = _rel(a, b)
        if fid == FieldId(1, 2):
            a, b = mu * ev.velocity_hessian[:, 1, 1, 1], ev.pressure_gradient[:, 1]
            entry["identity_residuals"]["dx2x2_v2_minus_dx2_p"] = _rel(a, b)

        if not entry["max_divergence"] <= divergence_tol:
            failures.append(f"divergence_free[{fid}]")
        if not defect <= boundary_tol:
            failures.append(f"boundary_trace[{fid}]")
        for name, val in entry["identity_residuals"].items():
            if not val <= identity_tol:
                failures.append(f"identity:{name}[{fid}]")
        if not math.isfinite(entry["bound_ratio"]):
            failures.append(f"bound_ratio[{fid}]")
        report[str(fid)] = entry
    return {"passed": not failures, "failures": failures, "fields": report}


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = np.abs(a) + np.abs(b)
    out = np.where(scale > 0, np.abs(a - b) / np.where(scale > 0, scale, 1.0), 0.0)
    return float(np.max(out))
