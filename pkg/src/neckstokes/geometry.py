"""Two nearly touching inclusions inside a disk-shaped container.

Inclusion ``D1`` sits above the axis ``x2 = 0`` and ``D2`` is its mirror image
below it; the gap between them at the origin is ``epsilon``.  Near the origin
both boundaries are graphs ``x2 = +-(epsilon/2 + h(x1))`` for ``|x1| <= 2R``.

Two neck profiles are supported:

``circle``
    ``D1`` is the disk of radius ``inclusion_radius`` centred at
    ``(0, inclusion_radius + epsilon/2)``.
``quadratic``
    ``h(x1) = kappa2 * x1**2 / 2`` exactly for ``|x1| <= 2R``; outside the
    neck the parabola is blended (C2 quintic smoothstep in the polar angle)
    into a circular arc that closes the inclusion.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, asdict, fields

import numpy as np

from .jet import Jet, atan2

PROFILES = ("quadratic", "circle")
CLEARANCE = 1.0  # kappa_0: minimal distance between inclusions and container
BLEND_ANGLE = 0.5  # polar-angle width of the quadratic-to-arc blend


class GeometryError(ValueError):
    pass


class OutOfNeckError(GeometryError):
    pass


class Region(enum.Enum):
    INSIDE_D1 = "inside_D1"
    INSIDE_D2 = "inside_D2"
    NECK_FLUID = "neck_fluid"
    OUTER_FLUID = "outer_fluid"
    OUTSIDE_CONTAINER = "outside_container"


def smoothstep(u):
    """Quintic smoothstep on [0, 1] and its first two derivatives."""
    u = np.clip(u, 0.0, 1.0)
    s = u**3 * (10.0 - 15.0 * u + 6.0 * u**2)
    ds = 30.0 * u**2 * (1.0 - u) ** 2
    d2s = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
    return s, ds, d2s


@dataclass(frozen=True)
class NeckGeometry:
    epsilon: float
    profile: str = "circle"
    kappa2: float = 1.0
    inclusion_radius: float = 1.0
    container_radius: float = 4.0
    R: float = 0.5
    mu: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise GeometryError(f"epsilon must be positive, got {self.epsilon}")
        if self.profile not in PROFILES:
            raise GeometryError(f"unknown profile {self.profile!r}")
        if self.R <= 0 or self.mu <= 0 or self.kappa2 <= 0:
            raise GeometryError("R, mu and kappa2 must be positive")
        if self.profile == "circle" and not 2 * self.R <= self.inclusion_radius:
            raise GeometryError("2R must not exceed the inclusion radius")
        reach = float(np.max(np.hypot(*self.boundary_points(1, np.linspace(0, np.pi, 721)).T)))
        if reach + CLEARANCE > self.container_radius:
            raise GeometryError(
                f"container radius {self.container_radius} leaves less than "
                f"{CLEARANCE} clearance around the inclusions (reach {reach:.3f})"
            )

    @classmethod
    def from_dict(cls, data: dict) -> "NeckGeometry":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})

    def to_dict(self) -> dict:
        return asdict(self)

    def with_epsilon(self, epsilon: float) -> "NeckGeometry":
        return NeckGeometry(**{**asdict(self), "epsilon": epsilon})

    # ------------------------------------------------------------------
    # neck profile
    def h(self, x1):
        x1 = np.asarray(x1, dtype=float)
        if self.profile == "quadratic":
            return 0.5 * self.kappa2 * x1**2
        r = self.inclusion_radius
        # r - sqrt(r^2 - x^2), written without cancellation
        return x1**2 / (r + np.sqrt(r * r - x1**2))

    def dh(self, x1):
        x1 = np.asarray(x1, dtype=float)
        if self.profile == "quadratic":
            return self.kappa2 * x1
        return x1 / np.sqrt(self.inclusion_radius**2 - x1**2)

    def delta(self, x1):
        """Vertical gap width ``epsilon + h1(x1) + h2(x1)`` for ``|x1| <= 2R``."""
        x1 = np.asarray(x1, dtype=float)
        if np.any(np.abs(x1) > 2 * self.R * (1 + 1e-12)):
            raise OutOfNeckError(f"|x1| exceeds 2R = {2 * self.R}")
        return self.epsilon + 2.0 * self.h(x1)

    def top(self, x1):
        return 0.5 * self.epsilon + self.h(x1)

    # ------------------------------------------------------------------
    # closed inclusion boundaries, in polar form about a centre on the x2 axis
    @property
    def _quad_center(self) -> float:
        return self.kappa2 * (2 * self.R) ** 2

    def center(self, i: int) -> np.ndarray:
        if self.profile == "circle":
            cy = self.inclusion_radius + 0.5 * self.epsilon
        else:
            cy = self._quad_center + 0.5 * self.epsilon
        return np.array([0.0, cy if i == 1 else -cy])

    def _quad_radius(self, theta):
        """Polar radius r(theta) and derivatives for the quadratic profile.

        ``theta`` is measured from the direction pointing at the neck, so
        ``theta = 0`` is the point nearest the other inclusion.
        """
        yc, kap, two_r = self._quad_center, self.kappa2, 2 * self.R
        theta1 = math.atan2(two_r, 0.5 * yc)
        rho = math.hypot(two_r, 0.5 * yc)
        theta = np.asarray(theta, dtype=float)
        sgn = np.where(theta < 0, -1.0, 1.0)
        theta = np.abs(theta)
        far = theta >= theta1 + BLEND_ANGLE
        theta = np.minimum(theta, theta1 + BLEND_ANGLE)
        c, s = np.cos(theta), np.sin(theta)
        a = 2.0 * kap * yc
        q2 = c * c + a * s * s
        q = np.sqrt(q2)
        dq2 = (a - 1.0) * np.sin(2 * theta)
        d2q2 = 2.0 * (a - 1.0) * np.cos(2 * theta)
        dq = dq2 / (2 * q)
        d2q = d2q2 / (2 * q) - dq2**2 / (4 * q**3)
        den = c + q
        dden = -s + dq
        d2den = -c + d2q
        t = 2 * yc / den
        dt = -2 * yc * dden / den**2
        d2t = -2 * yc * (d2den / den**2 - 2 * dden**2 / den**3)

        S, dS, d2S = smoothstep((theta - theta1) / BLEND_ANGLE)
        dS, d2S = dS / BLEND_ANGLE, d2S / BLEND_ANGLE**2
        gap = rho - t
        r = t + S * gap
        dr = dt + dS * gap - S * dt
        d2r = d2t + d2S * gap - 2 * dS * dt - S * d2t
        r = np.where(far, rho, r)
        dr = np.where(far, 0.0, dr) * sgn
        d2r = np.where(far, 0.0, d2r)
        return r, dr, d2r

    def polar_radius(self, theta):
        if self.profile == "circle":
            th = np.asarray(theta, dtype=float)
            z = np.zeros_like(th)
            return z + self.inclusion_radius, z, z
        return self._quad_radius(theta)

    def boundary_points(self, i: int, theta) -> np.ndarray:
        """Points of dD_i at polar angles ``theta`` (0 = nearest the neck)."""
        theta = np.asarray(theta, dtype=float)
        r, _, _ = self.polar_radius(theta)
        c = self.center(i)
        sign = 1.0 if i == 1 else -1.0
        return np.stack([c[0] + r * np.sin(theta), c[1] - sign * r * np.cos(theta)], axis=-1)

    def neck_angle(self, x1: float) -> float:
        """Polar angle of the point of dD_1 above abscissa ``x1`` (``|x1| <= 2R``)."""
        c = self.center(1)
        return math.atan2(x1, c[1] - float(self.top(x1)))

    def _polar(self, i: int, pts: np.ndarray):
        c = self.center(i)
        sign = 1.0 if i == 1 else -1.0
        dx = pts[..., 0] - c[0]
        dy = sign * (c[1] - pts[..., 1])
        return np.hypot(dx, dy), np.arctan2(dx, dy)

    def inside_inclusion(self, i: int, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        dist, theta = self._polar(i, pts)
        r, _, _ = self.polar_radius(theta)
        return dist < r

    def normal_coordinate(self, i: int, X1: Jet, X2: Jet) -> Jet:
        """Smooth signed coordinate ``|x - c_i| - r_i(theta)``; zero on dD_i."""
        c = self.center(i)
        sign = 1.0 if i == 1 else -1.0
        dx = X1 - c[0]
        dy = (c[1] - X2) * sign
        dist = (dx * dx + dy * dy).sqrt()
        theta = atan2(dx, dy)
        r, dr, d2r = self.polar_radius(theta.v)
        return dist - theta.apply(r, dr, d2r)

    # ------------------------------------------------------------------
    def in_neck(self, pts, r: float | None = None) -> np.ndarray:
        """Membership in the open neck region Omega_r (default r = R)."""
        r = self.R if r is None else r
        pts = np.asarray(pts, dtype=float)
        x1, x2 = pts[..., 0], pts[..., 1]
        ok = np.abs(x1) < r
        x1c = np.clip(x1, -2 * self.R, 2 * self.R)
        t = self.top(x1c)
        return ok & (x2 > -t) & (x2 < t)

    def classify_points(self, pts, r: float | None = None) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.full(pts.shape[0], Region.OUTER_FLUID, dtype=object)
        out[self.in_neck(pts, r)] = Region.NECK_FLUID
        out[self.inside_inclusion(2, pts)] = Region.INSIDE_D2
        out[self.inside_inclusion(1, pts)] = Region.INSIDE_D1
        out[np.hypot(pts[:, 0], pts[:, 1]) >= self.container_radius] = Region.OUTSIDE_CONTAINER
        return out


def delta(geom: NeckGeometry, x1):
    return geom.delta(x1)


def classify_point(geom: NeckGeometry, x, r: float | None = None) -> Region:
    if r is not None and r not in (geom.R, 2 * geom.R):
        raise ValueError("neck radius must be R or 2R")
    return geom.classify_points(np.asarray(x, dtype=float)[None, :], r)[0]
