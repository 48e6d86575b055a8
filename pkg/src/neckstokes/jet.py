"""Second-order forward-mode differentiation in two variables.

A :class:`Jet` carries a value together with its exact gradient and Hessian
with respect to ``(x1, x2)``.  Arithmetic propagates derivatives by the
product, quotient and chain rules, so closed-form expressions built from jets
come with exact first and second derivatives.  All parts are numpy arrays of
the same trailing shape, which lets one jet represent many points at once.
"""
from __future__ import annotations

import numpy as np


class Jet:
    __slots__ = ("v", "g", "h")

    def __init__(self, v, g, h):
        self.v = v
        self.g = g
        self.h = h

    @classmethod
    def variable(cls, x, index: int) -> "Jet":
        x = np.asarray(x, dtype=float)
        g = np.zeros((2,) + x.shape)
        g[index] = 1.0
        return cls(x, g, np.zeros((2, 2) + x.shape))

    @classmethod
    def constant(cls, c, shape) -> "Jet":
        v = np.broadcast_to(np.asarray(c, dtype=float), shape).copy()
        return cls(v, np.zeros((2,) + shape), np.zeros((2, 2) + shape))

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, self.v.shape)

    def __add__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.v + other, self.g, self.h)
        return Jet(self.v + other.v, self.g + other.g, self.h + other.h)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.g, -self.h)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.v * other, self.g * other, self.h * other)
        g = self.g * other.v + other.g * self.v
        h = (
            self.h * other.v
            + other.h * self.v
            + np.einsum("i...,j...->ij...", self.g, other.g)
            + np.einsum("i...,j...->ij...", other.g, self.g)
        )
        return Jet(self.v * other.v, g, h)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        return self.apply(1.0 / self.v, -1.0 / self.v**2, 2.0 / self.v**3)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n: int):
        if n == 0:
            return Jet.constant(1.0, self.v.shape)
        if n == 1:
            return self
        v = self.v
        return self.apply(v**n, n * v ** (n - 1), n * (n - 1) * v ** (n - 2))

    def apply(self, f, df, d2f) -> "Jet":
        """Compose a scalar function with known derivatives onto this jet."""
        g = df * self.g
        h = df * self.h + d2f * np.einsum("i...,j...->ij...", self.g, self.g)
        return Jet(np.asarray(f, dtype=float), g, h)

    def sqrt(self) -> "Jet":
        s = np.sqrt(self.v)
        return self.apply(s, 0.5 / s, -0.25 / (s * self.v))

    def __getitem__(self, mask):
        return Jet(self.v[mask], self.g[:, mask], self.h[:, :, mask])


def atan2(a: Jet, b: Jet) -> Jet:
    """Angle ``atan2(a, b)`` with exact derivatives (undefined at a=b=0)."""
    r2 = a.v**2 + b.v**2
    da, db = b.v / r2, -a.v / r2
    daa = -2.0 * a.v * b.v / r2**2
    dbb = -daa
    dab = (a.v**2 - b.v**2) / r2**2
    g = da * a.g + db * b.g
    outer = lambda p, q: np.einsum("i...,j...->ij...", p, q)
    h = (
        da * a.h
        + db * b.h
        + daa * outer(a.g, a.g)
        + dbb * outer(b.g, b.g)
        + dab * (outer(a.g, b.g) + outer(b.g, a.g))
    )
    return Jet(np.arctan2(a.v, b.v), g, h)


def where(mask, a: Jet, b: Jet) -> Jet:
    return Jet(
        np.where(mask, a.v, b.v),
        np.where(mask, a.g, b.g),
        np.where(mask, a.h, b.h),
    )
