"""Graded triangulations of the two-inclusion fluid domain.

The mesh is generated on the quadrant ``x1, x2 >= 0`` and reflected across
both axes, so it is exactly symmetric.  The neck strip ``0 <= x1 <= R`` is a
structured mapped grid in ``(x1, t)`` with ``x2 = t * top(x1)``; the rest of
the quadrant is a constrained quality Delaunay mesh (``triangle``) whose
boundary vertices follow the size field, glued to the strip at ``x1 = R``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import triangle as tr

from .geometry import NeckGeometry

TAGS = {"interior": 0, "D1": 1, "D2": 2, "outer": 3}
ELEMENT_TAGS = {"outer": 0, "neck": 1}
DEFAULT_C0 = 0.25
GRADATION = 0.25
BOUNDARY_GRADATION = 0.3


class ConfigurationError(ValueError):
    pass


@dataclass
class Mesh:
    vertices: np.ndarray          # (nv, 2)
    triangles: np.ndarray         # (nt, 3), counter-clockwise
    vertex_tags: np.ndarray       # (nv,) codes from TAGS
    element_tags: np.ndarray      # (nt,) codes from ELEMENT_TAGS
    boundary_edges: np.ndarray    # (nb, 2)
    boundary_edge_tags: np.ndarray
    size_field: dict = field(default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def quality(self) -> np.ndarray:
        """``2 * inradius / circumradius`` per triangle (1 for equilateral)."""
        p = self.vertices[self.triangles]
        a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
        b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
        c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
        area = np.abs(self.areas())
        s = 0.5 * (a + b + c)
        return 2 * (area / s) / (a * b * c / (4 * area))

    def neck_elements(self) -> np.ndarray:
        return np.flatnonzero(self.element_tags == ELEMENT_TAGS["neck"])

    def export_text(self, path) -> None:
        """Plain-text node/element file, one vertex or triangle per line."""
        inv = {v: k for k, v in TAGS.items()}
        einv = {v: k for k, v in ELEMENT_TAGS.items()}
        with open(path, "w") as fh:
            fh.write(f"vertices {self.n_vertices}\n")
            for (x, y), t in zip(self.vertices, self.vertex_tags):
                fh.write(f"{float(x)!r} {float(y)!r} {inv[int(t)]}\n")
            fh.write(f"triangles {self.n_triangles}\n")
            for (a, b, c), t in zip(self.triangles, self.element_tags):
                fh.write(f"{a} {b} {c} {einv[int(t)]}\n")


# ----------------------------------------------------------------------
def size_function(geom: NeckGeometry, h_min: float, h_max: float, c0: float = DEFAULT_C0):
    """Target element size ``clamp(c0*delta, h_min, h_max)`` graded away from the neck."""
    R = geom.R

    def s(pts):
        pts = np.atleast_2d(pts)
        r = np.hypot(pts[:, 0], pts[:, 1])
        neck = np.maximum(h_min, c0 * geom.delta(np.minimum(r, 2 * R)))
        return np.minimum(h_max, neck + GRADATION * np.maximum(0.0, r - R))

    return s


def _place_along(curve, t0, t1, size, n_dense=4000, include_end=True):
    """Points on ``curve(t)`` spaced by equal increments of the integral of ds/size."""
    t = np.linspace(t0, t1, n_dense)
    p = curve(t)
    ds = np.linalg.norm(np.diff(p, axis=0), axis=1)
    mid = 0.5 * (p[1:] + p[:-1])
    w = np.concatenate([[0.0], np.cumsum(ds / size(mid))])
    n = max(1, int(math.ceil(w[-1] - 1e-9)))
    ts = np.interp(np.linspace(0, w[-1], n + 1), w, t)
    out = curve(ts)
    return out if include_end else out[:-1]


def _strip_columns(geom, h_min, h_max, c0):
    R = geom.R
    x = np.linspace(0.0, R, 20001)
    s = np.clip(c0 * geom.delta(x), h_min, h_max)
    w = np.concatenate([[0.0], np.cumsum(np.diff(x) / (0.5 * (s[1:] + s[:-1])))])
    n = max(2, int(math.ceil(w[-1])))
    return np.interp(np.linspace(0, w[-1], n + 1), w, x)


def _quadrant(geom: NeckGeometry, h_min, h_max, c0, layers):
    R, rc = geom.R, geom.container_radius
    size = size_function(geom, h_min, h_max, c0)
    half = layers // 2

    # structured strip
    cols = _strip_columns(geom, h_min, h_max, c0)
    tops = geom.top(cols)
    frac = np.arange(half + 1) / half
    sv = np.stack([np.repeat(cols, half + 1), (tops[:, None] * frac[None, :]).ravel()], axis=1)
    idx = np.arange(len(sv)).reshape(len(cols), half + 1)
    a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    strip_tris = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    right_edge = sv[idx[-1]]  # bottom to top at x1 = R

    # exterior loop, counter-clockwise
    axis = _place_along(lambda t: np.stack([t, 0 * t], 1), R, rc, size, include_end=False)
    arc = _place_along(lambda t: rc * np.stack([np.cos(t), np.sin(t)], 1), 0.0, 0.5 * math.pi,
                       size, include_end=False)
    y_top = float(geom.boundary_points(1, np.array([math.pi]))[0, 1])
    vaxis = _place_along(lambda t: np.stack([0 * t, t], 1), rc, y_top, size, include_end=False)
    th_r = geom.neck_angle(R)
    inc = _place_along(lambda t: geom.boundary_points(1, t), math.pi, th_r, size, n_dense=8000,
                       include_end=False)
    inc[0] = (0.0, y_top)
    loop = np.concatenate([axis, arc, vaxis, inc, right_edge[::-1][:-1]])
    nl = len(loop)
    segs = np.stack([np.arange(nl), (np.arange(nl) + 1) % nl], 1)

    # sizes grow linearly away from the boundary loop, so the exterior matches the
    # spacing imposed by the strip edge and the inclusion arc
    spacing = 0.5 * (np.linalg.norm(loop - np.roll(loop, 1, axis=0), axis=1)
                     + np.linalg.norm(loop - np.roll(loop, -1, axis=0), axis=1))

    def graded(x):
        dist = np.linalg.norm(x[:, None, :] - loop[None, :, :], axis=2)
        return np.minimum(size(x), np.min(spacing[None, :] + BOUNDARY_GRADATION * dist, axis=1))

    A = {"vertices": loop, "segments": segs}
    ext = tr.triangulate(A, "pq30Y")
    for _ in range(16):
        v, t = ext["vertices"], ext["triangles"]
        cen = v[t].mean(axis=1)
        p = v[t]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        area = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        target = 0.5 * graded(cen) ** 2
        if np.all(area <= 1.2 * target):
            break
        ext["triangle_max_area"] = target
        ext = tr.triangulate(ext, "rpq30Ya")
    ev, et = ext["vertices"], ext["triangles"]
    if not np.allclose(ev[:nl], loop):
        raise ConfigurationError("mesh generator moved constrained boundary vertices")

    # glue: exterior loop vertices on the strip edge map to strip vertices
    n_strip = len(sv)
    emap = np.arange(len(ev)) + n_strip
    on_edge = np.flatnonzero(np.isclose(ev[:, 0], R, rtol=0, atol=1e-14) & (ev[:, 1] <= tops[-1] + 1e-14))
    for k in on_edge:
        j = int(np.argmin(np.abs(right_edge[:, 1] - ev[k, 1])))
        if abs(right_edge[j, 1] - ev[k, 1]) > 1e-12:
            raise ConfigurationError("strip and exterior do not conform at x1 = R")
        emap[k] = idx[-1, j]
    keep = np.ones(len(ev), bool)
    keep[on_edge] = False
    new_index = np.full(len(ev), -1)
    new_index[keep] = n_strip + np.arange(keep.sum())
    new_index[on_edge] = emap[on_edge]
    verts = np.concatenate([sv, ev[keep]])
    tris = np.concatenate([strip_tris, new_index[et]])
    etag = np.concatenate([np.full(len(strip_tris), ELEMENT_TAGS["neck"]),
                           np.full(len(et), ELEMENT_TAGS["outer"])])
    return verts, tris, etag


def _reflect(verts, tris, etag, axis):
    """Union of a mesh with its mirror image across ``x_axis = 0``."""
    other = 1 - axis
    mirror = verts.copy()
    mirror[:, other] *= -1
    on = verts[:, other] == 0.0
    new = np.flatnonzero(~on)
    index = np.arange(len(verts))
    index[new] = len(verts) + np.arange(len(new))
    v = np.concatenate([verts, mirror[new]])
    t2 = index[tris][:, ::-1]  # reflection reverses orientation
    return v, np.concatenate([tris, t2]), np.concatenate([etag, etag])


def _boundary_edges(tris):
    e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    key = np.sort(e, axis=1)
    uniq, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    if np.any(counts > 2):
        raise ConfigurationError("non-manifold edge in triangulation")
    first = np.zeros(len(uniq), dtype=int)
    first[inv[::-1]] = np.arange(len(e))[::-1]
    return e[first[counts == 1]]


def build_mesh(geom: NeckGeometry, h_min: float, h_max: float, c0: float = DEFAULT_C0) -> Mesh:
    if not 0 < h_min < h_max:
        raise ConfigurationError(f"need 0 < h_min < h_max, got {h_min}, {h_max}")
    if h_min > geom.epsilon / 4 * (1 + 1e-12):
        raise ConfigurationError(f"h_min = {h_min} exceeds epsilon/4 = {geom.epsilon / 4}")
    layers = max(4, 2 * int(math.ceil(geom.epsilon / (2 * h_min) - 1e-9)))

    v, t, et = _quadrant(geom, h_min, h_max, c0, layers)
    v, t, et = _reflect(v, t, et, axis=0)  # across x1 = 0
    v, t, et = _reflect(v, t, et, axis=1)  # across x2 = 0

    p = v[t]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    if np.any(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] <= 0):
        raise ConfigurationError("inverted triangle in generated mesh")

    edges = _boundary_edges(t)
    mid = v[edges].mean(axis=1)
    on_outer = np.hypot(v[edges][:, :, 0], v[edges][:, :, 1]).min(axis=1) > geom.container_radius * (1 - 1e-9)
    etags = np.where(on_outer, TAGS["outer"], np.where(mid[:, 1] > 0, TAGS["D1"], TAGS["D2"]))
    vtags = np.zeros(len(v), dtype=int)
    for code in (TAGS["D1"], TAGS["D2"], TAGS["outer"]):
        vtags[edges[etags == code].ravel()] = code

    meta = {"c0": c0, "h_min": h_min, "h_max": h_max, "layers": layers, "gradation": GRADATION}
    return Mesh(v, t, vtags, et, edges, etags, meta)


# ----------------------------------------------------------------------
def gap_layers(mesh: Mesh, geom: NeckGeometry, stations: np.ndarray) -> np.ndarray:
    """Number of element layers crossed by the vertical segment across the gap."""
    p = mesh.vertices[mesh.triangles]
    xmin, xmax = p[:, :, 0].min(axis=1), p[:, :, 0].max(axis=1)
    out = []
    for x in np.atleast_1d(stations):
        cand = np.flatnonzero((xmin <= x) & (xmax >= x))
        top = float(geom.top(abs(x)))
        cuts = [-top, top]
        for k in cand:
            ys = []
            for a, b in ((0, 1), (1, 2), (2, 0)):
                (xa, ya), (xb, yb) = p[k, a], p[k, b]
                if xa == xb:
                    if xa == x:
                        ys += [ya, yb]
                elif min(xa, xb) <= x <= max(xa, xb):
                    ys.append(ya + (x - xa) * (yb - ya) / (xb - xa))
            cuts += [y for y in ys if -top < y < top]
        cuts = np.unique(np.round(np.array(cuts) / max(top, 1e-300), 12))
        out.append(len(cuts) - 1)
    return np.array(out)


def audit_mesh(mesh: Mesh, geom: NeckGeometry, n_stations: int = 64) -> dict:
    """Check conformity, tagging, element quality and the gap layer count."""
    t = mesh.triangles
    e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    n_edges = len(counts)
    euler = mesh.n_vertices - n_edges + mesh.n_triangles
    bverts = np.unique(mesh.boundary_edges)
    stations = np.linspace(-geom.R, geom.R, n_stations)
    layers = gap_layers(mesh, geom, stations)
    q = mesh.quality()
    res = {
        "conforming": bool(np.all(counts <= 2)) and euler == -1,
        "boundary_tagged": bool(np.all(mesh.vertex_tags[bverts] > 0)),
        "min_quality": float(q.min()),
        "min_layers": int(layers.min()),
    }
    a, b = _adjacent_pairs(t)
    meta = mesh.size_field
    target = size_function(geom, meta.get("h_min", geom.epsilon / 6), meta.get("h_max", 0.3),
                           meta.get("c0", DEFAULT_C0))(mesh.centroids())
    realized = np.sqrt(2.0 * mesh.areas())
    ratio = lambda v: np.maximum(v[a] / v[b], v[b] / v[a])
    res["max_size_field_ratio"] = float(ratio(target).max())
    res["max_element_size_ratio"] = float(ratio(realized).max())
    res["passed"] = (res["conforming"] and res["boundary_tagged"] and res["min_quality"] >= 0.2
                     and res["min_layers"] >= 4 and res["max_size_field_ratio"] <= 1.5)
    return res


def _adjacent_pairs(tris):
    """Index pairs of triangles sharing an edge."""
    e = np.sort(np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1)
    owner = np.tile(np.arange(len(tris)), 3)
    order = np.lexsort((e[:, 1], e[:, 0]))
    e, owner = e[order], owner[order]
    same = np.all(e[1:] == e[:-1], axis=1)
    return owner[:-1][same], owner[1:][same]
