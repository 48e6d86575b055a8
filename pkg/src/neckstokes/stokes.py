"""Taylor-Hood (P2 velocity / P1 pressure) solver for Dirichlet Stokes problems.

The bilinear forms are

    a(u, v) = int 2 mu e(u) : e(v),     b(v, q) = -int q div v,

with a scalar Lagrange multiplier pinning the mean pressure to zero.  The
saddle-point matrix is factorized once per mesh; every Dirichlet datum on the
same mesh reuses the factorization.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from .mesh import Mesh, TAGS

BOUNDARY_TAGS = ("D1", "D2", "outer")
REGULARIZATION = 1e-8
REFINEMENT_TOL = 1e-14
ACCEPT_TOL = 1e-9


class SolverError(RuntimeError):
    pass


class IncompatibleDataError(ValueError):
    def __init__(self, flux, scale):
        super().__init__(f"boundary data violate the compatibility condition: flux {flux:.3e} "
                         f"(scale {scale:.3e})")
        self.flux = flux


class OutsideMeshError(ValueError):
    pass


# ----------------------------------------------------------------------
# quadrature on the reference triangle, barycentric points and weights summing to 1
def _sym_rule():
    a1, b1 = 0.059715871789770, 0.470142064105115
    a2, b2 = 0.797426985353087, 0.101286507323456
    pts = [(1 / 3, 1 / 3, 1 / 3),
           (a1, b1, b1), (b1, a1, b1), (b1, b1, a1),
           (a2, b2, b2), (b2, a2, b2), (b2, b2, a2)]
    w = [0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3
    return np.array(pts), np.array(w)


QUAD2 = (np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
         np.full(3, 1 / 3))
QUAD5 = _sym_rule()
GAUSS5 = np.polynomial.legendre.leggauss(5)


def p2_basis(lam: np.ndarray):
    """P2 shape functions at barycentric points ``lam`` (..., 3); nodes v0 v1 v2 m01 m12 m20."""
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    return np.stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                     4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0], axis=-1)


def p2_dbasis(lam: np.ndarray):
    """Derivatives of the P2 shape functions with respect to (l0, l1, l2): (..., 6, 3)."""
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    z = np.zeros_like(l0)
    rows = [
        (4 * l0 - 1, z, z), (z, 4 * l1 - 1, z), (z, z, 4 * l2 - 1),
        (4 * l1, 4 * l0, z), (z, 4 * l2, 4 * l1), (4 * l2, z, 4 * l0),
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


# ----------------------------------------------------------------------
@dataclass
class BoundaryData:
    """Dirichlet traces keyed by boundary tag, each a callable ``g(points) -> (n, 2)``."""

    traces: dict
    body_force: Callable | None = None
    label: str = ""

    def value(self, tag: str, pts: np.ndarray) -> np.ndarray:
        g = self.traces.get(tag)
        if g is None:
            return np.zeros_like(pts)
        return np.broadcast_to(np.asarray(g(pts), dtype=float), pts.shape)

    @classmethod
    def uniform(cls, g, label=""):
        return cls({t: g for t in BOUNDARY_TAGS}, label=label)


class Discretization:
    """P2/P1 dof layout, assembled matrices and the factorized saddle-point system."""

    def __init__(self, mesh: Mesh, mu: float = 1.0):
        self.mesh, self.mu = mesh, float(mu)
        v, t = mesh.vertices, mesh.triangles
        nv, nt = len(v), len(t)
        loc = np.array([[0, 1], [1, 2], [2, 0]])
        e = np.sort(t[:, loc].reshape(-1, 2), axis=1)
        edges, inv = np.unique(e, axis=0, return_inverse=True)
        inv = inv.ravel()
        self.edges = edges
        self.elem_nodes = np.concatenate([t, nv + inv.reshape(nt, 3)], axis=1)
        self.nodes = np.concatenate([v, v[edges].mean(axis=1)])
        self.n_nodes = len(self.nodes)
        self.nv, self.nt = nv, nt

        # neighbours across each local edge (opposite local vertex k = edge (k+1, k+2))
        opp = np.array([[1, 2], [2, 0], [0, 1]])
        eo = np.sort(t[:, opp].reshape(-1, 2), axis=1)
        _, einv = np.unique(eo, axis=0, return_inverse=True)
        einv = einv.ravel()
        owner = np.repeat(np.arange(nt), 3)
        order = np.argsort(einv, kind="stable")
        se, so = einv[order], owner[order]
        nb = np.full(3 * nt, -1)
        same = np.flatnonzero(se[1:] == se[:-1])
        nb[order[same]] = so[same + 1]
        nb[order[same + 1]] = so[same]
        self.neighbors = nb.reshape(nt, 3)

        p = v[t]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        self.det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        self.area = 0.5 * self.det
        jinv = np.stack([np.stack([d2[:, 1], -d2[:, 0]], -1), np.stack([-d1[:, 1], d1[:, 0]], -1)], 1)
        jinv /= self.det[:, None, None]
        # gradients of barycentric coordinates, (nt, 3, 2)
        self.dlam = np.stack([-jinv[:, 0] - jinv[:, 1], jinv[:, 0], jinv[:, 1]], axis=1)

        # boundary nodes and their tags
        bedges = np.sort(mesh.boundary_edges, axis=1)
        bidx = _rows_lookup(edges, bedges)
        self.boundary_edge_index = bidx
        self.boundary_edge_tags = mesh.boundary_edge_tags
        tag = np.zeros(self.n_nodes, dtype=int)
        tag[mesh.boundary_edges.ravel()] = np.repeat(mesh.boundary_edge_tags, 2)
        tag[nv + bidx] = mesh.boundary_edge_tags
        self.node_tags = tag
        self.bnodes = np.flatnonzero(tag > 0)
        # element containing each boundary edge
        self.boundary_edge_elem = _edge_owner(t, mesh.boundary_edges)

        self._assemble()
        self._factor()
        self._tree = cKDTree(mesh.centroids())

    # ------------------------------------------------------------------
    def grad_basis(self, lam: np.ndarray) -> np.ndarray:
        """Physical gradients of the six P2 functions at one barycentric point: (nt, 6, 2)."""
        db = p2_dbasis(lam)  # (6, 3)
        return np.einsum("ak,tkd->tad", db, self.dlam)

    def _assemble(self):
        nt, mu = self.nt, self.mu
        nn = self.n_nodes
        lam_q, w_q = QUAD2
        K = np.zeros((nt, 12, 12))
        Bl = np.zeros((nt, 3, 12))
        for lam, w in zip(lam_q, w_q):
            G = self.grad_basis(lam)  # (nt, 6, 2)
            # strain of the 12 vector basis functions (Voigt e11, e22, 2 e12), dof = 2*node + comp
            E = np.zeros((nt, 3, 12))
            E[:, 0, 0::2] = G[:, :, 0]
            E[:, 1, 1::2] = G[:, :, 1]
            E[:, 2, 0::2] = G[:, :, 1]
            E[:, 2, 1::2] = G[:, :, 0]
            D = np.array([2 * mu, 2 * mu, mu])
            K += w * np.einsum("tik,i,til->tkl", E, D, E) * self.area[:, None, None]
            div = np.zeros((nt, 12))
            div[:, 0::2] = G[:, :, 0]
            div[:, 1::2] = G[:, :, 1]
            Bl += -w * lam[None, :, None] * div[:, None, :] * self.area[:, None, None]

        vd = np.empty((nt, 12), dtype=int)
        vd[:, 0::2] = 2 * self.elem_nodes
        vd[:, 1::2] = 2 * self.elem_nodes + 1
        self.vel_dofs = vd
        rows = np.repeat(vd, 12, axis=1).ravel()
        cols = np.tile(vd, (1, 12)).ravel()
        self.A = sp.csr_matrix((K.ravel(), (rows, cols)), shape=(2 * nn, 2 * nn))
        pr = np.repeat(self.mesh.triangles, 12, axis=1).ravel()
        pc = np.tile(vd, (1, 3)).ravel()
        self.B = sp.csr_matrix((Bl.ravel(), (pr, pc)), shape=(self.nv, 2 * nn))
        self.pmass_vec = np.bincount(self.mesh.triangles.ravel(),
                                     np.repeat(self.area / 3, 3), minlength=self.nv)
        self.measure = float(self.area.sum())

    def _factor(self):
        nn = self.n_nodes
        fixed = np.zeros(2 * nn, bool)
        fixed[2 * self.bnodes] = True
        fixed[2 * self.bnodes + 1] = True
        self.fixed = fixed
        self.free = np.flatnonzero(~fixed)
        Aff = self.A[self.free][:, self.free]
        Bf = self.B[:, self.free]
        self.M = sp.bmat([[Aff, Bf.T], [Bf, None]], format="csr")
        # quasi-definite shift of the pressure block: any symmetric ordering admits
        # an LDL^T-type factorization without pivoting; refinement removes the shift
        reg = sp.diags(-REGULARIZATION * self.pmass_vec / self.mu)
        K = sp.bmat([[Aff, Bf.T], [Bf, reg]], format="csc")
        try:
            self.lu = spla.splu(K, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                                options={"SymmetricMode": True})
        except RuntimeError as exc:  # pragma: no cover - depends on mesh pathology
            raise SolverError(f"saddle-point factorization failed: {exc}") from exc

    # ------------------------------------------------------------------
    def boundary_values(self, data: BoundaryData) -> np.ndarray:
        g = np.zeros((self.n_nodes, 2))
        inv = {v: k for k, v in TAGS.items()}
        for code in np.unique(self.node_tags[self.bnodes]):
            sel = self.bnodes[self.node_tags[self.bnodes] == code]
            g[sel] = data.value(inv[int(code)], self.nodes[sel])
        return g

    def boundary_flux(self, data: BoundaryData) -> tuple[float, float]:
        """Flux of the data across the polygonal boundary (Gauss rule per edge) and its scale."""
        inv = {v: k for k, v in TAGS.items()}
        x, w = GAUSS5
        s = 0.5 * (x + 1)
        flux = scale = 0.0
        for code in np.unique(self.boundary_edge_tags):
            be = self.mesh.boundary_edges[self.boundary_edge_tags == code]
            elem = self.boundary_edge_elem[self.boundary_edge_tags == code]
            a, b = self.mesh.vertices[be[:, 0]], self.mesh.vertices[be[:, 1]]
            nrm = _outward_normals(self.mesh, be, elem)
            length = np.linalg.norm(b - a, axis=1)
            pts = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
            g = data.value(inv[int(code)], pts.reshape(-1, 2)).reshape(pts.shape)
            gn = np.einsum("eqd,ed->eq", g, nrm)
            flux += float(np.sum(0.5 * length * (gn @ w)))
            scale += float(np.sum(0.5 * length * (np.linalg.norm(g, axis=2) @ w)))
        return flux, scale

    def body_load(self, f: Callable) -> np.ndarray:
        lam_q, w_q = QUAD5
        F = np.zeros(2 * self.n_nodes)
        p = self.mesh.vertices[self.mesh.triangles]
        for lam, w in zip(lam_q, w_q):
            x = np.einsum("k,tkd->td", lam, p)
            fv = np.asarray(f(x), dtype=float)
            phi = p2_basis(lam)
            contrib = w * self.area[:, None, None] * phi[None, :, None] * fv[:, None, :]
            np.add.at(F, self.vel_dofs.reshape(-1, 6, 2), contrib)
        return F

    def solve(self, data: BoundaryData, check_compatibility: bool = True,
              max_refinement: int = 30) -> "MixedField":
        if check_compatibility:
            flux, scale = self.boundary_flux(data)
            if abs(flux) > 1e-10 * max(scale, 1.0):
                raise IncompatibleDataError(flux, scale)
        nn = self.n_nodes
        g = self.boundary_values(data).ravel()
        ug = np.where(self.fixed, g, 0.0)
        F = self.body_load(data.body_force) if data.body_force is not None else np.zeros(2 * nn)
        rhs_u = (F - self.A @ ug)[self.free]
        rhs_p = -(self.B @ ug)
        # the zero-mean multiplier absorbs the discrete flux defect in closed form
        lagrange = float(rhs_p.sum() / self.pmass_vec.sum())
        rhs = np.concatenate([rhs_u, rhs_p - lagrange * self.pmass_vec])
        x = self.lu.solve(rhs)
        bnorm = np.linalg.norm(rhs) or 1.0
        last = math.inf
        for _ in range(max_refinement):
            r = rhs - self.M @ x
            if not np.all(np.isfinite(r)):
                raise SolverError("non-finite residual in saddle-point solve")
            rel = np.linalg.norm(r) / bnorm
            if rel <= REFINEMENT_TOL or rel > 0.5 * last:
                break
            last = rel
            x += self.lu.solve(r)
        if not rel <= ACCEPT_TOL:
            raise SolverError(f"iterative refinement stalled at relative residual {rel:.2e}")
        p = x[len(self.free):]
        p = p - (self.pmass_vec @ p) / self.measure
        u = ug.copy()
        u[self.free] = x[: len(self.free)]
        return MixedField(self, u.reshape(nn, 2), p, data.label, lagrange)

    # ------------------------------------------------------------------
    def locate(self, pts: np.ndarray, tol: float = 1e-10, max_steps: int = 5000):
        """Walking search; returns element indices and barycentric coordinates."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        _, elem = self._tree.query(pts)
        elem = np.asarray(elem)
        v, t = self.mesh.vertices, self.mesh.triangles
        active = np.arange(len(pts))
        lam = np.zeros((len(pts), 3))
        for _ in range(max_steps):
            if len(active) == 0:
                break
            e = elem[active]
            l12 = np.einsum("tkd,td->tk", self.dlam[e][:, 1:], pts[active] - v[t[e, 0]])
            L = np.column_stack([1 - l12.sum(axis=1), l12])
            lam[active] = L
            worst = np.argmin(L, axis=1)
            done = L[np.arange(len(e)), worst] >= -tol
            nxt = self.neighbors[e, worst]
            stuck = ~done & (nxt < 0)
            if np.any(stuck):
                raise OutsideMeshError(f"point {pts[active[stuck][0]]} lies outside the mesh")
            elem[active[~done]] = nxt[~done]
            active = active[~done]
        else:
            raise OutsideMeshError("walking search did not converge")
        return elem, lam


def _rows_lookup(table: np.ndarray, rows: np.ndarray) -> np.ndarray:
    n = table.max() + 1
    key_t = table[:, 0] * n + table[:, 1]
    key_r = rows[:, 0] * n + rows[:, 1]
    order = np.argsort(key_t)
    pos = np.searchsorted(key_t[order], key_r)
    return order[pos]


def _edge_owner(tris: np.ndarray, edges: np.ndarray) -> np.ndarray:
    loc = np.array([[0, 1], [1, 2], [2, 0]])
    e = np.sort(tris[:, loc].reshape(-1, 2), axis=1)
    idx = _rows_lookup(e, np.sort(edges, axis=1))
    return idx // 3


def _outward_normals(mesh: Mesh, edges: np.ndarray, elem: np.ndarray) -> np.ndarray:
    a, b = mesh.vertices[edges[:, 0]], mesh.vertices[edges[:, 1]]
    d = b - a
    n = np.stack([d[:, 1], -d[:, 0]], axis=1)
    n /= np.linalg.norm(n, axis=1)[:, None]
    c = mesh.vertices[mesh.triangles[elem]].mean(axis=1)
    flip = np.einsum("ed,ed->e", n, 0.5 * (a + b) - c) < 0
    n[flip] *= -1
    return n


# ----------------------------------------------------------------------
@dataclass
class MixedField:
    disc: Discretization
    velocity: np.ndarray   # (n_nodes, 2) P2 nodal values
    pressure: np.ndarray   # (nv,) P1 nodal values
    label: str = ""
    flux_multiplier: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def mesh(self) -> Mesh:
        return self.disc.mesh

    def combine(self, other: "MixedField", a: float = 1.0, b: float = 1.0) -> "MixedField":
        _same_mesh(self, other)
        return MixedField(self.disc, a * self.velocity + b * other.velocity,
                          a * self.pressure + b * other.pressure)

    def scaled(self, a: float) -> "MixedField":
        return MixedField(self.disc, a * self.velocity, a * self.pressure, self.label)

    def at(self, elem: np.ndarray, lam: np.ndarray):
        """Velocity, raw velocity gradient and pressure at barycentric points."""
        d = self.disc
        phi = p2_basis(lam)  # (n, 6)
        db = p2_dbasis(lam)  # (n, 6, 3)
        G = np.einsum("nak,nkd->nad", db, d.dlam[elem])
        U = self.velocity[d.elem_nodes[elem]]  # (n, 6, 2)
        vel = np.einsum("na,nac->nc", phi, U)
        grad = np.einsum("nad,nac->ncd", G, U)
        pres = np.einsum("nk,nk->n", lam, self.pressure[self.mesh.triangles[elem]])
        return vel, grad, pres

    def element_gradients(self, elems=None, lam=(1 / 3, 1 / 3, 1 / 3)):
        elems = np.arange(self.disc.nt) if elems is None else np.asarray(elems)
        L = np.broadcast_to(np.asarray(lam, dtype=float), (len(elems), 3))
        return self.at(elems, L)[1]

    def divergence_residual(self) -> float:
        return float(np.max(np.abs(self.disc.B @ self.velocity.ravel())))

    def mean_pressure(self) -> float:
        return float(self.disc.pmass_vec @ self.pressure / self.disc.measure)


def _same_mesh(f1: MixedField, f2: MixedField):
    # a rebuilt discretization of the same mesh numbers its dofs identically
    if f1.disc is not f2.disc and (f1.mesh is not f2.mesh or f1.disc.mu != f2.disc.mu):
        raise ValueError("fields live on different meshes")


_CACHE: dict = {}


def discretize(mesh: Mesh, mu: float = 1.0) -> Discretization:
    key = (id(mesh), float(mu))
    hit = _CACHE.get(key)
    if hit is None or hit.mesh is not mesh:
        if len(_CACHE) > 8:
            _CACHE.clear()
        hit = _CACHE[key] = Discretization(mesh, mu)
    return hit


def solve_dirichlet(mesh: Mesh, mu: float, data: BoundaryData) -> MixedField:
    return discretize(mesh, mu).solve(data)


def evaluate(field: MixedField, x) -> dict:
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    elem, lam = field.disc.locate(pts)
    vel, grad, pres = field.at(elem, lam)
    if np.asarray(x).ndim == 1:
        vel, grad, pres = vel[0], grad[0], pres[0]
    return {"velocity": vel, "velocity_gradient": grad, "pressure": pres}


def stress_tensor(grad: np.ndarray, pressure, mu: float) -> np.ndarray:
    e = 0.5 * (grad + np.swapaxes(grad, -1, -2))
    return 2 * mu * e - np.asarray(pressure)[..., None, None] * np.eye(2)


def stress(field: MixedField, x, pressure_offset: float = 0.0) -> np.ndarray:
    ev = evaluate(field, x)
    return stress_tensor(ev["velocity_gradient"], ev["pressure"] - pressure_offset, field.disc.mu)


def energy_inner_product(f1: MixedField, f2: MixedField) -> float:
    _same_mesh(f1, f2)
    return float(f1.velocity.ravel() @ (f1.disc.A @ f2.velocity.ravel()))


def reaction(field: MixedField) -> np.ndarray:
    """Consistent discrete boundary traction ``A u + B^T p`` at the velocity dofs."""
    d = field.disc
    return d.A @ field.velocity.ravel() + d.B.T @ field.pressure


def boundary_traction_moment(field: MixedField, tag: str, weight: Callable,
                             pressure_offset: float = 0.0) -> float:
    """Quadrature of ``weight(x) . sigma nu`` over the boundary edges carrying ``tag``.

    ``nu`` points out of the fluid.  Stresses are the raw element values.
    """
    d = field.disc
    sel = d.boundary_edge_tags == TAGS[tag]
    be = field.mesh.boundary_edges[sel]
    elem = d.boundary_edge_elem[sel]
    nrm = _outward_normals(field.mesh, be, elem)
    a, b = field.mesh.vertices[be[:, 0]], field.mesh.vertices[be[:, 1]]
    length = np.linalg.norm(b - a, axis=1)
    x, w = GAUSS5
    total = 0.0
    for s, wq in zip(0.5 * (x + 1), w):
        pts = a + s * (b - a)
        lam = _barycentric(d, elem, pts)
        _, grad, pres = field.at(elem, lam)
        sig = stress_tensor(grad, pres - pressure_offset, d.mu)
        tn = np.einsum("ncd,nd->nc", sig, nrm)
        total += float(np.sum(0.5 * wq * length * np.einsum("nc,nc->n", tn, weight(pts))))
    return total


def _barycentric(d: Discretization, elem: np.ndarray, pts: np.ndarray) -> np.ndarray:
    v0 = d.mesh.vertices[d.mesh.triangles[elem, 0]]
    l12 = np.einsum("tkd,td->tk", d.dlam[elem][:, 1:], pts - v0)
    return np.column_stack([1 - l12.sum(axis=1), l12])


def export_probe_csv(path, fields: dict, probes: np.ndarray) -> None:
    """Write ``x1, x2, u1, u2, p`` columns for each named field on the probe points."""
    probes = np.atleast_2d(probes)
    cols = ["x1", "x2"]
    data = [probes[:, 0], probes[:, 1]]
    for name, f in fields.items():
        ev = evaluate(f, probes)
        cols += [f"{name}_u1", f"{name}_u2", f"{name}_p"]
        data += [ev["velocity"][:, 0], ev["velocity"][:, 1], ev["pressure"]]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in zip(*data):
            w.writerow([repr(float(v)) for v in row])


# ----------------------------------------------------------------------
# manufactured solution on the unit disk
def mms_exact(x: np.ndarray, mu: float = 1.0):
    """Velocity from the stream function sin(pi x1) sin(pi x2) and p = cos(pi x1) cos(pi x2)."""
    s1, c1 = np.sin(math.pi * x[..., 0]), np.cos(math.pi * x[..., 0])
    s2, c2 = np.sin(math.pi * x[..., 1]), np.cos(math.pi * x[..., 1])
    u = np.stack([math.pi * s1 * c2, -math.pi * c1 * s2], axis=-1)
    grad = math.pi**2 * np.stack([np.stack([c1 * c2, -s1 * s2], -1),
                                  np.stack([s1 * s2, -c1 * c2], -1)], -2)
    p = c1 * c2
    gp = -math.pi * np.stack([s1 * c2, c1 * s2], axis=-1)
    f = 2 * mu * math.pi**2 * u + gp  # -mu lap u + grad p
    return u, grad, p, f


def disk_mesh(n_boundary: int, levels: int = 0) -> Mesh:
    """Unit-disk mesh refined ``levels`` times by 4-splitting, midpoints projected to the circle."""
    import triangle as tr

    th = np.linspace(0, 2 * math.pi, n_boundary, endpoint=False)
    ring = np.column_stack([np.cos(th), np.sin(th)])
    segs = np.column_stack([np.arange(n_boundary), (np.arange(n_boundary) + 1) % n_boundary])
    h = 2 * math.pi / n_boundary
    m = tr.triangulate({"vertices": ring, "segments": segs}, f"pq30Ya{0.5 * h * h:.10f}")
    v, t = m["vertices"], m["triangles"]
    t = _ccw(v, t)
    for _ in range(levels):
        v, t = _refine(v, t)
    from .mesh import _boundary_edges

    edges = _boundary_edges(t)
    vt = np.zeros(len(v), dtype=int)
    vt[edges.ravel()] = TAGS["outer"]
    return Mesh(v, t, vt, np.zeros(len(t), dtype=int), edges,
                np.full(len(edges), TAGS["outer"]), {"levels": levels})


def _ccw(v, t):
    p = v[t]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    t = t.copy()
    t[neg] = t[neg][:, ::-1]
    return t


def _refine(v, t):
    from .mesh import _boundary_edges

    loc = np.array([[0, 1], [1, 2], [2, 0]])
    e = np.sort(t[:, loc].reshape(-1, 2), axis=1)
    edges, inv = np.unique(e, axis=0, return_inverse=True)
    inv = inv.ravel().reshape(-1, 3) + len(v)
    mid = v[edges].mean(axis=1)
    bnd = _rows_lookup(edges, np.sort(_boundary_edges(t), axis=1))
    mid[bnd] /= np.linalg.norm(mid[bnd], axis=1)[:, None]
    nv = np.concatenate([v, mid])
    a, b, c = t.T
    m01, m12, m20 = inv.T
    nt = np.concatenate([np.stack([a, m01, m20], 1), np.stack([m01, b, m12], 1),
                         np.stack([m20, m12, c], 1), np.stack([m01, m12, m20], 1)])
    return nv, nt


def mms_errors(levels: int = 3, n_boundary: int = 16, mu: float = 1.0) -> list[dict]:
    """L2 velocity, H1 velocity and L2 pressure errors on successive uniform refinements."""
    out = []
    for lev in range(levels + 1):
        mesh = disk_mesh(n_boundary, lev)
        disc = Discretization(mesh, mu)
        data = BoundaryData({"outer": lambda x: mms_exact(x, mu)[0]},
                            body_force=lambda x: mms_exact(x, mu)[3], label="mms")
        f = disc.solve(data)
        lam_q, w_q = QUAD5
        p = mesh.vertices[mesh.triangles]
        eu = eg = ep = 0.0
        pm_h = f.mean_pressure()
        # mean of exact p over the polygon
        pm = sum(w * np.sum(disc.area * mms_exact(np.einsum("k,tkd->td", l, p), mu)[2])
                 for l, w in zip(lam_q, w_q)) / disc.measure
        elems = np.arange(disc.nt)
        for lam, w in zip(lam_q, w_q):
            x = np.einsum("k,tkd->td", lam, p)
            u, g, pe, _ = mms_exact(x, mu)
            vel, grad, pres = f.at(elems, np.broadcast_to(lam, (disc.nt, 3)))
            eu += np.sum(w * disc.area * np.sum((vel - u) ** 2, axis=1))
            eg += np.sum(w * disc.area * np.sum((grad - g) ** 2, axis=(1, 2)))
            ep += np.sum(w * disc.area * ((pres - pm_h) - (pe - pm)) ** 2)
        h = float(np.max(np.linalg.norm(p[:, 1] - p[:, 0], axis=1)))
        out.append({"h": h, "dofs": 2 * disc.n_nodes + disc.nv, "velocity_l2": math.sqrt(eu),
                    "velocity_h1": math.sqrt(eg), "pressure_l2": math.sqrt(ep)})
    return out


def convergence_orders(errors: list[dict], key: str) -> list[float]:
    return [math.log(errors[k][key] / errors[k + 1][key]) / math.log(errors[k]["h"] / errors[k + 1]["h"])
            for k in range(len(errors) - 1)]
