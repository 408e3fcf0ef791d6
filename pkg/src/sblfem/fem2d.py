"""Mixed C^0 discretization of eps^2 Lap^2 u - b Lap u + c u = f on the
disk: seek (u, w) with w = eps*Lap(u) in Q_p tensor Gauss-Lobatto spaces on
the spectral boundary layer mesh.

The coupled bilinear form is

    A_eps((u,w),(psi,phi)) = eps<grad u, grad phi> + <w, phi>
                           + b<grad u, grad psi> + c<u, psi>
                           - eps<grad w, grad psi>,

tested with phi over the whole space and psi over the zero-trace subspace;
only the right-hand side <f, psi> appears in the psi block.  Degrees of
freedom are the mapped tensor Gauss-Lobatto nodes, shared across elements
(C^0 by construction); u-values at boundary nodes are eliminated.

Norm integration grades ring-family elements radially (panels at distances
eps * 2^j from the boundary) so that layer tails inside the regular-split
elements are resolved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from . import polybasis as pb
from .linsolve import SparseSystem, solve_direct
from .meshing import Element2D, ElementTag, SblMesh2D, build_mesh_disk

MERGE_TOL = 1e-10
BOUNDARY_TOL = 1e-9


@dataclass
class ProblemSpec2D:
    """eps^2 Lap^2 u - b Lap u + c u = f, clamped on the unit circle."""

    eps: float
    b: float
    c: float
    f: Callable
    exact: object | None = None
    name: str = "custom"

    def __post_init__(self):
        if not 0.0 < self.eps <= 1.0:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        if self.b <= 0.0 or self.c <= 0.0:
            raise ValueError("b and c must be positive constants")


@dataclass
class DofMap2D:
    """Global node numbering for the tensor Gauss-Lobatto space."""

    p: int
    nodes: np.ndarray          # (n, 2) coordinates
    elem_nodes: np.ndarray     # (n_elem, (p+1)^2) global indices
    boundary: np.ndarray       # bool mask: node on the unit circle
    u_index: np.ndarray        # node -> u-unknown index, -1 at boundary

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_interior(self) -> int:
        return int(np.sum(~self.boundary))

    @property
    def dimension(self) -> int:
        """Size of the coupled system: interior u-nodes + all w-nodes."""
        return self.n_interior + self.n_nodes


def reference_nodes(p: int) -> np.ndarray:
    """Gauss-Lobatto points mapped to [0, 1]."""
    return 0.5 * (pb.gauss_lobatto_nodes(p) + 1.0)


def _local_grid(p: int):
    g = reference_nodes(p)
    xi, eta = np.meshgrid(g, g, indexing="ij")
    return xi.ravel(), eta.ravel()


def build_dofmap(mesh: SblMesh2D, p: int) -> DofMap2D:
    """Merge coincident mapped nodes into a global numbering."""
    xi, eta = _local_grid(p)
    coords = []
    for el in mesh.elements:
        x, y = el.map.point(xi, eta)
        coords.append(np.column_stack([x, y]))
    allpts = np.concatenate(coords)
    tree = cKDTree(allpts)
    pairs = tree.query_pairs(MERGE_TOL, output_type="ndarray")
    parent = np.arange(allpts.shape[0])

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(allpts.shape[0])])
    uniq, inverse = np.unique(roots, return_inverse=True)
    nodes = allpts[uniq]
    nloc = (p + 1) ** 2
    elem_nodes = inverse.reshape(mesh.n_elements, nloc)
    boundary = np.abs(nodes[:, 0] ** 2 + nodes[:, 1] ** 2 - 1.0) < BOUNDARY_TOL
    u_index = np.full(nodes.shape[0], -1, dtype=int)
    u_index[~boundary] = np.arange(int(np.sum(~boundary)))
    return DofMap2D(p, nodes, elem_nodes, boundary, u_index)


def _assembly_rule(mesh: SblMesh2D, el: Element2D, p: int):
    """(xi points, eta points, weights) on [0,1]^2; needle elements get a
    radially boosted rule."""
    n = p + 3
    n_xi = n
    if el.tag is ElementTag.NEEDLE and mesh.kappa is not None:
        n_xi = max(n, 2 * math.ceil(mesh.kappa * mesh.p) + 10)
    rx = pb.gauss_rule(min(n_xi, 120))
    ry = pb.gauss_rule(n)
    gx, wx = 0.5 * (rx.points + 1.0), 0.5 * rx.weights
    gy, wy = 0.5 * (ry.points + 1.0), 0.5 * ry.weights
    return gx, gy, np.outer(wx, wy).ravel()


def _basis_tables(p: int, g: np.ndarray):
    """Values and [0,1]-derivatives of the GL cardinals at points g."""
    basis = pb.gauss_lobatto_basis(p)
    t = 2.0 * g - 1.0
    return basis.eval_all(t, 0), 2.0 * basis.eval_all(t, 1)


def _tensor_tables(p: int, gx: np.ndarray, gy: np.ndarray):
    """N, dN/dxi, dN/deta at the tensor points, shape ((p+1)^2, nq)."""
    vx, dx = _basis_tables(p, gx)
    vy, dy = _basis_tables(p, gy)
    n1 = p + 1
    shape = np.einsum("iq,jr->ijqr", vx, vy).reshape(n1 * n1, -1)
    dxi = np.einsum("iq,jr->ijqr", dx, vy).reshape(n1 * n1, -1)
    deta = np.einsum("iq,jr->ijqr", vx, dy).reshape(n1 * n1, -1)
    return shape, dxi, deta


def _element_geometry(el: Element2D, gx: np.ndarray, gy: np.ndarray):
    xi, eta = np.meshgrid(gx, gy, indexing="ij")
    xi, eta = xi.ravel(), eta.ravel()
    x, y = el.map.point(xi, eta)
    j11, j12, j21, j22 = el.map.jacobian(xi, eta)
    det = j11 * j22 - j12 * j21
    return x, y, j11, j12, j21, j22, det


def _physical_grads(dxi, deta, j11, j12, j21, j22, det):
    gx = (j22 * dxi - j21 * deta) / det
    gy = (-j12 * dxi + j11 * deta) / det
    return gx, gy


def assemble_global_matrices(mesh: SblMesh2D, p: int, dofmap: DofMap2D,
                             f: Callable | None = None):
    """Global stiffness K, mass M (and load F if f given) of the scalar
    Q_p space."""
    n = dofmap.n_nodes
    rows, cols, kvals, mvals = [], [], [], []
    load = np.zeros(n)
    for ei, el in enumerate(mesh.elements):
        gx_pts, gy_pts, w2 = _assembly_rule(mesh, el, p)
        shape, dxi, deta = _tensor_tables(p, gx_pts, gy_pts)
        x, y, j11, j12, j21, j22, det = _element_geometry(el, gx_pts, gy_pts)
        if np.any(det <= 0.0):
            raise ValueError(f"non-positive Jacobian in element {ei}")
        w = w2 * det
        gpx, gpy = _physical_grads(dxi, deta, j11, j12, j21, j22, det)
        ke = (gpx * w) @ gpx.T + (gpy * w) @ gpy.T
        me = (shape * w) @ shape.T
        dofs = dofmap.elem_nodes[ei]
        rows.append(np.repeat(dofs, dofs.size))
        cols.append(np.tile(dofs, dofs.size))
        kvals.append(ke.ravel())
        mvals.append(me.ravel())
        if f is not None:
            load[dofs] += shape @ (f(x, y) * w)
    ij = (np.concatenate(rows), np.concatenate(cols))
    kmat = sp.coo_matrix((np.concatenate(kvals), ij), shape=(n, n)).tocsr()
    mmat = sp.coo_matrix((np.concatenate(mvals), ij), shape=(n, n)).tocsr()
    return (kmat, mmat, load) if f is not None else (kmat, mmat)


def assemble_mixed(problem: ProblemSpec2D, mesh: SblMesh2D, p: int):
    """Coupled block system in the unknowns [u_interior; w_all]."""
    if p < 2:
        raise ValueError(f"mixed method needs p >= 2, got {p}")
    dofmap = build_dofmap(mesh, p)
    kmat, mmat, load = assemble_global_matrices(mesh, p, dofmap, problem.f)
    eps, b, c = problem.eps, problem.b, problem.c
    interior = np.nonzero(~dofmap.boundary)[0]

    k_ai = kmat[:, interior]
    m_aa = mmat
    k_ii = kmat[interior][:, interior]
    m_ii = mmat[interior][:, interior]
    k_ia = kmat[interior]

    top = sp.hstack([eps * k_ai, m_aa], format="csr")
    bottom = sp.hstack([b * k_ii + c * m_ii, -eps * k_ia], format="csr")
    matrix = sp.vstack([top, bottom], format="csr")
    rhs = np.concatenate([np.zeros(dofmap.n_nodes), load[interior]])
    return SparseSystem(matrix, rhs, symmetric=False), dofmap


@dataclass
class MixedDiscreteField:
    """Discrete pair (u_p, w_p) as nodal coefficient vectors."""

    mesh: SblMesh2D
    p: int
    dofmap: DofMap2D
    u_coeffs: np.ndarray
    w_coeffs: np.ndarray

    def eval_element(self, ei: int, xi, eta, which: str = "u"):
        """Field values at reference points of element ei."""
        coeffs = self.u_coeffs if which == "u" else self.w_coeffs
        xi = np.asarray(xi, dtype=float).ravel()
        eta = np.asarray(eta, dtype=float).ravel()
        vx, _ = _basis_tables(self.p, xi)
        vy, _ = _basis_tables(self.p, eta)
        local = coeffs[self.dofmap.elem_nodes[ei]].reshape(self.p + 1, self.p + 1)
        return np.einsum("iq,ij,jq->q", vx, local, vy)

    def eval_element_grad(self, ei: int, xi, eta, which: str = "u"):
        """Physical gradient at reference points of element ei."""
        coeffs = self.u_coeffs if which == "u" else self.w_coeffs
        xi = np.asarray(xi, dtype=float).ravel()
        eta = np.asarray(eta, dtype=float).ravel()
        vx, dx = _basis_tables(self.p, xi)
        vy, dy = _basis_tables(self.p, eta)
        local = coeffs[self.dofmap.elem_nodes[ei]].reshape(self.p + 1, self.p + 1)
        gxi = np.einsum("iq,ij,jq->q", dx, local, vy)
        geta = np.einsum("iq,ij,jq->q", vx, local, dy)
        el = self.mesh.elements[ei]
        j11, j12, j21, j22 = el.map.jacobian(xi, eta)
        det = j11 * j22 - j12 * j21
        return _physical_grads(gxi, geta, j11, j12, j21, j22, det)


def solve_mixed(problem: ProblemSpec2D, kappa: float, p: int,
                rho0: float = 0.5, n_sectors: int = 8) -> MixedDiscreteField:
    """Assemble and solve on the disk SBL mesh built for (kappa, p, eps)."""
    mesh = build_mesh_disk(rho0, n_sectors, kappa, p, problem.eps)
    system, dofmap = assemble_mixed(problem, mesh, p)
    sol = solve_direct(system)
    u = np.zeros(dofmap.n_nodes)
    interior = np.nonzero(~dofmap.boundary)[0]
    u[interior] = sol[: dofmap.n_interior]
    w = sol[dofmap.n_interior :]
    return MixedDiscreteField(mesh, p, dofmap, u, w)


# ---------------------------------------------------------------------------
# interpolation and regional projections
# ---------------------------------------------------------------------------


def interpolate_gl(fn: Callable, mesh: SblMesh2D, p: int,
                   zero_trace: bool = False, dofmap: DofMap2D | None = None):
    """Nodal tensor Gauss-Lobatto interpolant; C^0 via shared nodes."""
    dofmap = dofmap or build_dofmap(mesh, p)
    vals = fn(dofmap.nodes[:, 0], dofmap.nodes[:, 1])
    vals = np.asarray(vals, dtype=float)
    if zero_trace:
        vals = vals.copy()
        vals[dofmap.boundary] = 0.0
    return vals


def regular_region(mesh: SblMesh2D) -> np.ndarray:
    """Indices of the non-needle elements."""
    return np.array(
        [i for i, el in enumerate(mesh.elements) if el.tag is not ElementTag.NEEDLE]
    )


def project_regular(g: Callable, mesh: SblMesh2D, p: int, mode: str = "L2",
                    b: float = 1.0, c: float = 1.0,
                    dofmap: DofMap2D | None = None) -> np.ndarray:
    """L2 or weighted-H^1 projection onto the trace of the discrete space
    on the regular region (union of non-needle elements).

    Returns a full-length nodal vector, zero on nodes not touched by the
    regular region."""
    if mode not in ("L2", "WEIGHTED_H1"):
        raise ValueError(f"mode must be L2 or WEIGHTED_H1, got {mode}")
    dofmap = dofmap or build_dofmap(mesh, p)
    reg = regular_region(mesh)
    n = dofmap.n_nodes
    rows, cols, avals = [], [], []
    rhs = np.zeros(n)
    for ei in reg:
        el = mesh.elements[ei]
        gx_pts, gy_pts, w2 = _assembly_rule(mesh, el, p)
        shape, dxi, deta = _tensor_tables(p, gx_pts, gy_pts)
        x, y, j11, j12, j21, j22, det = _element_geometry(el, gx_pts, gy_pts)
        w = w2 * det
        me = (shape * w) @ shape.T
        if mode == "WEIGHTED_H1":
            gpx, gpy = _physical_grads(dxi, deta, j11, j12, j21, j22, det)
            ae = b * ((gpx * w) @ gpx.T + (gpy * w) @ gpy.T) + c * me
        else:
            ae = me
        dofs = dofmap.elem_nodes[ei]
        rows.append(np.repeat(dofs, dofs.size))
        cols.append(np.tile(dofs, dofs.size))
        avals.append(ae.ravel())
        gv = np.asarray(g(x, y), dtype=float)
        if mode == "WEIGHTED_H1":
            rhs[dofs] += b * (gpx @ (w * gv[1]) + gpy @ (w * gv[2])) + c * (
                shape @ (w * gv[0])
            )
        else:
            rhs[dofs] += shape @ (w * gv)
    amat = sp.coo_matrix(
        (np.concatenate(avals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    touched = np.unique(dofmap.elem_nodes[reg].ravel())
    sub = SparseSystem(amat[touched][:, touched], rhs[touched], symmetric=True)
    out = np.zeros(n)
    out[touched] = solve_direct(sub)
    return out


def special_representatives_2d(problem: ProblemSpec2D, mesh: SblMesh2D, p: int,
                               dofmap: DofMap2D | None = None):
    """The pair (u_tilde, w_tilde): Gauss-Lobatto interpolants corrected on
    the needle elements by the linear-in-xi cutoff times the interface
    mismatch against the regional projections, and the projections
    themselves on the regular region.

    Returns a MixedDiscreteField carrying the representative pair."""
    exact = problem.exact
    if exact is None:
        raise ValueError("needs an exact solution with a decomposition")
    if not mesh.needle_applied:
        raise ValueError("representatives are defined on a needle mesh")
    dofmap = dofmap or build_dofmap(mesh, p)

    def w_sr(x, y):
        r = np.hypot(x, y)
        return exact.part_radial("w_s", r)

    def u_sr_with_grad(x, y):
        r = np.hypot(x, y)
        val = exact.part_radial("u_s", r)
        dr = exact.part_radial("u_s", r, 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            gx = np.where(r > 0, dr * x / np.where(r > 0, r, 1.0), 0.0)
            gy = np.where(r > 0, dr * y / np.where(r > 0, r, 1.0), 0.0)
        return val, gx, gy

    pi1 = project_regular(w_sr, mesh, p, "L2", dofmap=dofmap)
    pi2 = project_regular(
        u_sr_with_grad, mesh, p, "WEIGHTED_H1", b=problem.b, c=problem.c,
        dofmap=dofmap,
    )

    w_tilde = pi1.copy()
    u_tilde = pi2.copy()

    n1 = p + 1
    g = reference_nodes(p)
    for ei in range(mesh.n_boundary):
        el = mesh.elements[ei]
        if el.tag is not ElementTag.NEEDLE:
            raise ValueError("needle elements must be numbered first")
        nodes = dofmap.elem_nodes[ei].reshape(n1, n1)
        coords = dofmap.nodes[nodes.ravel()]
        x, y = coords[:, 0].reshape(n1, n1), coords[:, 1].reshape(n1, n1)
        wex = exact.w(x, y)
        uex = exact.u(x, y)
        mism_w = wex[-1, :] - pi1[nodes[-1, :]]
        mism_u = uex[-1, :] - pi2[nodes[-1, :]]
        w_tilde[nodes] = wex - np.outer(g, mism_w)
        u_tilde[nodes] = uex - np.outer(g, mism_u)
    u_tilde[dofmap.boundary] = 0.0
    return MixedDiscreteField(mesh, p, dofmap, u_tilde, w_tilde)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def _norm_rule(mesh: SblMesh2D, el: Element2D, p: int, eps: float):
    """Quadrature on [0,1]^2 for norm integration: ring-family elements are
    panelled radially at distances eps * 2^j from the boundary."""
    n_ang = p + 5
    ry = pb.gauss_rule(n_ang)
    gy, wy = 0.5 * (ry.points + 1.0), 0.5 * ry.weights
    if el.rho_offset is None:
        rx = pb.gauss_rule(p + 7)
        gx, wx = 0.5 * (rx.points + 1.0), 0.5 * rx.weights
    else:
        rho_lo = el.rho_offset
        rho_hi = el.rho_offset + el.rho_scale
        breaks = {rho_lo, rho_hi}
        d = eps
        while d < rho_hi:
            if rho_lo < d < rho_hi:
                breaks.add(d)
            d *= 2.0
        xi_breaks = (np.array(sorted(breaks)) - rho_lo) / el.rho_scale
        gx, wx = pb.composite_gauss(xi_breaks, max(14, p + 4))
    return gx, wx, gy, wy


class MixedFieldError:
    """Error pair (u - u_p, w - w_p) evaluated per element."""

    def __init__(self, exact, field: MixedDiscreteField):
        self.exact = exact
        self.field = field

    def eval_element(self, ei: int, xi, eta):
        el = self.field.mesh.elements[ei]
        xi = np.asarray(xi, dtype=float).ravel()
        eta = np.asarray(eta, dtype=float).ravel()
        x, y = el.map.point(xi, eta)
        eu = self.exact.u(x, y) - self.field.eval_element(ei, xi, eta, "u")
        ew = self.exact.w(x, y) - self.field.eval_element(ei, xi, eta, "w")
        gx, gy = self.exact.grad_u(x, y)
        fgx, fgy = self.field.eval_element_grad(ei, xi, eta, "u")
        return eu, gx - fgx, gy - fgy, ew


class MixedCallablePair:
    """Adapter for norms of a plain (u, w) pair given by callables
    u(x,y), grad_u(x,y) -> (gx, gy), w(x,y); the mesh only supplies the
    integration geometry."""

    def __init__(self, mesh: SblMesh2D, u, grad_u, w):
        self.mesh = mesh
        self.u, self.grad_u, self.w = u, grad_u, w

    def eval_element(self, ei: int, xi, eta):
        el = self.mesh.elements[ei]
        xi = np.asarray(xi, dtype=float).ravel()
        eta = np.asarray(eta, dtype=float).ravel()
        x, y = el.map.point(xi, eta)
        gx, gy = self.grad_u(x, y)
        return self.u(x, y), gx, gy, self.w(x, y)


def norms_2d(error, mesh: SblMesh2D, p: int, problem: ProblemSpec2D,
             meta: dict | None = None, elements=None, max_grid: int = 20):
    """Energy, balanced and companion norms of a mixed error pair.

    energy^2   = ||e_w||^2 + b||grad e_u||^2 + c||e_u||^2
    balanced^2 = ||e_w||^2/eps + b||grad e_u||^2 + c||e_u||^2

    `elements` restricts integration to a subset (used by the regional
    lemma checks); max norms use a max_grid x max_grid reference sample.
    """
    from .fem1d import NormReport

    eps, b, c = problem.eps, problem.b, problem.c
    int_w2 = int_gu2 = int_u2 = 0.0
    max_u = max_gu = 0.0
    gs = np.linspace(0.0, 1.0, max_grid)
    gix, gie = np.meshgrid(gs, gs, indexing="ij")
    idx = range(mesh.n_elements) if elements is None else elements
    for ei in idx:
        el = mesh.elements[ei]
        gx, wx, gy, wy = _norm_rule(mesh, el, p, eps)
        xi, eta = np.meshgrid(gx, gy, indexing="ij")
        xi, eta = xi.ravel(), eta.ravel()
        w2 = np.outer(wx, wy).ravel()
        det = el.det_j(xi, eta)
        w = w2 * det
        eu, egx, egy, ew = error.eval_element(ei, xi, eta)
        int_w2 += float(np.sum(w * ew * ew))
        int_gu2 += float(np.sum(w * (egx * egx + egy * egy)))
        int_u2 += float(np.sum(w * eu * eu))
        seu, segx, segy, _ = error.eval_element(ei, gix.ravel(), gie.ravel())
        max_u = max(max_u, float(np.max(np.abs(seu))))
        max_gu = max(max_gu, float(np.max(np.hypot(segx, segy))))
    energy = math.sqrt(int_w2 + b * int_gu2 + c * int_u2)
    balanced = math.sqrt(int_w2 / eps + b * int_gu2 + c * int_u2)
    return NormReport(
        energy=energy,
        balanced=balanced,
        l2=math.sqrt(int_u2),
        h1=math.sqrt(int_u2 + int_gu2),
        h2_seminorm=math.sqrt(int_w2) / eps,
        max=max_u,
        c1max=max(max_u, max_gu),
        meta=dict(meta or {}, eps=eps, problem=problem.name),
    )


def galerkin_residual_2d(problem: ProblemSpec2D, field: MixedDiscreteField) -> float:
    """Relative residual of A_eps((u - u_p, w - w_p), (psi, phi)) over the
    discrete test pairs, with the exact solution entered by quadrature."""
    exact = problem.exact
    if exact is None:
        raise ValueError("needs an exact solution")
    mesh, p, dofmap = field.mesh, field.p, field.dofmap
    eps, b, c = problem.eps, problem.b, problem.c
    n = dofmap.n_nodes
    phi_load = np.zeros(n)
    psi_load = np.zeros(n)
    for ei, el in enumerate(mesh.elements):
        gxp, wx, gyp, wy = _norm_rule(mesh, el, p, eps)
        xi, eta = np.meshgrid(gxp, gyp, indexing="ij")
        xi, eta = xi.ravel(), eta.ravel()
        w2 = np.outer(wx, wy).ravel()
        shape, dxi, deta = _tensor_tables(p, gxp, gyp)
        x, y = el.map.point(xi, eta)
        j11, j12, j21, j22 = el.map.jacobian(xi, eta)
        det = j11 * j22 - j12 * j21
        w = w2 * det
        gpx, gpy = _physical_grads(dxi, deta, j11, j12, j21, j22, det)
        ugx, ugy = exact.grad_u(x, y)
        wgx, wgy = exact.grad_w(x, y)
        uv = exact.u(x, y)
        wv = exact.w(x, y)
        dofs = dofmap.elem_nodes[ei]
        phi_load[dofs] += eps * (gpx @ (w * ugx) + gpy @ (w * ugy)) + shape @ (w * wv)
        psi_load[dofs] += (
            b * (gpx @ (w * ugx) + gpy @ (w * ugy))
            + c * (shape @ (w * uv))
            - eps * (gpx @ (w * wgx) + gpy @ (w * wgy))
        )
    system, _ = assemble_mixed(problem, mesh, p)
    interior = np.nonzero(~dofmap.boundary)[0]
    z = np.concatenate([field.u_coeffs[interior], field.w_coeffs])
    disc = system.matrix @ z
    cont = np.concatenate([phi_load, psi_load[interior]])
    scale = norms_2d(
        MixedCallablePair(mesh, exact.u, exact.grad_u, exact.w), mesh, p, problem
    ).energy
    row_norms = np.sqrt(np.array((system.matrix.multiply(system.matrix)).sum(axis=1)).ravel())
    denom = scale * np.maximum(row_norms, 1e-30)
    return float(np.max(np.abs(cont - disc) / denom))


def export_fields_csv(field: MixedDiscreteField, path: str, n_samples: int = 8):
    """Per-element tensor sample grid of (x, y, u, w) for external plotting."""
    gs = np.linspace(0.0, 1.0, n_samples)
    xi, eta = np.meshgrid(gs, gs, indexing="ij")
    xi, eta = xi.ravel(), eta.ravel()
    with open(path, "w") as fh:
        fh.write("element,x,y,u,w\n")
        for ei, el in enumerate(field.mesh.elements):
            x, y = el.map.point(xi, eta)
            u = field.eval_element(ei, xi, eta, "u")
            w = field.eval_element(ei, xi, eta, "w")
            for row in zip(x, y, u, w):
                fh.write(f"{ei}," + ",".join(f"{v:.12e}" for v in row) + "\n")
