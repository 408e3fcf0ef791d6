"""C^1 Galerkin discretization of eps^2 u'''' - (b u')' + c u = f on (0,1)
with clamped boundary conditions, plus every 1D norm the studies report.

Degrees of freedom follow the hierarchical layout: (value, slope) per mesh
node, then p - 3 internal bubbles per element; the four clamped boundary
DOFs are eliminated.  Quadrature is p + 3 Gauss points per element, raised
on LAYER elements so that integrands varying on the kappa*p scale of the
stretched boundary layer are still integrated to spectral accuracy.  Norm
integration subdivides each element into panels graded geometrically (at
distances eps * 2^j from the domain endpoints) for the same reason.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import polybasis as pb
from .linsolve import SparseSystem, solve_direct
from .meshing import Region1D, SblMesh1D, build_mesh_1d

COEFF_GRID = 1000
BC_TOL = 1e-12
DECOMP_TOL = 1e-10


@dataclass
class ExactSolution1D:
    """Exact solution with the smooth/layer/remainder decomposition.

    All entries are callables f(x, k=0) returning the k-th derivative;
    the solver needs k <= 2, the forcing construction k <= 4.
    """

    u: Callable
    smooth: Callable | None = None
    layer_left: Callable | None = None
    layer_right: Callable | None = None
    remainder: Callable | None = None

    @property
    def has_decomposition(self) -> bool:
        return all(
            f is not None
            for f in (self.smooth, self.layer_left, self.layer_right, self.remainder)
        )

    def bc_residual(self) -> float:
        ends = np.array([0.0, 1.0])
        return float(
            max(np.max(np.abs(self.u(ends, 0))), np.max(np.abs(self.u(ends, 1))))
        )

    def decomposition_residual(self, n: int = 200) -> float:
        if not self.has_decomposition:
            raise ValueError("no decomposition attached")
        x = np.linspace(0.0, 1.0, n)
        total = (
            self.smooth(x, 0)
            + self.layer_left(x, 0)
            + self.layer_right(x, 0)
            + self.remainder(x, 0)
        )
        return float(np.max(np.abs(total - self.u(x, 0))))


@dataclass
class ProblemSpec1D:
    """eps^2 u'''' - (b u')' + c u = f with clamped boundary conditions."""

    eps: float
    b: Callable
    c: Callable
    f: Callable
    exact: ExactSolution1D | None = None
    name: str = "custom"

    def __post_init__(self):
        if not 0.0 < self.eps <= 1.0:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        x = np.linspace(0.0, 1.0, COEFF_GRID)
        bmin = float(np.min(self.b(x)))
        cmin = float(np.min(self.c(x)))
        if bmin <= 0.0 or cmin <= 0.0:
            raise ValueError(
                f"coefficients must be strictly positive on [0,1]; "
                f"min b = {bmin:.3e}, min c = {cmin:.3e}"
            )
        if self.exact is not None:
            res = self.exact.bc_residual()
            if res > BC_TOL:
                raise ValueError(f"exact solution violates clamped BCs by {res:.3e}")
            if self.exact.has_decomposition:
                res = self.exact.decomposition_residual()
                if res > DECOMP_TOL:
                    raise ValueError(f"decomposition off by {res:.3e}")


@dataclass(frozen=True)
class DofMap1D:
    """Global C^1 DOF numbering: (value, slope) per node, then bubbles."""

    p: int
    n_elements: int

    @property
    def n_nodes(self) -> int:
        return self.n_elements + 1

    @property
    def n_bubbles(self) -> int:
        return self.p - 3

    @property
    def n_total(self) -> int:
        return 2 * self.n_nodes + self.n_elements * self.n_bubbles

    @property
    def clamped(self) -> tuple:
        last = 2 * self.n_elements
        return (0, 1, last, last + 1)

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(self.n_total, dtype=bool)
        mask[list(self.clamped)] = False
        return np.nonzero(mask)[0]

    def element_dofs(self, i: int) -> np.ndarray:
        ext = [2 * i, 2 * i + 1, 2 * (i + 1), 2 * (i + 1) + 1]
        base = 2 * self.n_nodes + i * self.n_bubbles
        return np.array(ext + list(range(base, base + self.n_bubbles)))


def _element_quadrature(mesh: SblMesh1D, i: int, p: int, extra: int = 3):
    """Assembly quadrature on element i: composite Gauss over panels graded
    toward the domain endpoints, so that forcing terms carrying exp(-x/eps)
    layers (and their tails inside the coarse element) are integrated to
    spectral accuracy.  Each panel gets p + extra points, enough for the
    polynomial part."""
    a, b = mesh.element(i)
    n = min(max(p + extra, math.ceil(1.2 * mesh.kappa * mesh.p) + 6), 64)
    breaks = layer_breakpoints(a, b, mesh.eps)
    return pb.composite_gauss(breaks, n)


def _dof_scaling(basis: pb.C1ReferenceBasis, h: float) -> np.ndarray:
    """Slope DOFs carry the physical slope, so their reference shapes are
    scaled by h/2."""
    s = np.ones(basis.n_funcs)
    s[1] = s[3] = 0.5 * h
    return s


def assemble_1d(problem: ProblemSpec1D, mesh: SblMesh1D, p: int):
    """Stiffness + load for the C^1 Galerkin method; returns
    (SparseSystem, DofMap1D) with the four clamped DOFs eliminated."""
    if p < 3:
        raise ValueError(f"the C^1 space needs p >= 3, got {p}")
    basis = pb.c1_basis(p)
    dofmap = DofMap1D(p, mesh.n_elements)
    n = dofmap.n_total
    eps2 = problem.eps**2

    rows, cols, vals = [], [], []
    rhs = np.zeros(n)
    for i in range(mesh.n_elements):
        a, bnd = mesh.element(i)
        h = bnd - a
        x, w = _element_quadrature(mesh, i, p)
        t = 2.0 * (x - a) / h - 1.0
        scale = _dof_scaling(basis, h)
        tables = [
            basis.eval_all(t, k) * (2.0 / h) ** k * scale[:, None] for k in range(3)
        ]
        bw = problem.b(x) * w
        cw = problem.c(x) * w
        elem = (
            eps2 * (tables[2] * w) @ tables[2].T
            + (tables[1] * bw) @ tables[1].T
            + (tables[0] * cw) @ tables[0].T
        )
        dofs = dofmap.element_dofs(i)
        rows.append(np.repeat(dofs, dofs.size))
        cols.append(np.tile(dofs, dofs.size))
        vals.append(elem.ravel())
        rhs[dofs] += tables[0] @ (problem.f(x) * w)

    full = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    free = dofmap.free
    system = SparseSystem(full[free][:, free], rhs[free], symmetric=True)
    return system, dofmap


@dataclass
class DiscreteField1D:
    """Piecewise-polynomial C^1 field: mesh + coefficient vector in the
    global DOF ordering (clamped entries included)."""

    mesh: SblMesh1D
    p: int
    coeffs: np.ndarray

    @property
    def dofmap(self) -> DofMap1D:
        return DofMap1D(self.p, self.mesh.n_elements)

    def eval(self, x, k: int = 0, side: str = "right"):
        """k-th derivative at x (vectorized); `side` picks the element when
        x sits exactly on an interior node."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        if np.any((x < -1e-12) | (x > 1.0 + 1e-12)):
            raise ValueError("evaluation point outside [0, 1]")
        basis = pb.c1_basis(self.p)
        dofmap = self.dofmap
        idx = np.searchsorted(self.mesh.nodes, x, side=side) - 1
        idx = np.clip(idx, 0, self.mesh.n_elements - 1)
        out = np.empty_like(x)
        for i in np.unique(idx):
            mask = idx == i
            a, b = self.mesh.element(int(i))
            h = b - a
            t = np.clip(2.0 * (x[mask] - a) / h - 1.0, -1.0, 1.0)
            local = self.coeffs[dofmap.element_dofs(int(i))] * _dof_scaling(basis, h)
            out[mask] = local @ basis.eval_all(t, k) * (2.0 / h) ** k
        return float(out[0]) if scalar else out

    def __call__(self, x, k: int = 0):
        return self.eval(x, k)

    def element_legendre(self, i: int) -> np.ndarray:
        """Legendre coefficients (reference coords) of the field on element i."""
        basis = pb.c1_basis(self.p)
        a, b = self.mesh.element(i)
        local = self.coeffs[self.dofmap.element_dofs(i)] * _dof_scaling(basis, b - a)
        return local @ basis.coeffs


def solve_1d(problem: ProblemSpec1D, kappa: float, p: int) -> DiscreteField1D:
    """Galerkin solution on the spectral boundary layer mesh."""
    mesh = build_mesh_1d(kappa, p, problem.eps)
    system, dofmap = assemble_1d(problem, mesh, p)
    x = solve_direct(system)
    coeffs = np.zeros(dofmap.n_total)
    coeffs[dofmap.free] = x
    return DiscreteField1D(mesh, p, coeffs)


def evaluate_field(field: DiscreteField1D, x, k: int = 0, side: str = "right"):
    """Point evaluation of a discrete field (see DiscreteField1D.eval)."""
    if k > 2:
        raise ValueError(f"derivative order must be <= 2, got {k}")
    return field.eval(x, k, side=side)


# ---------------------------------------------------------------------------
# errors and norms
# ---------------------------------------------------------------------------


class FieldError:
    """Pointwise error exact - discrete, evaluable as e(x, k)."""

    def __init__(self, exact: Callable, field: DiscreteField1D):
        self.exact = exact
        self.field = field

    def __call__(self, x, k: int = 0):
        return self.exact(x, k) - self.field.eval(x, k)


class CallablePair:
    """Adapter turning (w, w', w'') callables into the f(x, k) convention."""

    def __init__(self, f, df, d2f):
        self._fns = (f, df, d2f)

    def __call__(self, x, k: int = 0):
        return self._fns[k](x)


def layer_breakpoints(a: float, b: float, eps: float) -> np.ndarray:
    """Panel breakpoints in (a, b), graded geometrically at distances
    eps * 2^j from both domain endpoints 0 and 1."""
    pts = {a, b}
    d = eps
    while d < 0.5:
        for x in (d, 1.0 - d):
            if a < x < b:
                pts.add(x)
        d *= 2.0
    return np.array(sorted(pts))


@dataclass
class NormReport:
    """Errors of one run in every reported norm, with provenance."""

    energy: float
    balanced: float
    l2: float
    h1: float
    h2_seminorm: float
    max: float
    c1max: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        values = [self.energy, self.balanced, self.l2, self.h1,
                  self.h2_seminorm, self.max, self.c1max]
        if not all(np.isfinite(v) and v >= 0.0 for v in values):
            raise ValueError(f"norms must be finite and nonnegative: {values}")

    def to_json(self) -> str:
        return json.dumps({
            "energy": self.energy, "balanced": self.balanced, "l2": self.l2,
            "h1": self.h1, "h2_seminorm": self.h2_seminorm, "max": self.max,
            "c1max": self.c1max, "meta": self.meta,
        })


def norms_1d(error: Callable, mesh: SblMesh1D, problem: ProblemSpec1D,
             meta: dict | None = None, max_samples: int = 200) -> NormReport:
    """All norms of an error function e(x, k) over the mesh.

    The energy norm is sqrt(B_eps(e, e)); max norms use Chebyshev-distributed
    sampling (max_samples points per element) plus the panel breakpoints.
    """
    eps = problem.eps
    int_e2 = int_de2 = int_d2e2 = int_b_de2 = int_c_e2 = 0.0
    max_e = max_de = 0.0
    cheb = 0.5 * (1.0 - np.cos(np.linspace(0.0, np.pi, max_samples)))
    for i in range(mesh.n_elements):
        a, b = mesh.element(i)
        breaks = layer_breakpoints(a, b, mesh.eps)
        x, w = pb.composite_gauss(breaks, 20)
        e0 = error(x, 0)
        e1 = error(x, 1)
        e2 = error(x, 2)
        int_e2 += float(np.sum(w * e0 * e0))
        int_de2 += float(np.sum(w * e1 * e1))
        int_d2e2 += float(np.sum(w * e2 * e2))
        int_b_de2 += float(np.sum(w * problem.b(x) * e1 * e1))
        int_c_e2 += float(np.sum(w * problem.c(x) * e0 * e0))
        xs = np.unique(np.concatenate([a + (b - a) * cheb, breaks]))
        max_e = max(max_e, float(np.max(np.abs(error(xs, 0)))))
        max_de = max(max_de, float(np.max(np.abs(error(xs, 1)))))
    energy = math.sqrt(eps**2 * int_d2e2 + int_b_de2 + int_c_e2)
    balanced = math.sqrt(eps * int_d2e2 + int_de2 + int_e2)
    return NormReport(
        energy=energy,
        balanced=balanced,
        l2=math.sqrt(int_e2),
        h1=math.sqrt(int_e2 + int_de2),
        h2_seminorm=math.sqrt(int_d2e2),
        max=max_e,
        c1max=max(max_e, max_de),
        meta=dict(meta or {}, eps=eps, problem=problem.name),
    )


def energy_norm(error: Callable, mesh: SblMesh1D, problem: ProblemSpec1D) -> float:
    return norms_1d(error, mesh, problem).energy


def galerkin_residual(problem: ProblemSpec1D, fld: DiscreteField1D) -> float:
    """max_v |B_eps(u - u_p, v)| / (||u||_E ||v||_E) over the discrete basis,
    evaluated by quadrature with the exact solution."""
    if problem.exact is None:
        raise ValueError("needs an exact solution")
    mesh, p = fld.mesh, fld.p
    basis = pb.c1_basis(p)
    dofmap = DofMap1D(p, mesh.n_elements)
    eps2 = problem.eps**2
    u = problem.exact.u

    load = np.zeros(dofmap.n_total)
    diag = np.zeros(dofmap.n_total)
    system, _ = assemble_1d(problem, mesh, p)
    for i in range(mesh.n_elements):
        a, b = mesh.element(i)
        h = b - a
        breaks = layer_breakpoints(a, b, mesh.eps)
        x, w = pb.composite_gauss(breaks, max(20, p + 4))
        t = 2.0 * (x - a) / h - 1.0
        scale = _dof_scaling(basis, h)
        tabs = [basis.eval_all(t, k) * (2.0 / h) ** k * scale[:, None] for k in range(3)]
        dofs = dofmap.element_dofs(i)
        load[dofs] += (
            eps2 * tabs[2] @ (w * u(x, 2))
            + tabs[1] @ (w * problem.b(x) * u(x, 1))
            + tabs[0] @ (w * problem.c(x) * u(x, 0))
        )
        elem = (
            eps2 * (tabs[2] * w) @ tabs[2].T
            + (tabs[1] * (problem.b(x) * w)) @ tabs[1].T
            + (tabs[0] * (problem.c(x) * w)) @ tabs[0].T
        )
        diag[dofs] += np.diag(elem)

    free = dofmap.free
    resid = load[free] - system.matrix @ fld.coeffs[free]
    zero = DiscreteField1D(mesh, p, np.zeros(dofmap.n_total))
    u_energy = norms_1d(FieldError(u, zero), mesh, problem).energy
    scale = u_energy * np.sqrt(np.maximum(diag[free], 1e-300))
    return float(np.max(np.abs(resid) / scale))
