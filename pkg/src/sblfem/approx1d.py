"""Executable versions of the 1D analysis constructions.

The interpolant matches value and slope at the mesh nodes and realizes the
orthogonality of its second derivative to P_{p-2} by construction: on each
element the interpolant's second derivative *is* the degree-(p-2) Legendre
truncation of w'', integrated twice from the left endpoint.  Matching at
the right endpoint then holds automatically (take q = 1 and q = x in the
orthogonality conditions and integrate by parts).

Also here: the weighted-H^1 projection of the smooth part onto global
polynomials, the cubic correctors that glue interpolant and projection into
a C^1 field, and the Markov/reference-interval inequality checks used by
the verification suites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from numpy.polynomial import legendre as npleg

from . import polybasis as pb
from .fem1d import DiscreteField1D, DofMap1D, _dof_scaling
from .meshing import SblMesh1D, Region1D


def _pad(c: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(size)
    out[: c.size] = c
    return out


def _as_c2(w) -> Callable:
    """Normalize a function to the f(x, k) convention.

    Accepts an f(x, k) callable, a (f, df, d2f) tuple, or a bare callable
    (derivatives by 5-point central differences, step scaled to the
    element width by the caller)."""
    if isinstance(w, tuple):
        return lambda x, k=0: w[k](x)
    try:
        np.asarray(w(np.array([0.25, 0.5]), 0), dtype=float)
        return w
    except TypeError:
        pass

    def fd(x, k=0, h=1e-5):
        x = np.asarray(x, dtype=float)
        if k == 0:
            return w(x)
        stencil = {
            1: ((-2, 1 / 12), (-1, -2 / 3), (1, 2 / 3), (2, -1 / 12)),
            2: ((-2, -1 / 12), (-1, 4 / 3), (0, -5 / 2), (1, 4 / 3), (2, -1 / 12)),
        }[k]
        return sum(c * w(x + j * h) for j, c in stencil) / h**k

    return fd


def _interp_quadrature(mesh: SblMesh1D, i: int, p: int):
    """Panelled Gauss rule for the w'' moments: graded toward the domain
    endpoints so layer content (and its tail in the coarse element) is
    resolved; p + 6 points per panel as the base count."""
    from .fem1d import layer_breakpoints

    a, b = mesh.element(i)
    n = min(max(p + 6, math.ceil(1.2 * mesh.kappa * mesh.p) + 8), 64)
    return pb.composite_gauss(layer_breakpoints(a, b, mesh.eps), n)


def interpolate_c1(w, mesh: SblMesh1D, p: int) -> DiscreteField1D:
    """C^1 interpolant: nodal value/slope matching plus Legendre truncation
    of w'' on each element.

    `w` follows the f(x, k) convention (or is adapted, see _as_c2); w'' is
    integrated against Legendre polynomials with p + 6 Gauss points,
    boosted on layer elements.
    """
    if p < 3:
        raise ValueError(f"interpolant needs p >= 3, got {p}")
    fn = _as_c2(w)
    basis = pb.c1_basis(p)
    dofmap = DofMap1D(p, mesh.n_elements)
    coeffs = np.zeros(dofmap.n_total)
    for i in range(mesh.n_elements):
        a, b = mesh.element(i)
        h = b - a
        rule = pb.gauss_rule(_quad_count(mesh, i, p))
        x, wq = rule.mapped(a, b)
        t = 2.0 * (x - a) / h - 1.0
        # Legendre coefficients (degree <= p-2) of the reference second
        # derivative (h/2)^2 w''(x(t))
        d2 = fn(x, 2) * (0.5 * h) ** 2
        k = np.arange(p - 1)
        vander = npleg.legvander(t, p - 2).T
        proj = (vander @ (wq * d2)) * (2.0 * k + 1.0) / h
        # integrate twice; fix constants by value/slope at the left node
        first = npleg.legint(proj, 1)
        first[0] += float(fn(a, 1)) * 0.5 * h - npleg.legval(-1.0, first)
        second = npleg.legint(first, 1)
        second[0] += float(fn(a, 0)) - npleg.legval(-1.0, second)
        local = basis.expand(_pad(second, p + 1))
        scale = _dof_scaling(basis, h)
        dofs = dofmap.element_dofs(i)
        coeffs[dofs] = local / scale
    return DiscreteField1D(mesh, p, coeffs)


class SmoothProjection:
    """Degree-p polynomial projection with endpoint interpolation.

    Solves B0(u_Sp - u_S, v) = 0 for all v in P_p vanishing at 0 and 1,
    with B0(w, v) = <b w', v'> + <c w, v> on (0, 1), and u_Sp = u_S at the
    endpoints.  Evaluable as proj(x, k)."""

    def __init__(self, series: npleg.Legendre):
        self.series = series

    def __call__(self, x, k: int = 0):
        s = self.series.deriv(k) if k else self.series
        return s(np.asarray(x, dtype=float))


def project_smooth(u_s, b, c, p: int, n_quad: int | None = None) -> SmoothProjection:
    """Weighted-H^1 projection of the smooth part onto P_p on (0, 1)."""
    if p < 3:
        raise ValueError(f"projection needs p >= 3, got {p}")
    fn = _as_c2(u_s)
    n = n_quad or (2 * p + 24)
    rule = pb.gauss_rule(n)
    x, w = rule.mapped(0.0, 1.0)
    bx, cx = b(x), c(x)

    # interior basis: x(1-x) * P_j(2x - 1), j = 0..p-2, plus the linear lift
    m = p - 1
    t = 2.0 * x - 1.0
    bubble = x * (1.0 - x)
    dbubble = 1.0 - 2.0 * x
    pj = np.stack([npleg.legval(t, np.eye(m)[j]) for j in range(m)])
    dpj = np.stack(
        [npleg.legval(t, _pad(npleg.legder(np.eye(m)[j], 1), m)) for j in range(m)]
    )
    phi = bubble * pj
    dphi = dbubble * pj + 2.0 * bubble * dpj

    u0, u1 = float(fn(0.0, 0)), float(fn(1.0, 0))
    lift = u0 + (u1 - u0) * x
    dlift = (u1 - u0) * np.ones_like(x)

    gram = (dphi * (bx * w)) @ dphi.T + (phi * (cx * w)) @ phi.T
    rhs = dphi @ (bx * w * (fn(x, 1) - dlift)) + phi @ (cx * w * (fn(x, 0) - lift))
    sol = np.linalg.solve(gram, rhs)

    # assemble the Legendre series of lift + sum_j sol_j phi_j on [0, 1];
    # x(1-x) = (1 - t^2)/4 = P0/6 - P2/6 in t = 2x - 1
    series = npleg.Legendre([u0 + 0.5 * (u1 - u0), 0.5 * (u1 - u0)], domain=[0.0, 1.0])
    bub = np.array([1.0 / 6.0, 0.0, -1.0 / 6.0])
    for j in range(m):
        ej = np.zeros(j + 1)
        ej[j] = 1.0
        series = series + sol[j] * npleg.Legendre(npleg.legmul(bub, ej), domain=[0.0, 1.0])
    return SmoothProjection(series)


class CorrectorKind(Enum):
    CHI0 = "CHI0"
    CHI1 = "CHI1"


@dataclass(frozen=True)
class Corrector:
    """Cubic glue function on (0, tau).

    CHI0: chi(0) = chi'(0) = chi(tau) = 0, chi'(tau) = 1.
    CHI1: chi(0) = chi'(0) = chi'(tau) = 0, chi(tau) = 1.
    """

    tau: float
    kind: CorrectorKind
    coeffs: np.ndarray  # monomial coefficients, constant first

    def __call__(self, x, k: int = 0):
        x = np.asarray(x, dtype=float)
        c = np.polynomial.polynomial.polyder(self.coeffs, k) if k else self.coeffs
        return np.polynomial.polynomial.polyval(x, c)

    def seminorm(self, k: int) -> float:
        """|chi|_{k,(0,tau)} by exact Gauss quadrature."""
        rule = pb.gauss_rule(6)
        x, w = rule.mapped(0.0, self.tau)
        v = self(x, k)
        return float(np.sqrt(np.sum(w * v * v)))


def corrector(tau: float, kind: CorrectorKind) -> Corrector:
    """chi0(x) = x^2 (x - tau)/tau^2;  chi1(x) = 3(x/tau)^2 - 2(x/tau)^3."""
    if tau <= 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    if kind is CorrectorKind.CHI0:
        coeffs = np.array([0.0, 0.0, -1.0 / tau, 1.0 / tau**2])
    elif kind is CorrectorKind.CHI1:
        coeffs = np.array([0.0, 0.0, 3.0 / tau**2, -2.0 / tau**3])
    else:
        raise ValueError(f"unknown corrector kind {kind}")
    return Corrector(tau, kind, coeffs)


def _mono_to_ref_legendre(coeffs: np.ndarray, a: float, b: float, size: int) -> np.ndarray:
    """Legendre coefficients on the reference interval of a physical-space
    monomial polynomial restricted to (a, b)."""
    # x = (a+b)/2 + t (b-a)/2
    shift = np.array([0.5 * (a + b), 0.5 * (b - a)])
    comp = np.polynomial.polynomial.Polynomial(coeffs)(
        np.polynomial.polynomial.Polynomial(shift)
    )
    return _pad(npleg.poly2leg(comp.coef), size)


def special_representative(problem, kappa: float, p: int) -> DiscreteField1D:
    """The C^1 field built from I_p u in the layer regions, the smooth
    projection in the coarse region, and cubic corrector glue at tau and
    1 - tau."""
    from .meshing import build_mesh_1d

    exact = problem.exact
    if exact is None or not exact.has_decomposition:
        raise ValueError("needs an exact solution with a full decomposition")
    mesh = build_mesh_1d(kappa, p, problem.eps)
    if mesh.tau >= 1.0 / 3.0:
        raise ValueError("layer branch needs kappa*p*eps < 1/3")
    tau = mesh.tau
    basis = pb.c1_basis(p)
    dofmap = DofMap1D(p, mesh.n_elements)

    interp = interpolate_c1(exact.u, mesh, p)
    proj = project_smooth(exact.smooth, problem.b, problem.c, p)

    chi0 = corrector(tau, CorrectorKind.CHI0)
    chi1 = corrector(tau, CorrectorKind.CHI1)

    coeffs = np.zeros(dofmap.n_total)
    size = p + 1

    # element 0: I_p u + chi0 * (u_Sp - u)'(tau) + chi1 * (u_Sp - u)(tau)
    d_mis = float(proj(tau, 1) - exact.u(tau, 1))
    v_mis = float(proj(tau, 0) - exact.u(tau, 0))
    ser = interp.element_legendre(0).copy()
    ser += d_mis * _mono_to_ref_legendre(chi0.coeffs, 0.0, tau, size)
    ser += v_mis * _mono_to_ref_legendre(chi1.coeffs, 0.0, tau, size)
    _write_element(coeffs, dofmap, basis, mesh, 0, ser)

    # element 1: u_Sp restricted
    a, b = mesh.element(1)
    t_nodes = pb.gauss_lobatto_nodes(p)
    x_nodes = a + 0.5 * (b - a) * (t_nodes + 1.0)
    vals = proj(x_nodes, 0)
    glb = pb.gauss_lobatto_basis(p)
    _write_element(coeffs, dofmap, basis, mesh, 1, glb.interpolate(vals))

    # element 2: mirrored layer branch
    d_mis_r = float(proj(1.0 - tau, 1) - exact.u(1.0 - tau, 1))
    v_mis_r = float(proj(1.0 - tau, 0) - exact.u(1.0 - tau, 0))
    ser = interp.element_legendre(2).copy()
    # chi0(1-x), chi1(1-x) as polynomials in x on (1-tau, 1)
    mirror0 = _compose_mirror(chi0.coeffs)
    mirror1 = _compose_mirror(chi1.coeffs)
    ser += -d_mis_r * _mono_to_ref_legendre(mirror0, 1.0 - tau, 1.0, size)
    ser += v_mis_r * _mono_to_ref_legendre(mirror1, 1.0 - tau, 1.0, size)
    _write_element(coeffs, dofmap, basis, mesh, 2, ser)

    return DiscreteField1D(mesh, p, coeffs)


def _compose_mirror(coeffs: np.ndarray) -> np.ndarray:
    """Monomial coefficients of q(1 - x) given those of q(x)."""
    comp = np.polynomial.polynomial.Polynomial(coeffs)(
        np.polynomial.polynomial.Polynomial([1.0, -1.0])
    )
    return comp.coef


def _write_element(coeffs, dofmap, basis, mesh, i, series):
    a, b = mesh.element(i)
    local = basis.expand(_pad(series, basis.p + 1))
    coeffs[dofmap.element_dofs(i)] = local / _dof_scaling(basis, b - a)


# ---------------------------------------------------------------------------
# inequality diagnostics
# ---------------------------------------------------------------------------


def check_inverse_inequality(coeffs: np.ndarray, interval, k: int) -> float:
    """Markov-type ratio |q|_{k,D} / (p^{2k} |D|^{-k} ||q||_{0,D}) for a
    polynomial q given by monomial coefficients on D = (a, b)."""
    a, b = interval
    coeffs = np.asarray(coeffs, dtype=float)
    p = coeffs.size - 1
    if k > p:
        raise ValueError(f"derivative order {k} exceeds degree {p}")
    rule = pb.gauss_rule(p + 2)
    x, w = rule.mapped(a, b)
    q0 = np.polynomial.polynomial.polyval(x, coeffs)
    l2 = math.sqrt(float(np.sum(w * q0 * q0)))
    dk = np.polynomial.polynomial.polyval(x, np.polynomial.polynomial.polyder(coeffs, k))
    semi = math.sqrt(float(np.sum(w * dk * dk)))
    if semi == 0.0:
        return 0.0
    scale = float(p) ** (2 * k) * (b - a) ** (-k)
    return semi / (scale * l2)


def markov_ratio_sweep(p: int, k: int, interval=(0.0, 1.0), n_random: int = 1000,
                       seed: int = 0) -> float:
    """Max Markov ratio over random degree-p polynomials (Legendre-coefficient
    normal ensemble)."""
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_random):
        leg = rng.standard_normal(p + 1)
        mono = npleg.leg2poly(leg)
        best = max(best, check_inverse_inequality(mono, interval, k))
    return best


def reference_interval_interp_check(v, p: int, c_v: float, bigk: float, h: float,
                                    n_quad: int | None = None):
    """(||v - I_p v||_{2, (-1,1)}, C_v K^(1/2) h) for the endpoint-matching
    interpolant on the reference interval.

    `v` follows the f(x, k) convention; the caller certifies the derivative
    bounds that make the second entry the lemma's scaling."""
    fn = _as_c2(v)
    n = n_quad or max(p + 8, int(2.0 * bigk * h) + 12)
    rule = pb.gauss_rule(min(n, 260))
    t, w = rule.points, rule.weights
    k = np.arange(p - 1)
    vander = npleg.legvander(t, p - 2).T
    proj = (vander @ (w * fn(t, 2))) * (2.0 * k + 1.0) / 2.0
    first = npleg.legint(proj, 1)
    first[0] += float(fn(-1.0, 1)) - npleg.legval(-1.0, first)
    second = npleg.legint(first, 1)
    second[0] += float(fn(-1.0, 0)) - npleg.legval(-1.0, second)

    err2 = 0.0
    for kk, ser in enumerate((second, first, proj)):
        diff = fn(t, kk) - npleg.legval(t, ser)
        err2 += float(np.sum(w * diff * diff))
    return math.sqrt(err2), c_v * math.sqrt(bigk) * h
