"""Orthogonal polynomials, quadrature, and 1D reference-element bases.

Everything lives on the reference interval [-1, 1].  The two bases exported
here are the C^1 hierarchical basis (Hermite endpoint functions plus
double-zero bubbles) used by the fourth-order solver, and the Gauss-Lobatto
Lagrange basis used by the 2D mixed method.  All basis functions are stored
as Legendre coefficient rows, which keeps evaluation stable up to the
moderate degrees (p <= 16) this package targets.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg

NEWTON_TOL = 1e-15
NEWTON_MAXIT = 100


def legendre_eval(n: int, x):
    """Evaluate (P_n(x), P_n'(x)) by the three-term recurrence.

    Accepts scalars or arrays; n must be >= 0 and |x| <= 1.
    """
    if n < 0:
        raise ValueError(f"degree must be >= 0, got {n}")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-14):
        raise ValueError("evaluation point outside [-1, 1]")
    p_prev = np.ones_like(x)
    d_prev = np.zeros_like(x)
    if n == 0:
        return p_prev if p_prev.ndim else float(p_prev), d_prev if d_prev.ndim else float(d_prev)
    p_cur = x.copy()
    d_cur = np.ones_like(x)
    for k in range(2, n + 1):
        a = (2 * k - 1) / k
        b = (k - 1) / k
        p_next = a * x * p_cur - b * p_prev
        d_next = a * (p_cur + x * d_cur) - b * d_prev
        p_prev, p_cur = p_cur, p_next
        d_prev, d_cur = d_cur, d_next
    if p_cur.ndim == 0:
        return float(p_cur), float(d_cur)
    return p_cur, d_cur


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature rule on [-1, 1] with a stated polynomial exactness degree."""

    points: np.ndarray
    weights: np.ndarray
    order: int

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))

    @property
    def n(self) -> int:
        return self.points.size

    def mapped(self, a: float, b: float):
        """Points and weights transported to the physical interval (a, b)."""
        half = 0.5 * (b - a)
        return a + half * (self.points + 1.0), half * self.weights


def _legendre_second(n: int, x):
    """P_n''(x) from the ODE (1-x^2) P'' = 2x P' - n(n+1) P."""
    p, d = legendre_eval(n, x)
    return (2.0 * x * d - n * (n + 1) * p) / (1.0 - x * x)


@lru_cache(maxsize=None)
def gauss_rule(n: int) -> QuadratureRule:
    """Gauss-Legendre rule with n points, exact for degree 2n - 1.

    Nodes from Newton iteration seeded with Chebyshev points.
    """
    if n < 1:
        raise ValueError(f"need at least one point, got {n}")
    if n == 1:
        return QuadratureRule(np.zeros(1), np.full(1, 2.0), 1)
    i = np.arange(n)
    x = np.cos(np.pi * (4 * i + 3) / (4 * n + 2))
    for _ in range(NEWTON_MAXIT):
        p, d = legendre_eval(n, x)
        dx = p / d
        x = x - dx
        if np.max(np.abs(dx)) < NEWTON_TOL:
            break
    p, d = legendre_eval(n, x)
    w = 2.0 / ((1.0 - x * x) * d * d)
    idx = np.argsort(x)
    return QuadratureRule(x[idx], w[idx], 2 * n - 1)


@lru_cache(maxsize=None)
def gauss_lobatto_rule(n: int) -> QuadratureRule:
    """Gauss-Lobatto rule with n >= 2 points (endpoints included), exact
    for degree 2n - 3."""
    if n < 2:
        raise ValueError(f"Gauss-Lobatto needs >= 2 points, got {n}")
    if n == 2:
        return QuadratureRule(np.array([-1.0, 1.0]), np.array([1.0, 1.0]), 1)
    m = n - 1
    # interior nodes are the roots of P_{n-1}'
    i = np.arange(1, m)
    x = np.cos(np.pi * i / m)
    for _ in range(NEWTON_MAXIT):
        _, d = legendre_eval(m, x)
        d2 = _legendre_second(m, x)
        dx = d / d2
        x = x - dx
        if np.max(np.abs(dx)) < NEWTON_TOL:
            break
    x = np.concatenate([[-1.0], np.sort(x), [1.0]])
    p, _ = legendre_eval(m, x)
    w = 2.0 / (m * (m + 1) * p * p)
    return QuadratureRule(x, w, 2 * n - 3)


def gauss_lobatto_nodes(p: int) -> np.ndarray:
    """The p + 1 Gauss-Lobatto points on [-1, 1]."""
    if p < 1:
        raise ValueError(f"degree must be >= 1, got {p}")
    return gauss_lobatto_rule(p + 1).points.copy()


def composite_gauss(breakpoints, n: int):
    """Composite n-point Gauss rule over the given sorted breakpoints.

    Returns flat (points, weights) arrays covering [breakpoints[0],
    breakpoints[-1]].
    """
    breaks = np.asarray(breakpoints, dtype=float)
    rule = gauss_rule(n)
    pts, wts = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        x, w = rule.mapped(a, b)
        pts.append(x)
        wts.append(w)
    return np.concatenate(pts), np.concatenate(wts)


def _leg_inner(c1: np.ndarray, c2: np.ndarray) -> float:
    """L2(-1,1) inner product of two Legendre coefficient vectors."""
    m = min(c1.size, c2.size)
    k = np.arange(m)
    return float(np.sum(c1[:m] * c2[:m] * 2.0 / (2.0 * k + 1.0)))


def _pad(c: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(size)
    out[: c.size] = c
    return out


# Hermite endpoint shape functions on [-1, 1], monomial coefficients
# (constant first).  Ordering: value@-1, slope@-1, value@+1, slope@+1.
_HERMITE_MONO = np.array(
    [
        [2.0, -3.0, 0.0, 1.0],
        [1.0, -1.0, -1.0, 1.0],
        [2.0, 3.0, 0.0, -1.0],
        [-1.0, -1.0, 1.0, 1.0],
    ]
) / 4.0


class C1ReferenceBasis:
    """C^1 reference basis of degree p >= 3 on [-1, 1].

    Functions 0..3 are the Hermite endpoint functions (Kronecker on value
    and slope at -1 and +1); functions 4.. are p - 3 internal bubbles with
    double zeros at both endpoints, Gram-Schmidt orthogonalized in the H^2
    seminorm for conditioning of the eps^2 <w'', v''> block.
    """

    def __init__(self, p: int):
        if p < 3:
            raise ValueError(f"C^1 basis needs degree >= 3, got {p}")
        self.p = p
        self.n_funcs = p + 1
        self.n_bubbles = p - 3
        coeffs = np.zeros((p + 1, p + 1))
        for i in range(4):
            coeffs[i, :4] = npleg.poly2leg(_HERMITE_MONO[i])
        # (1 - t^2)^2 * P_j, then modified Gram-Schmidt in the H^2 seminorm
        wsq = npleg.legmul([2.0 / 3.0, 0.0, -2.0 / 3.0], [2.0 / 3.0, 0.0, -2.0 / 3.0])
        raw = []
        for j in range(self.n_bubbles):
            ej = np.zeros(j + 1)
            ej[j] = 1.0
            raw.append(_pad(npleg.legmul(wsq, ej), p + 1))
        ortho: list[np.ndarray] = []
        for b in raw:
            v = b.copy()
            for u in ortho:
                v -= _leg_inner(npleg.legder(v, 2), npleg.legder(u, 2)) * u
            nrm = np.sqrt(_leg_inner(npleg.legder(v, 2), npleg.legder(v, 2)))
            v /= nrm
            ortho.append(v)
        for j, v in enumerate(ortho):
            coeffs[4 + j] = v
        self.coeffs = coeffs
        self._dcoeffs = [coeffs]
        for _ in range(2):
            self._dcoeffs.append(
                np.stack([_pad(npleg.legder(c, 1), p + 1) for c in self._dcoeffs[-1]])
            )

    def eval_all(self, t, k: int = 0) -> np.ndarray:
        """k-th derivative of every basis function at t; shape (n_funcs,) + t.shape."""
        if not 0 <= k <= 2:
            raise ValueError(f"derivative order must be 0..2, got {k}")
        t = np.asarray(t, dtype=float)
        return np.stack([npleg.legval(t, c) for c in self._dcoeffs[k]])

    def expand(self, leg_coeffs: np.ndarray) -> np.ndarray:
        """Expansion coefficients of a polynomial (Legendre coeffs, degree <= p)
        in this basis.  The four endpoint data pin the Hermite part; the
        remainder is solved in the bubble span."""
        c = _pad(np.asarray(leg_coeffs, dtype=float), self.p + 1)
        d = _pad(npleg.legder(c, 1), self.p + 1)
        out = np.zeros(self.n_funcs)
        out[0] = npleg.legval(-1.0, c)
        out[1] = npleg.legval(-1.0, d)
        out[2] = npleg.legval(1.0, c)
        out[3] = npleg.legval(1.0, d)
        resid = c - self.coeffs[:4].T @ out[:4]
        if self.n_bubbles:
            sol, *_ = np.linalg.lstsq(self.coeffs[4:].T, resid, rcond=None)
            out[4:] = sol
        return out

    def gram_h2(self) -> np.ndarray:
        """Gram matrix in the full H^2(-1,1) inner product."""
        n = self.n_funcs
        g = np.zeros((n, n))
        for i in range(n):
            for j in range(i, n):
                s = sum(
                    _leg_inner(self._dcoeffs[k][i], self._dcoeffs[k][j]) for k in range(3)
                )
                g[i, j] = g[j, i] = s
        return g


class GaussLobattoBasis:
    """Lagrange cardinal basis on the p + 1 Gauss-Lobatto nodes."""

    def __init__(self, p: int):
        if p < 1:
            raise ValueError(f"degree must be >= 1, got {p}")
        self.p = p
        self.nodes = gauss_lobatto_nodes(p)
        vander = npleg.legvander(self.nodes, p)
        self.coeffs = np.linalg.solve(vander, np.eye(p + 1)).T
        self._dcoeffs = np.stack(
            [_pad(npleg.legder(c, 1), p + 1) for c in self.coeffs]
        )

    def eval_all(self, t, k: int = 0) -> np.ndarray:
        """k-th derivative (k = 0 or 1) of all cardinals at t."""
        t = np.asarray(t, dtype=float)
        if k == 0:
            table = self.coeffs
        elif k == 1:
            table = self._dcoeffs
        else:
            raise ValueError(f"derivative order must be 0 or 1, got {k}")
        return np.stack([npleg.legval(t, c) for c in table])

    def interpolate(self, values: np.ndarray):
        """Legendre coefficients of the interpolant through nodal values."""
        return self.coeffs.T @ np.asarray(values, dtype=float)


@lru_cache(maxsize=None)
def c1_basis(p: int) -> C1ReferenceBasis:
    return C1ReferenceBasis(p)


@lru_cache(maxsize=None)
def gauss_lobatto_basis(p: int) -> GaussLobattoBasis:
    return GaussLobattoBasis(p)
