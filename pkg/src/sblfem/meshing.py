"""Spectral boundary layer meshes: the 1D three-element mesh and the 2D
unit-disk mesh with needle elements.

The disk mesh is built from a fixed asymptotic layout (a k x k central
grid, n_sectors transfinite blended quads, n_sectors annular ring sectors
with k = n_sectors / 4) and, when kappa * p * eps < 1/2, each ring sector
is split at reference coordinate xi = kappa * p * eps into a thin needle
element hugging the boundary and a regular remainder.  Ring-family maps are
polar, so the distance to the boundary is affine in the reference xi
coordinate; that fact is recorded per element and drives the layer-aware
quadrature used by the norm evaluators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .polybasis import gauss_rule

TAU_CAP = 1.0 / 3.0


class Region1D(Enum):
    LAYER = "LAYER"
    COARSE = "COARSE"


@dataclass(frozen=True)
class SblMesh1D:
    """Three-element mesh {0, tau, 1-tau, 1} with tau = min(kappa*p*eps, 1/3)."""

    nodes: np.ndarray
    tau: float
    kappa: float
    p: int
    eps: float
    tags: tuple

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    def element(self, i: int):
        return float(self.nodes[i]), float(self.nodes[i + 1])

    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    def element_of(self, x: float) -> int:
        """Index of the element containing x (right-continuous at nodes)."""
        i = int(np.searchsorted(self.nodes, x, side="right")) - 1
        return min(max(i, 0), self.n_elements - 1)

    def to_json(self) -> dict:
        return {
            "dimension": 1,
            "nodes": self.nodes.tolist(),
            "tau": self.tau,
            "kappa": self.kappa,
            "p": self.p,
            "eps": self.eps,
            "tags": [t.value for t in self.tags],
        }


def build_mesh_1d(kappa: float, p: int, eps: float) -> SblMesh1D:
    """Spectral boundary layer mesh on (0, 1).

    In the asymptotic range (kappa*p*eps >= 1/3) the mesh degenerates to
    three equal COARSE elements; otherwise the outer elements of width tau
    are tagged LAYER.
    """
    if not eps > 0.0 or eps > 1.0:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if kappa <= 0.0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    tau = min(kappa * p * eps, TAU_CAP)
    nodes = np.array([0.0, tau, 1.0 - tau, 1.0])
    if tau >= TAU_CAP:
        tags = (Region1D.COARSE,) * 3
    else:
        tags = (Region1D.LAYER, Region1D.COARSE, Region1D.LAYER)
    return SblMesh1D(nodes, tau, kappa, p, eps, tags)


# ---------------------------------------------------------------------------
# 2D disk mesh
# ---------------------------------------------------------------------------


class ElementTag(Enum):
    NEEDLE = "NEEDLE"
    REGULAR_SPLIT = "REGULAR_SPLIT"
    ASYMPTOTIC = "ASYMPTOTIC"


class _Line:
    def __init__(self, p0, p1):
        self.p0 = np.asarray(p0, dtype=float)
        self.p1 = np.asarray(p1, dtype=float)

    def point(self, s):
        s = np.asarray(s, dtype=float)
        return (
            self.p0[0] + s * (self.p1[0] - self.p0[0]),
            self.p0[1] + s * (self.p1[1] - self.p0[1]),
        )

    def tangent(self, s):
        s = np.asarray(s, dtype=float)
        one = np.ones_like(s)
        return (self.p1[0] - self.p0[0]) * one, (self.p1[1] - self.p0[1]) * one

    def describe(self):
        return {"kind": "line", "p0": self.p0.tolist(), "p1": self.p1.tolist()}


class _Arc:
    """Circular arc of radius r, angle linear in the parameter."""

    def __init__(self, r, theta0, theta1):
        self.r = float(r)
        self.theta0 = float(theta0)
        self.theta1 = float(theta1)

    def point(self, s):
        th = self.theta0 + np.asarray(s, dtype=float) * (self.theta1 - self.theta0)
        return self.r * np.cos(th), self.r * np.sin(th)

    def tangent(self, s):
        th = self.theta0 + np.asarray(s, dtype=float) * (self.theta1 - self.theta0)
        dth = self.theta1 - self.theta0
        return -self.r * dth * np.sin(th), self.r * dth * np.cos(th)

    def describe(self):
        return {"kind": "arc", "r": self.r, "theta0": self.theta0, "theta1": self.theta1}


class RectMap:
    """Affine map onto an axis-aligned rectangle."""

    def __init__(self, x0, x1, y0, y1):
        self.x0, self.x1, self.y0, self.y1 = map(float, (x0, x1, y0, y1))

    def point(self, xi, eta):
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        return self.x0 + xi * (self.x1 - self.x0), self.y0 + eta * (self.y1 - self.y0)

    def jacobian(self, xi, eta):
        xi = np.asarray(xi, dtype=float)
        one = np.ones(np.broadcast(xi, eta).shape)
        z = np.zeros_like(one)
        return (self.x1 - self.x0) * one, z, z.copy(), (self.y1 - self.y0) * one

    def describe(self):
        return {"family": "rect", "x": [self.x0, self.x1], "y": [self.y0, self.y1]}


class PolarRingMap:
    """Annular sector: r = 1 - rho0 * xi, theta = theta_hi - dtheta * eta.

    The xi = 0 edge lies on the unit circle; theta decreases with eta so the
    Jacobian determinant is positive.
    """

    def __init__(self, rho0, theta_lo, theta_hi):
        self.rho0 = float(rho0)
        self.theta_lo = float(theta_lo)
        self.theta_hi = float(theta_hi)

    def point(self, xi, eta):
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        r = 1.0 - self.rho0 * xi
        th = self.theta_hi - (self.theta_hi - self.theta_lo) * eta
        return r * np.cos(th), r * np.sin(th)

    def jacobian(self, xi, eta):
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        r = 1.0 - self.rho0 * xi
        dth = -(self.theta_hi - self.theta_lo)
        th = self.theta_hi + dth * eta
        c, s = np.cos(th), np.sin(th)
        return -self.rho0 * c, -r * dth * s, -self.rho0 * s, r * dth * c

    def describe(self):
        return {
            "family": "polar_ring",
            "rho0": self.rho0,
            "theta": [self.theta_lo, self.theta_hi],
        }


class TransfiniteMap:
    """Gordon-Hall blend of four boundary curves.

    Curves are assigned to the reference edges xi=0, xi=1, eta=0, eta=1,
    each parametrized over [0, 1] by the coordinate running along it.
    """

    def __init__(self, xi0, xi1, eta0, eta1):
        self.xi0, self.xi1, self.eta0, self.eta1 = xi0, xi1, eta0, eta1
        c = self.corners = {
            (0, 0): np.array(eta0.point(0.0)),
            (1, 0): np.array(eta0.point(1.0)),
            (0, 1): np.array(eta1.point(0.0)),
            (1, 1): np.array(eta1.point(1.0)),
        }
        for (i, j), ref in (
            ((0, 0), xi0.point(0.0)),
            ((0, 1), xi0.point(1.0)),
            ((1, 0), xi1.point(0.0)),
            ((1, 1), xi1.point(1.0)),
        ):
            if not np.allclose(c[(i, j)], ref, atol=1e-12):
                raise ValueError("transfinite edge curves do not meet at corners")

    def point(self, xi, eta):
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        out = []
        for d in range(2):
            l = self.xi0.point(eta)[d]
            r = self.xi1.point(eta)[d]
            b = self.eta0.point(xi)[d]
            t = self.eta1.point(xi)[d]
            c = self.corners
            bil = (
                (1 - xi) * (1 - eta) * c[(0, 0)][d]
                + xi * (1 - eta) * c[(1, 0)][d]
                + (1 - xi) * eta * c[(0, 1)][d]
                + xi * eta * c[(1, 1)][d]
            )
            out.append((1 - xi) * l + xi * r + (1 - eta) * b + eta * t - bil)
        return out[0], out[1]

    def jacobian(self, xi, eta):
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        c = self.corners
        jac = []
        for d in range(2):
            l = self.xi0.point(eta)[d]
            r = self.xi1.point(eta)[d]
            db = self.eta0.tangent(xi)[d]
            dt = self.eta1.tangent(xi)[d]
            dxi = (
                r
                - l
                + (1 - eta) * db
                + eta * dt
                - (
                    -(1 - eta) * c[(0, 0)][d]
                    + (1 - eta) * c[(1, 0)][d]
                    - eta * c[(0, 1)][d]
                    + eta * c[(1, 1)][d]
                )
            )
            dl = self.xi0.tangent(eta)[d]
            dr = self.xi1.tangent(eta)[d]
            b = self.eta0.point(xi)[d]
            t = self.eta1.point(xi)[d]
            deta = (
                (1 - xi) * dl
                + xi * dr
                + t
                - b
                - (
                    -(1 - xi) * c[(0, 0)][d]
                    - xi * c[(1, 0)][d]
                    + (1 - xi) * c[(0, 1)][d]
                    + xi * c[(1, 1)][d]
                )
            )
            jac.append((dxi, deta))
        return jac[0][0], jac[0][1], jac[1][0], jac[1][1]

    def describe(self):
        return {
            "family": "transfinite",
            "xi0": self.xi0.describe(),
            "xi1": self.xi1.describe(),
            "eta0": self.eta0.describe(),
            "eta1": self.eta1.describe(),
        }


class XiAffineMap:
    """Parent map composed with (xi, eta) -> (a + b*xi, eta); realizes the
    needle/regular split of a boundary element."""

    def __init__(self, parent, a: float, b: float):
        self.parent = parent
        self.a = float(a)
        self.b = float(b)

    def point(self, xi, eta):
        xi = np.asarray(xi, dtype=float)
        return self.parent.point(self.a + self.b * xi, eta)

    def jacobian(self, xi, eta):
        xi = np.asarray(xi, dtype=float)
        j11, j12, j21, j22 = self.parent.jacobian(self.a + self.b * xi, eta)
        return self.b * j11, j12, self.b * j21, j22

    def describe(self):
        return {
            "family": "xi_affine",
            "a": self.a,
            "b": self.b,
            "parent": self.parent.describe(),
        }


@dataclass
class Element2D:
    """One curvilinear quadrilateral with its reference-to-physical map."""

    map: object
    tag: ElementTag
    boundary_edge: str | None = None
    # distance to the domain boundary along xi: rho(xi) = rho_offset + rho_scale*xi
    # (ring-family elements only; None for inner elements)
    rho_offset: float | None = None
    rho_scale: float | None = None
    parent_index: int | None = None

    def det_j(self, xi, eta):
        j11, j12, j21, j22 = self.map.jacobian(xi, eta)
        return j11 * j22 - j12 * j21

    def edge_curve(self, edge: str, s):
        """Physical points along a reference edge, s in [0, 1]."""
        s = np.asarray(s, dtype=float)
        z = np.zeros_like(s)
        o = np.ones_like(s)
        if edge == "xi0":
            return self.map.point(z, s)
        if edge == "xi1":
            return self.map.point(o, s)
        if edge == "eta0":
            return self.map.point(s, z)
        if edge == "eta1":
            return self.map.point(s, o)
        raise ValueError(f"unknown edge {edge!r}")


# CCW traversal of the reference square: (edge, reversed_parameter)
CCW_EDGES = (("eta0", False), ("xi1", False), ("eta1", True), ("xi0", True))


@dataclass
class SblMesh2D:
    """Disk mesh; boundary elements come first in the element list."""

    elements: list
    n_asymptotic: int
    n_boundary: int
    rho0: float
    n_sectors: int
    needle_applied: bool = False
    kappa: float | None = None
    p: int | None = None
    eps: float | None = None

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def area(self, n_quad: int = 16) -> float:
        rule = gauss_rule(n_quad)
        x01 = 0.5 * (rule.points + 1.0)
        w01 = 0.5 * rule.weights
        xi, eta = np.meshgrid(x01, x01, indexing="ij")
        w2 = np.outer(w01, w01)
        total = 0.0
        for el in self.elements:
            total += float(np.sum(np.abs(el.det_j(xi, eta)) * w2))
        return total

    def to_json(self) -> dict:
        return {
            "dimension": 2,
            "rho0": self.rho0,
            "n_sectors": self.n_sectors,
            "n_asymptotic": self.n_asymptotic,
            "n_boundary": self.n_boundary,
            "needle_applied": self.needle_applied,
            "kappa": self.kappa,
            "p": self.p,
            "eps": self.eps,
            "elements": [
                {
                    "tag": el.tag.value,
                    "boundary_edge": el.boundary_edge,
                    "map": el.map.describe(),
                }
                for el in self.elements
            ],
        }


def build_asymptotic_mesh_disk(rho0: float, n_sectors: int) -> SblMesh2D:
    """Fixed asymptotic mesh of the unit disk.

    Inner disk of radius 1 - rho0: k x k central grid plus n_sectors
    Gordon-Hall quads blending square chords onto the inner circle
    (k = n_sectors / 4).  Outer ring: n_sectors polar sectors whose xi = 0
    edge lies on the unit circle.  Ring elements are numbered first.
    """
    if not 0.0 < rho0 < 1.0:
        raise ValueError(f"ring thickness must lie in (0, 1), got {rho0}")
    if n_sectors < 4 or n_sectors % 4 != 0:
        raise ValueError(
            f"n_sectors must be a positive multiple of 4 for a conforming "
            f"layout, got {n_sectors}"
        )
    k = n_sectors // 4
    r_in = 1.0 - rho0
    d = 0.5 * r_in

    dtheta = 2.0 * np.pi / n_sectors
    theta_start = -np.pi / 4.0
    sector_theta = theta_start + dtheta * np.arange(n_sectors + 1)

    elements: list[Element2D] = []
    for s in range(n_sectors):
        elements.append(
            Element2D(
                map=PolarRingMap(rho0, sector_theta[s], sector_theta[s + 1]),
                tag=ElementTag.ASYMPTOTIC,
                boundary_edge="xi0",
                rho_offset=0.0,
                rho_scale=rho0,
            )
        )

    # square boundary corners in CCW order starting at angle -pi/4
    corners = d * np.array([[1.0, -1.0], [1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0]])
    for f in range(4):
        c0, c1 = corners[f], corners[(f + 1) % 4]
        for j in range(k):
            s0, s1 = j / k, (j + 1) / k
            q0 = c0 + s0 * (c1 - c0)
            q1 = c0 + s1 * (c1 - c0)
            th0 = sector_theta[f * k + j]
            th1 = sector_theta[f * k + j + 1]
            a0 = r_in * np.array([np.cos(th0), np.sin(th0)])
            a1 = r_in * np.array([np.cos(th1), np.sin(th1)])
            elements.append(
                Element2D(
                    map=TransfiniteMap(
                        xi0=_Line(q0, q1),
                        xi1=_Arc(r_in, th0, th1),
                        eta0=_Line(q0, a0),
                        eta1=_Line(q1, a1),
                    ),
                    tag=ElementTag.ASYMPTOTIC,
                )
            )

    xs = np.linspace(-d, d, k + 1)
    for i in range(k):
        for j in range(k):
            elements.append(
                Element2D(
                    map=RectMap(xs[i], xs[i + 1], xs[j], xs[j + 1]),
                    tag=ElementTag.ASYMPTOTIC,
                )
            )

    return SblMesh2D(
        elements=elements,
        n_asymptotic=len(elements),
        n_boundary=n_sectors,
        rho0=rho0,
        n_sectors=n_sectors,
    )


def apply_needle_split(mesh: SblMesh2D, kappa: float, p: int, eps: float) -> SblMesh2D:
    """Split each boundary element at reference xi = kappa*p*eps.

    In the asymptotic range (kappa*p*eps >= 1/2) the mesh is returned
    unchanged apart from the recorded parameters.
    """
    if mesh.needle_applied:
        raise ValueError("mesh has already been split")
    kpe = kappa * p * eps
    if kpe >= 0.5:
        return SblMesh2D(
            elements=list(mesh.elements),
            n_asymptotic=mesh.n_asymptotic,
            n_boundary=mesh.n_boundary,
            rho0=mesh.rho0,
            n_sectors=mesh.n_sectors,
            needle_applied=False,
            kappa=kappa,
            p=p,
            eps=eps,
        )
    needles, regulars = [], []
    for i in range(mesh.n_boundary):
        parent = mesh.elements[i]
        needles.append(
            Element2D(
                map=XiAffineMap(parent.map, 0.0, kpe),
                tag=ElementTag.NEEDLE,
                boundary_edge="xi0",
                rho_offset=0.0,
                rho_scale=mesh.rho0 * kpe,
                parent_index=i,
            )
        )
        regulars.append(
            Element2D(
                map=XiAffineMap(parent.map, kpe, 1.0 - kpe),
                tag=ElementTag.REGULAR_SPLIT,
                boundary_edge=None,
                rho_offset=mesh.rho0 * kpe,
                rho_scale=mesh.rho0 * (1.0 - kpe),
                parent_index=i,
            )
        )
    elements = needles + regulars + list(mesh.elements[mesh.n_boundary :])
    return SblMesh2D(
        elements=elements,
        n_asymptotic=mesh.n_asymptotic,
        n_boundary=mesh.n_boundary,
        rho0=mesh.rho0,
        n_sectors=mesh.n_sectors,
        needle_applied=True,
        kappa=kappa,
        p=p,
        eps=eps,
    )


def build_mesh_disk(rho0: float, n_sectors: int, kappa: float, p: int, eps: float) -> SblMesh2D:
    """Asymptotic disk mesh followed by the needle split (if applicable)."""
    return apply_needle_split(build_asymptotic_mesh_disk(rho0, n_sectors), kappa, p, eps)


def edge_pairing(mesh: SblMesh2D, n_samples: int = 5, tol: float = 1e-10):
    """Half-edge pairing of the mesh in CCW traversal order.

    Returns (interior_pairs, boundary_edges).  Raises if any interior edge
    key does not occur exactly twice with opposite traversal, i.e. if the
    mesh is non-conforming.
    """
    s = np.linspace(0.0, 1.0, n_samples)
    seen: dict = {}
    boundary = []

    def key_of(xs, ys):
        pts = np.round(np.column_stack([xs, ys]) / tol) * tol
        fwd = tuple(map(tuple, pts))
        rev = tuple(map(tuple, pts[::-1]))
        return min(fwd, rev), fwd > rev

    for ei, el in enumerate(mesh.elements):
        for edge, reverse in CCW_EDGES:
            param = s[::-1] if reverse else s
            xs, ys = el.edge_curve(edge, param)
            key, flipped = key_of(xs, ys)
            entry = (ei, edge, flipped)
            seen.setdefault(key, []).append(entry)

    pairs = []
    for key, entries in seen.items():
        if len(entries) == 1:
            ei, edge, _ = entries[0]
            xs, ys = mesh.elements[ei].edge_curve(edge, s)
            if np.max(np.abs(xs * xs + ys * ys - 1.0)) > 1e-9:
                raise ValueError(
                    f"unpaired interior edge {edge} of element {ei}; mesh is "
                    f"non-conforming"
                )
            boundary.append((ei, edge))
        elif len(entries) == 2:
            if entries[0][2] == entries[1][2]:
                raise ValueError(
                    f"edge shared by elements {entries[0][0]} and "
                    f"{entries[1][0]} is traversed in the same direction"
                )
            pairs.append((entries[0][:2], entries[1][:2]))
        else:
            raise ValueError(f"edge key shared by {len(entries)} elements")
    return pairs, boundary


def dump_mesh(mesh, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(mesh.to_json(), fh, indent=2)
