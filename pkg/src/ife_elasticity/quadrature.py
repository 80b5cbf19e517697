"""Gauss rules, cut-element partitions and interface-aware composite rules."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .basis import ElementGeometry
from .geometry import InterfaceElementData

MAX_DEGREE = 10


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray  # (n, 2)
    weights: np.ndarray  # (n,)
    degree: int

    def __len__(self) -> int:
        return len(self.weights)


def _check_degree(degree: int) -> int:
    if int(degree) != degree or degree < 0 or degree > MAX_DEGREE:
        raise ValueError(f"quadrature degree must be an integer in [0, {MAX_DEGREE}], got {degree!r}")
    return int(degree)


@lru_cache(maxsize=None)
def _gauss_legendre01(q: int):
    x, w = roots_legendre(q)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_rule(region: str, degree: int) -> QuadRule:
    """Rule exact to ``degree`` on the unit square (``rectangle``) or the unit right triangle.

    The triangle rule is the collapsed (Duffy) product of Gauss-Legendre and
    Gauss-Jacobi(1, 0) points, so all its points are interior.
    """
    degree = _check_degree(degree)
    q = max(1, (degree + 2) // 2)
    u, wu = _gauss_legendre01(q)
    if region in ("square", "rectangle"):
        X, Y = np.meshgrid(u, u, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        w = np.outer(wu, wu).ravel()
    elif region == "triangle":
        t, wt = roots_jacobi(q, 1.0, 0.0)
        v = 0.5 * (t + 1.0)
        U, V = np.meshgrid(u, v, indexing="ij")
        pts = np.column_stack([(U * (1.0 - V)).ravel(), V.ravel()])
        w = 0.25 * np.outer(wu, wt).ravel()
    else:
        raise ValueError(f"unknown region {region!r}")
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadRule(pts, w, degree)


def triangle_points(rule: QuadRule, tri) -> tuple[np.ndarray, np.ndarray]:
    """Map a unit-triangle rule onto the triangle with vertices ``tri`` (3, 2)."""
    tri = np.asarray(tri, float)
    J = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
    return tri[0] + rule.points @ J.T, rule.weights * abs(np.linalg.det(J))


def triangles_points(rule: QuadRule, tris) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`triangle_points` for (k, 3, 2) triangles: (k*n, 2), (k*n,)."""
    tris = np.asarray(tris, float).reshape(-1, 3, 2)
    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    det = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    p = rule.points
    X = tris[:, None, 0] + p[None, :, 0, None] * e1[:, None] + p[None, :, 1, None] * e2[:, None]
    return X.reshape(-1, 2), (det[:, None] * rule.weights[None, :]).ravel()


def polygon_area(P) -> float:
    P = np.asarray(P, float)
    x, y = P[:, 0], P[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class CutPartition:
    """Triangulation of an element split by the line l (construction labeling)."""

    minus_polygon: np.ndarray
    plus_polygon: np.ndarray
    minus_triangles: np.ndarray  # (k, 3, 2)
    plus_triangles: np.ndarray

    @property
    def minus_area(self) -> float:
        return float(sum(abs(polygon_area(t)) for t in self.minus_triangles))

    @property
    def plus_area(self) -> float:
        return float(sum(abs(polygon_area(t)) for t in self.plus_triangles))


def _dedupe(ring, tol):
    out = []
    for p in ring:
        if not out or np.linalg.norm(p - out[-1]) > tol:
            out.append(p)
    if len(out) > 1 and np.linalg.norm(out[0] - out[-1]) <= tol:
        out.pop()
    return np.array(out)


def _fan(poly, h):
    tris = [np.array([poly[0], poly[k], poly[k + 1]]) for k in range(1, len(poly) - 1)]
    tris = [t for t in tris if abs(polygon_area(t)) > 1e-14 * h * h]
    return np.array(tris).reshape(-1, 3, 2)


def split_by_line(data: InterfaceElementData) -> CutPartition:
    """Split the element polygon along D-E into its two convex pieces."""
    geom = data.element
    P = geom.polygon
    h = geom.h
    ring, iD, iE = [], None, None
    for k in range(len(P)):
        ring.append(P[k])
        if k == data.D_edge:
            iD = len(ring)
            ring.append(data.D)
        if k == data.E_edge:
            iE = len(ring)
            ring.append(data.E)
    ring = np.array(ring)
    if iD < iE:
        first, second = ring[iD : iE + 1], np.vstack([ring[iE:], ring[: iD + 1]])
    else:
        first, second = np.vstack([ring[iD:], ring[: iE + 1]]), ring[iE : iD + 1]
    tol = 1e-12 * h
    pieces = []
    for poly in (first, second):
        poly = _dedupe(poly, tol)
        tris = _fan(poly, h)
        if len(tris):
            areas = np.array([abs(polygon_area(t)) for t in tris])
            cen = np.einsum("k,kd->d", areas, tris.mean(axis=1)) / areas.sum()
            side = 1 if data.L(cen) >= 0 else -1
        else:
            side = 1 if data.L(poly.mean(axis=0)) >= 0 else -1
        pieces.append((side, poly, tris))
    (s0, p0, t0), (s1, p1, t1) = pieces
    if s0 == s1:
        # a sliver piece: its centroid is ambiguous, the other piece decides
        s0 = -s1 if abs(polygon_area(p1)) >= abs(polygon_area(p0)) else s0
        s1 = -s0
    if s0 < 0:
        return CutPartition(p0, p1, t0, t1)
    return CutPartition(p1, p0, t1, t0)


def cut_rule(data: InterfaceElementData, degree: int):
    """Quadrature points and weights of both pieces: ((Xm, wm), (Xp, wp))."""
    part = split_by_line(data)
    rule = gauss_rule("triangle", degree)
    return triangles_points(rule, part.minus_triangles), triangles_points(rule, part.plus_triangles)


def integrate_cut(f_minus, f_plus, data: InterfaceElementData, degree: int):
    """Integral over the element of ``f_minus`` on the minus piece plus ``f_plus`` on the plus piece."""
    (Xm, wm), (Xp, wp) = cut_rule(data, degree)
    total = 0.0
    if len(wm):
        total = total + np.tensordot(wm, f_minus(Xm), axes=1)
    if len(wp):
        total = total + np.tensordot(wp, f_plus(Xp), axes=1)
    return total


@lru_cache(maxsize=None)
def _subcell_reference(region: str, k: int, degree: int):
    """Composite rule on the unit square / triangle from k x k subcells."""
    rule = gauss_rule("square" if region == "square" else "triangle", degree)
    if region == "square":
        i, j = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
        off = np.column_stack([i.ravel(), j.ravel()]) / k
        pts = (off[:, None, :] + rule.points[None, :, :] / k).reshape(-1, 2)
        w = np.tile(rule.weights / k**2, k * k)
    else:
        tris = []
        for a in range(k):
            for b in range(k - a):
                p = np.array([a, b], float)
                tris.append([p, p + [1, 0], p + [0, 1]])
                if a + b < k - 1:
                    tris.append([p + [1, 0], p + [1, 1], p + [0, 1]])
        tris = np.array(tris) / k
        pts, w = triangles_points(rule, tris)
    pts.setflags(write=False)
    w.setflags(write=False)
    return pts, w


def subcell_rule(geom: ElementGeometry, k: int = 16, degree: int = 4):
    """Composite rule over ``geom`` with k x k subcells (k^2 sub-triangles on triangles)."""
    if k < 1:
        raise ValueError("k must be positive")
    P = geom.polygon
    if len(P) == 4:
        ref, w = _subcell_reference("square", k, degree)
        return geom.origin + geom.h * ref, w * geom.h**2
    ref, w = _subcell_reference("triangle", k, degree)
    J = np.column_stack([P[1] - P[0], P[2] - P[0]])
    return P[0] + ref @ J.T, w * abs(np.linalg.det(J))


def integrate_gamma_classified(f, geom: ElementGeometry, interface, k: int = 16, degree: int = 4):
    """Composite integral of ``f(X, side)`` with ``side`` taken from the true interface.

    Only the subcells straddling the interface carry a quadrature error; it
    shrinks with k. ``side`` is +1 where ``phi >= 0``.
    """
    X, w = subcell_rule(geom, k, degree)
    side = interface.side(X)
    return np.tensordot(w, f(X, side), axes=1)
