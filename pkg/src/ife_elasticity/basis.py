"""Element-local monomial bases, standard scalar shape functions and element geometry.

Polynomials live in scaled local coordinates ``xi = (X - origin) / h`` where
``origin`` is the element's first vertex A1.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import RQ1_SITES, DofMap

N_MONOMIALS = {"linear": 3, "bilinear": 4, "rotated_q1": 4}


def monomials(kind: str, xi: np.ndarray) -> np.ndarray:
    """Values of the monomial basis at local points ``xi`` (..., 2) -> (..., m)."""
    x, y = xi[..., 0], xi[..., 1]
    one = np.ones_like(x)
    if kind == "linear":
        return np.stack([one, x, y], axis=-1)
    if kind == "bilinear":
        return np.stack([one, x, y, x * y], axis=-1)
    return np.stack([one, x, y, x * x - y * y], axis=-1)


def monomial_grads(kind: str, xi: np.ndarray) -> np.ndarray:
    """Local gradients, shape (..., m, 2)."""
    x, y = xi[..., 0], xi[..., 1]
    zero, one = np.zeros_like(x), np.ones_like(x)
    dx = [zero, one, zero]
    dy = [zero, zero, one]
    if kind == "bilinear":
        dx.append(y)
        dy.append(x)
    elif kind == "rotated_q1":
        dx.append(2 * x)
        dy.append(-2 * y)
    return np.stack([np.stack(dx, axis=-1), np.stack(dy, axis=-1)], axis=-1)


def monomial_hessians(kind: str, xi: np.ndarray) -> np.ndarray:
    """Local Hessians, shape (..., m, 2, 2)."""
    m = N_MONOMIALS[kind]
    out = np.zeros(xi.shape[:-1] + (m, 2, 2))
    if kind == "bilinear":
        out[..., 3, 0, 1] = out[..., 3, 1, 0] = 1.0
    elif kind == "rotated_q1":
        out[..., 3, 0, 0] = 2.0
        out[..., 3, 1, 1] = -2.0
    return out


@lru_cache(maxsize=None)
def _shape_coefficients(kind: str, sites_key: tuple) -> np.ndarray:
    sites = np.array(sites_key).reshape(-1, 2)
    V = monomials(kind, sites)
    C = np.linalg.inv(V)
    C.setflags(write=False)
    return C


def shape_coefficients(kind: str, local_sites: np.ndarray) -> np.ndarray:
    """Columns are the monomial coefficients of the Lagrange shapes psi_i.

    ``psi_i(xi) = monomials(xi) @ C[:, i]`` and ``psi_i(site_j) = delta_ij``.
    """
    key = tuple(np.round(np.asarray(local_sites, float).ravel(), 12))
    return _shape_coefficients(kind, key)


@dataclass(frozen=True)
class ElementGeometry:
    """Geometry of one mesh element as seen by a particular space."""

    element_id: int
    space_kind: str
    origin: np.ndarray
    h: float
    polygon: np.ndarray  # CCW vertices, physical
    sites: np.ndarray  # DOF sites A_i, physical, local order
    site_edges: tuple  # for each site: index of the polygon edge it lies on, or None

    @property
    def m(self) -> int:
        return len(self.sites)

    @property
    def local_sites(self) -> np.ndarray:
        return (self.sites - self.origin) / self.h

    @property
    def coefficients(self) -> np.ndarray:
        return shape_coefficients(self.space_kind, self.local_sites)

    @property
    def area(self) -> float:
        x, y = self.polygon[:, 0], self.polygon[:, 1]
        return 0.5 * abs(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def to_local(self, X) -> np.ndarray:
        return (np.asarray(X, float) - self.origin) / self.h

    def contains(self, X, tol: float = 1e-12) -> np.ndarray:
        """Points inside or on the closed element (within ``tol * h``)."""
        X = np.atleast_2d(np.asarray(X, float))
        P = self.polygon
        inside = np.ones(len(X), dtype=bool)
        for k in range(len(P)):
            a, b = P[k], P[(k + 1) % len(P)]
            edge = b - a
            cross = edge[0] * (X[:, 1] - a[1]) - edge[1] * (X[:, 0] - a[0])
            inside &= cross >= -tol * self.h * np.linalg.norm(edge)
        return inside

    def scalar_values(self, X) -> np.ndarray:
        """psi_i at physical points: (..., m)."""
        return monomials(self.space_kind, self.to_local(X)) @ self.coefficients

    def scalar_grads(self, X) -> np.ndarray:
        """Physical gradients of psi_i: (..., m, 2)."""
        d = monomial_grads(self.space_kind, self.to_local(X))
        return np.einsum("...kd,ki->...id", d, self.coefficients) / self.h

    def scalar_hessians(self, X) -> np.ndarray:
        d = monomial_hessians(self.space_kind, self.to_local(X))
        return np.einsum("...kab,ki->...iab", d, self.coefficients) / self.h**2

    def line_coefficients(self, point, normal) -> np.ndarray:
        """Monomial coefficients of ``L(X) = normal . (X - point)``."""
        c = np.zeros(N_MONOMIALS[self.space_kind])
        c[0] = np.dot(normal, self.origin - point)
        c[1] = self.h * normal[0]
        c[2] = self.h * normal[1]
        return c


def element_geometry(dof_map: DofMap, e: int) -> ElementGeometry:
    mesh = dof_map.mesh
    kind = dof_map.space_kind
    polygon = mesh.element_polygon(e)
    origin = mesh.element_origin(e)
    if kind == "rotated_q1":
        sites = origin + mesh.h * RQ1_SITES
        site_edges = (0, 1, 2, 3)
    else:
        sites = mesh.element_vertices(e)
        site_edges = (None,) * len(sites)
    return ElementGeometry(
        element_id=int(e),
        space_kind=kind,
        origin=np.array(origin, float),
        h=mesh.h,
        polygon=np.array(polygon, float),
        sites=np.array(sites, float),
        site_edges=site_edges,
    )


def reference_element(space_kind: str, h: float = 1.0, origin=(0.0, 0.0)) -> ElementGeometry:
    """A single element with A1 at ``origin`` and unit-aligned edges, for tests and sweeps."""
    o = np.asarray(origin, float)
    if space_kind == "linear":
        polygon = o + h * np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        sites = polygon.copy()
        site_edges = (None,) * 3
    else:
        polygon = o + h * np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        if space_kind == "bilinear":
            sites = o + h * np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
            site_edges = (None,) * 4
        else:
            sites = o + h * RQ1_SITES
            site_edges = (0, 1, 2, 3)
    return ElementGeometry(-1, space_kind, o, float(h), polygon, sites, site_edges)
