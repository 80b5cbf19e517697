"""Uniform Cartesian meshes of a rectangle and the global DOF numbering on them.

Rectangular elements list their vertices as (LL, LR, UL, UR), i.e. the
local order A1=(0,0), A2=(h,0), A3=(0,h), A4=(h,h). Triangles come from
splitting each square along the LL-UR diagonal; each triangle lists its
right-angle vertex first followed by the other two counterclockwise, so that
after a rotation it is the reference triangle (0,0), (h,0), (0,h).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPACE_KINDS = ("linear", "bilinear", "rotated_q1")
MESH_KINDS = ("rectangular", "triangular")

# rotated-Q1 local sites: bottom, right, top, left edge midpoints
RQ1_SITES = np.array([[0.5, 0.0], [1.0, 0.5], [0.5, 1.0], [0.0, 0.5]])


def _frozen(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


def normalize_space_kind(kind: str) -> str:
    k = kind.lower().replace("-", "_")
    if k in ("rotated_q1", "rq1", "rotatedq1"):
        k = "rotated_q1"
    if k not in SPACE_KINDS:
        raise ValueError(f"unknown space kind {kind!r}; expected one of {SPACE_KINDS}")
    return k


@dataclass(frozen=True)
class CartesianMesh:
    domain: tuple
    n: int
    kind: str
    vertices: np.ndarray
    elements: np.ndarray
    edge_midpoints: np.ndarray
    # rectangular: per element (bottom, right, top, left) edge indices
    element_edges: np.ndarray | None = None
    # triangular: 0 for the lower triangle of a square, 1 for the upper one
    element_type: np.ndarray = field(default=None)

    @property
    def h(self) -> float:
        return (self.domain[1] - self.domain[0]) / self.n

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def element_vertices(self, e: int) -> np.ndarray:
        return self.vertices[self.elements[e]]

    def element_polygon(self, e: int) -> np.ndarray:
        """Vertices of element ``e`` in counterclockwise order."""
        v = self.element_vertices(e)
        if self.kind == "rectangular":
            return v[[0, 1, 3, 2]]
        return v

    def element_origin(self, e: int) -> np.ndarray:
        """Local coordinate origin A1: the first listed vertex (lower-left corner for squares)."""
        return self.vertices[self.elements[e, 0]]

    def element_areas(self) -> np.ndarray:
        polys = self.vertices[self.elements]
        if self.kind == "rectangular":
            polys = polys[:, [0, 1, 3, 2]]
        x, y = polys[..., 0], polys[..., 1]
        return 0.5 * np.abs(np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1))

    def cell_index(self, e: int) -> tuple[int, int]:
        """(i, j) of the square cell containing element ``e``."""
        sq = e if self.kind == "rectangular" else e // 2
        return sq % self.n, sq // self.n


def build_mesh(domain, n: int, kind: str = "rectangular") -> CartesianMesh:
    """Uniform ``n`` x ``n`` mesh of the axis-aligned rectangle ``domain``.

    ``domain`` is (xmin, xmax, ymin, ymax) and must be a square, so that all
    cells are squares of side ``h = (xmax - xmin) / n``.
    """
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n!r}")
    n = int(n)
    if kind not in MESH_KINDS:
        raise ValueError(f"unknown mesh kind {kind!r}")
    xmin, xmax, ymin, ymax = map(float, domain)
    wx, wy = xmax - xmin, ymax - ymin
    if not (wx > 0 and wy > 0):
        raise ValueError(f"degenerate domain {domain!r}")
    if abs(wx - wy) > 1e-12 * max(wx, wy):
        raise ValueError(
            f"domain {domain!r} is not a square; only square cells with a single n are supported"
        )

    xs = np.linspace(xmin, xmax, n + 1)
    ys = np.linspace(ymin, ymax, n + 1)
    X, Y = np.meshgrid(xs, ys)  # row j = y index
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    ll = j * (n + 1) + i
    lr, ul, ur = ll + 1, ll + n + 1, ll + n + 2

    # horizontal edge (i, j): (i, j)-(i+1, j); vertical edge (i, j): (i, j)-(i, j+1)
    n_h = n * (n + 1)
    hx = np.arange(n)
    hmid = np.array([[(xs[a] + xs[a + 1]) / 2, ys[b]] for b in range(n + 1) for a in hx])
    vmid = np.array([[xs[a], (ys[b] + ys[b + 1]) / 2] for b in range(n) for a in range(n + 1)])
    edge_midpoints = np.vstack([hmid, vmid])

    element_edges = None
    element_type = None
    if kind == "rectangular":
        elements = np.column_stack([ll, lr, ul, ur])
        bottom = j * n + i
        top = (j + 1) * n + i
        left = n_h + j * (n + 1) + i
        right = left + 1
        element_edges = _frozen(np.column_stack([bottom, right, top, left]))
        element_type = np.zeros(len(elements), dtype=int)
    else:
        lower = np.column_stack([lr, ur, ll])
        upper = np.column_stack([ul, ll, ur])
        elements = np.empty((2 * n * n, 3), dtype=int)
        elements[0::2] = lower
        elements[1::2] = upper
        element_type = np.tile([0, 1], n * n)

    return CartesianMesh(
        domain=(xmin, xmax, ymin, ymax),
        n=n,
        kind=kind,
        vertices=_frozen(vertices),
        elements=_frozen(elements),
        edge_midpoints=_frozen(edge_midpoints),
        element_edges=element_edges,
        element_type=_frozen(element_type),
    )


@dataclass(frozen=True)
class DofMap:
    """Global numbering of the vector DOFs ``(site, component)``.

    Local shape ``k`` of an element with ``m`` sites is component ``k // m``
    at local site ``k % m``; its global index is ``2 * site + component``.
    """

    space_kind: str
    mesh: CartesianMesh
    sites: np.ndarray
    element_sites: np.ndarray
    site_on_boundary: np.ndarray

    @property
    def m(self) -> int:
        return self.element_sites.shape[1]

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_sites

    @property
    def boundary_flags(self) -> np.ndarray:
        return np.repeat(self.site_on_boundary, 2)

    def node_sites(self, e: int) -> np.ndarray:
        return self.sites[self.element_sites[e]]

    def global_index(self, e: int, local: int, component: int) -> int:
        return 2 * int(self.element_sites[e, local]) + component

    def element_dofs(self, e=None) -> np.ndarray:
        """Global indices of the 2m local shapes, for one element or all."""
        es = self.element_sites if e is None else self.element_sites[e]
        return np.concatenate([2 * es, 2 * es + 1], axis=-1)


def build_dof_map(mesh: CartesianMesh, space_kind: str) -> DofMap:
    space_kind = normalize_space_kind(space_kind)
    expected = "triangular" if space_kind == "linear" else "rectangular"
    if mesh.kind != expected:
        raise ValueError(f"space {space_kind!r} needs a {expected} mesh, got {mesh.kind!r}")

    if space_kind == "rotated_q1":
        sites = mesh.edge_midpoints
        element_sites = mesh.element_edges
    else:
        sites = mesh.vertices
        element_sites = mesh.elements

    xmin, xmax, ymin, ymax = mesh.domain
    on_bnd = (
        (sites[:, 0] == xmin) | (sites[:, 0] == xmax) | (sites[:, 1] == ymin) | (sites[:, 1] == ymax)
    )
    return DofMap(
        space_kind=space_kind,
        mesh=mesh,
        sites=sites,
        element_sites=element_sites,
        site_on_boundary=_frozen(on_bnd),
    )
