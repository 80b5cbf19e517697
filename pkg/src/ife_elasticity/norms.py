"""IFE interpolation and broken Sobolev error norms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import GlobalField, RHS_DEGREE, _element_rule
from .mesh import DofMap
from .quadrature import subcell_rule
from .space import IFESpace, StandardShapeSet


def interpolate(u, dof_map: DofMap) -> GlobalField:
    """Nodal IFE interpolant: the DOF vector of ``u`` sampled at the sites."""
    vals = np.asarray(u(dof_map.sites), float).reshape(-1, 2)
    return GlobalField(dof_map, vals.ravel().copy())


@dataclass(frozen=True)
class ErrorNorms:
    L2: float
    H1: float
    H2: float | None

    def as_dict(self) -> dict:
        return {"L2": self.L2, "H1": self.H1, "H2": self.H2}


def error_norms(
    field: GlobalField,
    exact,
    space: IFESpace,
    k_subcells: int = 16,
    degree: int = 4,
    regular_degree: int = RHS_DEGREE,
) -> ErrorNorms:
    """L2 norm and broken H1, H2 semi-norms of ``exact - field``.

    ``exact`` needs ``u``, ``grad`` and ``hessian`` taking ``(X, side)``.
    On interface elements the exact side follows the true interface and the
    IFE piece follows l, on a k x k composite rule. H2 is None for the
    linear space, whose second derivatives vanish identically.
    """
    dm = space.dof_map
    mesh = dm.mesh
    local = field.element_values()  # (n_el, 2m)
    sums = np.zeros(3)

    regular = np.flatnonzero(space.element_side != 0)
    for t in np.unique(mesh.element_type):
        ref = space.type_reference(int(t))
        std = StandardShapeSet(ref)
        Xq, wq = _element_rule(ref, regular_degree)
        V, G, H = std.values(Xq), std.grads(Xq), std.hessians(Xq)
        for side in (-1, 1):
            els = regular[(mesh.element_type[regular] == t) & (space.element_side[regular] == side)]
            if not len(els):
                continue
            X = mesh.vertices[mesh.elements[els, 0]][:, None, :] + Xq[None]
            s = np.full(X.shape[:-1], side)
            c = local[els]
            du = exact.u(X, s) - np.einsum("es,qsc->eqc", c, V)
            dg = exact.grad(X, s) - np.einsum("es,qscd->eqcd", c, G)
            dh = exact.hessian(X, s) - np.einsum("es,qscab->eqcab", c, H)
            sums[0] += np.einsum("q,eqc->", wq, du**2)
            sums[1] += np.einsum("q,eqcd->", wq, dg**2)
            sums[2] += np.einsum("q,eqcab->", wq, dh**2)

    for e, shapes in space.shapes.items():
        X, w = subcell_rule(shapes.geom, k_subcells, degree)
        s = space.interface.side(X)
        c = local[e]
        du = exact.u(X, s) - np.einsum("s,qsc->qc", c, shapes.values(X))
        dg = exact.grad(X, s) - np.einsum("s,qscd->qcd", c, shapes.grads(X))
        dh = exact.hessian(X, s) - np.einsum("s,qscab->qcab", c, shapes.hessians(X))
        sums[0] += np.einsum("q,qc->", w, du**2)
        sums[1] += np.einsum("q,qcd->", w, dg**2)
        sums[2] += np.einsum("q,qcab->", w, dh**2)

    L2, H1, H2 = np.sqrt(sums)
    return ErrorNorms(float(L2), float(H1), None if dm.space_kind == "linear" else float(H2))
