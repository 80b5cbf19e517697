"""Global stiffness and load assembly, Dirichlet elimination and the CG solve."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .basis import monomial_grads
from .errors import ConvergenceError
from .mesh import DofMap
from .quadrature import cut_rule, gauss_rule, subcell_rule
from .space import IFESpace, StandardShapeSet

STIFFNESS_DEGREE = 4
RHS_DEGREE = 8


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dof_map: DofMap
    dirichlet: np.ndarray | None = None  # boolean mask of eliminated DOFs
    dirichlet_values: np.ndarray | None = None
    # the system before Dirichlet elimination, for residual checks
    raw_matrix: sp.csr_matrix | None = None
    raw_rhs: np.ndarray | None = None

    @property
    def n_dofs(self) -> int:
        return self.matrix.shape[0]

    def dump_coo(self, path) -> None:
        """Write ``row col value`` lines of the current matrix."""
        A = self.matrix.tocoo()
        with open(path, "w") as fh:
            fh.write(f"# {A.shape[0]} {A.shape[1]} {A.nnz}\n")
            for r, c, v in zip(A.row, A.col, A.data):
                fh.write(f"{r} {c} {v:.17g}\n")


@dataclass
class GlobalField:
    """A finite element function given by its global DOF vector."""

    dof_map: DofMap
    values: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def site_values(self) -> np.ndarray:
        """(n_sites, 2) nodal displacements."""
        return self.values.reshape(-1, 2)

    def element_values(self) -> np.ndarray:
        """(n_elements, 2m) local DOF values in local shape order."""
        return self.values[self.dof_map.element_dofs()]


def elastic_stiffness(grads, weights, lam, mu) -> np.ndarray:
    """Local matrix ``sum_q w_q [2 mu eps_s : eps_t + lam div_s div_t]``.

    ``grads`` is (nq, ns, 2, 2) with ``[q, s, i, j] = d phi_s,i / d x_j``.
    """
    eps = 0.5 * (grads + np.swapaxes(grads, -1, -2))
    div = grads[..., 0, 0] + grads[..., 1, 1]
    return 2.0 * mu * np.einsum("q,qsij,qtij->st", weights, eps, eps) + lam * np.einsum(
        "q,qs,qt->st", weights, div, div
    )


def _piece_grads(coeffs, geom, X):
    d = monomial_grads(geom.space_kind, geom.to_local(X))
    return np.einsum("sck,qkd->qscd", coeffs, d) / geom.h


def _element_rule(geom, degree):
    P = geom.polygon
    if len(P) == 4:
        r = gauss_rule("square", degree)
        return geom.origin + geom.h * r.points, r.weights * geom.h**2
    r = gauss_rule("triangle", degree)
    J = np.column_stack([P[1] - P[0], P[2] - P[0]])
    return P[0] + r.points @ J.T, r.weights * abs(np.linalg.det(J))


def interface_stiffness(shapes, mat, degree: int = STIFFNESS_DEGREE) -> np.ndarray:
    """Local stiffness of an IFE element, each piece integrated over its side of l."""
    data = shapes.data
    geom = shapes.geom
    oriented = data.oriented(mat)
    (Xm, wm), (Xp, wp) = cut_rule(data, degree)
    K = np.zeros((shapes.n_shapes, shapes.n_shapes))
    if len(wm):
        K += elastic_stiffness(_piece_grads(shapes.minus, geom, Xm), wm, oriented.lambda_minus, oriented.mu_minus)
    if len(wp):
        K += elastic_stiffness(_piece_grads(shapes.plus, geom, Xp), wp, oriented.lambda_plus, oriented.mu_plus)
    return K


def interface_load(shapes, f, interface, k: int = 16, degree: int = 4) -> np.ndarray:
    """Local load of an IFE element on a composite rule; f's side follows the true interface."""
    X, w = subcell_rule(shapes.geom, k, degree)
    side = interface.side(X)
    fx = f(X, side)
    return np.einsum("q,qc,qsc->s", w, fx, shapes.values(X))


def assemble(
    space: IFESpace,
    f,
    rhs_k: int = 16,
    rhs_degree: int = 4,
    regular_degree: int = RHS_DEGREE,
    stiffness_degree: int = STIFFNESS_DEGREE,
) -> LinearSystem:
    """Assemble ``a(u, v)`` and ``(f, v)`` over the IFE space.

    ``f(X, side)`` returns the body force (..., 2) at points X lying on
    physical side ``side``. Non-interface elements of one shape and material
    share a single local stiffness and are handled in bulk.
    """
    dm = space.dof_map
    mesh = dm.mesh
    mat = space.mat
    m = dm.m
    ndof = dm.n_dofs
    dofs = dm.element_dofs()  # (n_el, 2m)
    rows, cols, vals = [], [], []
    rhs = np.zeros(ndof)

    regular = np.flatnonzero(space.element_side != 0)
    for t in np.unique(mesh.element_type):
        ref = space.type_reference(int(t))
        std = StandardShapeSet(ref)
        Xk, wk = _element_rule(ref, stiffness_degree)
        G = std.grads(Xk)
        Xf, wf = _element_rule(ref, regular_degree)
        V = std.values(Xf)  # (nq, 2m, 2)
        for side in (-1, 1):
            els = regular[(mesh.element_type[regular] == t) & (space.element_side[regular] == side)]
            if not len(els):
                continue
            lam, mu = mat.params(side)
            Ke = elastic_stiffness(G, wk, lam, mu)
            d = dofs[els]
            rows.append(np.repeat(d, 2 * m, axis=1).ravel())
            cols.append(np.tile(d, (1, 2 * m)).ravel())
            vals.append(np.broadcast_to(Ke.ravel(), (len(els), Ke.size)).ravel())
            origins = mesh.vertices[mesh.elements[els, 0]]
            X = origins[:, None, :] + Xf[None, :, :]
            fx = f(X, np.full(X.shape[:-1], side))
            Fe = np.einsum("q,eqc,qsc->es", wf, fx, V)
            np.add.at(rhs, d.ravel(), Fe.ravel())

    for e, shapes in space.shapes.items():
        Ke = interface_stiffness(shapes, mat, stiffness_degree)
        d = dofs[e]
        rows.append(np.repeat(d, 2 * m))
        cols.append(np.tile(d, 2 * m))
        vals.append(Ke.ravel())
        np.add.at(rhs, d, interface_load(shapes, f, mat.interface, rhs_k, rhs_degree))

    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(ndof, ndof)
    ).tocsr()
    A.sum_duplicates()
    return LinearSystem(A, rhs, dm, raw_matrix=A, raw_rhs=rhs.copy())


def apply_dirichlet(system: LinearSystem, g, mask=None) -> LinearSystem:
    """Impose ``u = g`` at boundary sites by symmetric elimination.

    Eliminated rows and columns are replaced by identity rows, so the
    resulting matrix stays symmetric positive definite. ``g(X)`` returns (n, 2).
    """
    dm = system.dof_map
    mask = dm.boundary_flags if mask is None else np.asarray(mask, bool)
    ud = np.zeros(system.n_dofs)
    bsites = np.flatnonzero(dm.site_on_boundary)
    if callable(g):
        gv = np.asarray(g(dm.sites[bsites]), float).reshape(-1, 2)
    else:
        gv = np.broadcast_to(np.asarray(g, float), (len(bsites), 2))
    ud[2 * bsites] = gv[:, 0]
    ud[2 * bsites + 1] = gv[:, 1]
    ud[~mask] = 0.0

    raw_A = system.raw_matrix if system.raw_matrix is not None else system.matrix
    raw_b = system.raw_rhs if system.raw_rhs is not None else system.rhs
    free = (~mask).astype(float)
    Dfree = sp.diags(free)
    A = (Dfree @ raw_A @ Dfree + sp.diags(mask.astype(float))).tocsr()
    b = free * (raw_b - raw_A @ ud) + ud
    return replace(system, matrix=A, rhs=b, dirichlet=mask, dirichlet_values=ud)


def solve_cg(system: LinearSystem, rel_tol: float = 1e-11, max_iter: int | None = None) -> GlobalField:
    """Jacobi-preconditioned conjugate gradients to ``|r| <= rel_tol |b|``."""
    A, b = system.matrix, system.rhs
    n = len(b)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return GlobalField(system.dof_map, np.zeros(n), {"iterations": 0, "residuals": [0.0]})
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise ConvergenceError("matrix has non-positive diagonal entries, CG needs SPD")
    inv_diag = 1.0 / diag
    M = LinearOperator((n, n), matvec=lambda x: inv_diag * x, dtype=float)
    history = []

    def record(xk):
        history.append(float(np.linalg.norm(b - A @ xk)) / bnorm)

    max_iter = 10 * n if max_iter is None else int(max_iter)
    x, info = cg(A, b, rtol=rel_tol, atol=0.0, maxiter=max_iter, M=M, callback=record)
    final = float(np.linalg.norm(b - A @ x)) / bnorm
    if info != 0 or final > 10 * rel_tol:
        raise ConvergenceError(
            "CG did not reach the requested relative residual",
            residuals=history,
            iterations=len(history),
            final_residual=final,
            rel_tol=rel_tol,
        )
    return GlobalField(system.dof_map, x, {"iterations": len(history), "residuals": history, "final_residual": final})
