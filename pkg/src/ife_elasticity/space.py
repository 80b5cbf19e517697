"""IFE shape functions on interface elements and the global IFE space.

Both pieces of every shape function are stored as coefficient tensors of
shape ``(2m, 2, m)``: local shape index, displacement component, monomial.
Local shape ``k < m`` has nodal value e1 at site ``k``; shape ``k >= m`` has
e2 at site ``k - m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import ElementGeometry, element_geometry, monomial_grads, monomial_hessians, monomials
from .errors import IFEError, SingularConstruction
from .geometry import (
    EDGE_SAMPLES,
    InterfaceElementData,
    JumpMatrices,
    LameField,
    Side,
    build_jump_matrices,
    classify_geometry,
    traction,
)
from .mesh import DofMap

_I2 = np.eye(2)


@dataclass(frozen=True)
class VectorPoly:
    """Two-component polynomial in the element-local monomial basis."""

    space_kind: str
    coeffs: np.ndarray  # (2, m)
    origin: np.ndarray
    h: float

    def _xi(self, X):
        return (np.asarray(X, float) - self.origin) / self.h

    def value(self, X):
        return monomials(self.space_kind, self._xi(X)) @ self.coeffs.T

    def grad(self, X):
        """(..., 2, 2) with ``[i, j] = d u_i / d x_j``."""
        d = monomial_grads(self.space_kind, self._xi(X))
        return np.einsum("ck,...kd->...cd", self.coeffs, d) / self.h

    def hessian(self, X):
        d = monomial_hessians(self.space_kind, self._xi(X))
        return np.einsum("ck,...kab->...cab", self.coeffs, d) / self.h**2


def standard_coefficients(geom: ElementGeometry) -> np.ndarray:
    """Coefficient tensor (2m, 2, m) of the standard vector Lagrange shapes."""
    C = geom.coefficients
    m = geom.m
    S = np.zeros((2 * m, 2, m))
    S[:m, 0, :] = C.T
    S[m:, 1, :] = C.T
    return S


def standard_shapes(geom: ElementGeometry) -> list[VectorPoly]:
    S = standard_coefficients(geom)
    return [VectorPoly(geom.space_kind, S[k], geom.origin, geom.h) for k in range(2 * geom.m)]


class ShapeSet:
    """Local shape functions of one element, possibly split into two pieces."""

    geom: ElementGeometry
    minus: np.ndarray
    plus: np.ndarray

    @property
    def element_id(self) -> int:
        return self.geom.element_id

    @property
    def n_shapes(self) -> int:
        return 2 * self.geom.m

    def piece_side(self, X) -> np.ndarray:
        """+1 where the plus piece applies, -1 for the minus piece."""
        X = np.asarray(X, float)
        return np.ones(X.shape[:-1], dtype=int)

    def _coeffs_at(self, X):
        side = self.piece_side(X)
        return np.where(side[..., None, None, None] > 0, self.plus, self.minus)

    def _check_inside(self, X):
        pts = np.asarray(X, float).reshape(-1, 2)
        if not np.all(self.geom.contains(pts, tol=1e-9)):
            raise IFEError("evaluation point outside element", element=self.element_id)

    def values(self, X, check: bool = False):
        """All shapes at points X: (..., 2m, 2)."""
        if check:
            self._check_inside(X)
        X = np.asarray(X, float)
        P = monomials(self.geom.space_kind, self.geom.to_local(X))
        return np.einsum("...sck,...k->...sc", self._coeffs_at(X), P)

    def grads(self, X, check: bool = False):
        """(..., 2m, 2, 2) with ``[s, i, j] = d phi_s,i / d x_j``."""
        if check:
            self._check_inside(X)
        X = np.asarray(X, float)
        d = monomial_grads(self.geom.space_kind, self.geom.to_local(X))
        return np.einsum("...sck,...kd->...scd", self._coeffs_at(X), d) / self.geom.h

    def hessians(self, X, check: bool = False):
        if check:
            self._check_inside(X)
        X = np.asarray(X, float)
        d = monomial_hessians(self.geom.space_kind, self.geom.to_local(X))
        return np.einsum("...sck,...kab->...scab", self._coeffs_at(X), d) / self.geom.h**2

    def piece(self, k: int, side: int) -> VectorPoly:
        c = self.plus[k] if side > 0 else self.minus[k]
        return VectorPoly(self.geom.space_kind, c, self.geom.origin, self.geom.h)


class StandardShapeSet(ShapeSet):
    def __init__(self, geom: ElementGeometry):
        self.geom = geom
        self.minus = self.plus = standard_coefficients(geom)


@dataclass(eq=False)
class IFEShapeSet(ShapeSet):
    """IFE shapes of one interface element (construction labeling, see InterfaceElementData)."""

    data: InterfaceElementData
    jm: JumpMatrices
    F: np.ndarray
    minus: np.ndarray
    plus: np.ndarray
    c0: np.ndarray  # (2m, 2)
    c: np.ndarray  # (2m, 2 |I_minus|)
    geom: ElementGeometry = field(init=False)

    def __post_init__(self):
        self.geom = self.data.element

    def piece_side(self, X):
        L = self.data.L(X)
        return np.where(L >= 0.0, 1, -1)


def _psibar_T(grad_psi, lam_hat, mu_hat, n):
    """``[sigma_hat(psi e1) n, sigma_hat(psi e2) n]`` for a scalar gradient."""
    return np.column_stack([traction(np.outer(_I2[k], grad_psi), lam_hat, mu_hat, n) for k in range(2)])


def construct_ife_shapes(data: InterfaceElementData, mat: LameField, F=None) -> IFEShapeSet:
    """Build the 2|I| IFE shapes of an interface element.

    ``F`` is the point of l where the traction jump is imposed: the default
    F0 of the element's case, ``"midpoint"`` for (D + E) / 2, or a point.
    The interior coefficients come from the closed-form Sherman-Morrison
    solution, which needs only 2x2 inverses of K and Xi.
    """
    if F is None:
        F = data.F0
    elif isinstance(F, str):
        if F != "midpoint":
            raise ValueError(f"unknown F option {F!r}")
        F = 0.5 * (data.D + data.E)
    F = np.asarray(F, float)

    geom = data.element
    m = geom.m
    C = geom.coefficients
    oriented = data.oriented(mat)
    lh, mh = oriented.lambda_hat, oriented.mu_hat
    n = data.nbar
    jm = build_jump_matrices(data, mat, F)
    K, Q, Xi = jm.K, jm.Q, jm.Xi

    det_xi = float(np.linalg.det(Xi))
    if abs(det_xi) <= 1e-12 * float(np.linalg.det(jm.P_minus)):
        raise SingularConstruction(
            "IFE coefficient system is singular",
            det=det_xi,
            element=data.element_id,
            d=data.d,
            e=data.e,
            lame=(mat.lambda_minus, mat.lambda_plus, mat.mu_minus, mat.mu_plus),
        )
    Kinv = np.linalg.inv(K)
    KQXiQ = K @ Q @ np.linalg.inv(Xi) @ Q.T

    grads_F = geom.scalar_grads(F)  # (m, 2)
    psiT = [_psibar_T(grads_F[j], lh, mh, n) for j in range(m)]
    Lsite = data.L(geom.sites)
    Im, Ip = data.I_minus, data.I_plus
    Lcoef = geom.line_coefficients(data.D, n)

    def sherman_morrison(rhs):
        """Solve ``K c_j + L(A_j) sum_i Psibar_i^T c_i = rhs_j`` over j in I_minus."""
        Kb = [Kinv @ r for r in rhs]
        w = sum((psiT[j] @ Kb[q] for q, j in enumerate(Im)), np.zeros(2))
        Kz = Kinv @ (KQXiQ @ w)
        return [Kb[q] - Lsite[j] * Kz for q, j in enumerate(Im)]

    def residual(rhs, cs):
        s = sum((psiT[j] @ cs[q] for q, j in enumerate(Im)), np.zeros(2))
        return [rhs[q] - K @ cs[q] - Lsite[j] * s for q, j in enumerate(Im)]

    plus = np.zeros((2 * m, 2, m))
    minus = np.zeros((2 * m, 2, m))
    c0_all = np.zeros((2 * m, 2))
    c_all = np.zeros((2 * m, 2 * len(Im)))
    for k in range(2 * m):
        v = np.zeros((m, 2))
        v[k % m, k // m] = 1.0
        sp = sum((psiT[i] @ v[i] for i in Ip), np.zeros(2))
        b = [K @ v[j] - Lsite[j] * sp for j in Im]
        cs = sherman_morrison(b)
        # the closed form cancels for strong contrasts; one refinement step restores full accuracy
        cs = [c + dc for c, dc in zip(cs, sherman_morrison(residual(b, cs)))]

        nodal = v.copy()
        for q, j in enumerate(Im):
            nodal[j] = cs[q]
        plus[k] = nodal.T @ C.T
        grad_plus = nodal.T @ grads_F  # (2 comps, 2 dirs)
        c0 = Kinv @ traction(grad_plus, lh, mh, n)
        minus[k] = plus[k] + np.outer(c0, Lcoef)
        c0_all[k] = c0
        if Im:
            c_all[k] = np.concatenate(cs)
    return IFEShapeSet(data=data, jm=jm, F=F, minus=minus, plus=plus, c0=c0_all, c=c_all)


def evaluate(shapes: ShapeSet, i: int, X, deriv: str = "value"):
    """Shape ``i`` at point(s) X; ``deriv`` is value, grad or hess."""
    if deriv == "value":
        out = shapes.values(X, check=True)
    elif deriv == "grad":
        out = shapes.grads(X, check=True)
    elif deriv in ("hess", "hessian"):
        out = shapes.hessians(X, check=True)
    else:
        raise ValueError(f"unknown derivative {deriv!r}")
    trailing = {"value": 1, "grad": 2}.get(deriv, 3)
    return out[(Ellipsis, i) + (slice(None),) * trailing]


def check_fundamental_identity(shapes: IFEShapeSet, points, Xbar=None) -> dict:
    """Max residuals of the Lambda identities and of their derivative forms.

    Returns ``{"lambda_minus", "lambda_plus", "d1", "d2"}``; every entry is
    zero up to rounding for a correctly built IFE shape set. ``Xbar`` (a
    point on l) defaults to F0.
    """
    data, jm = shapes.data, shapes.jm
    geom = shapes.geom
    m = geom.m
    A = geom.sites
    Xbar = data.F0 if Xbar is None else np.asarray(Xbar, float)
    X = np.atleast_2d(np.asarray(points, float))
    I4 = np.eye(4)
    sets = {-1: data.I_plus, 1: data.I_minus}  # I^{s'} for s
    Mbar = {-1: jm.Mbar_minus, 1: jm.Mbar_plus}
    deriv_target = [np.hstack([_I2, np.zeros((2, 2))]), np.hstack([np.zeros((2, 2)), _I2])]

    res = {"lambda_minus": 0.0, "lambda_plus": 0.0, "d1": 0.0, "d2": 0.0}
    for s in (-1, 1):
        piece = shapes.minus if s < 0 else shapes.plus
        xi = geom.to_local(X)
        P = monomials(geom.space_kind, xi)
        dP = monomial_grads(geom.space_kind, xi) / geom.h
        d2P = monomial_hessians(geom.space_kind, xi) / geom.h**2
        vals = np.einsum("sck,nk->nsc", piece, P)
        grads = np.einsum("sck,nkd->nscd", piece, dP)
        hess = np.einsum("sck,nkab->nscab", piece, d2P)
        for q, x in enumerate(X):
            Phi = [np.column_stack([vals[q, i], vals[q, i + m]]) for i in range(m)]
            lam = sum(np.kron((A[i] - x)[None, :], Phi[i]) for i in range(m))
            corr = sum((np.kron((A[i] - Xbar)[None, :], Phi[i]) for i in sets[s]), np.zeros((2, 4)))
            lam = lam + corr @ (Mbar[s] - I4)
            key = "lambda_minus" if s < 0 else "lambda_plus"
            res[key] = max(res[key], float(np.abs(lam).max()))
            for j in range(2):
                dPhi = [np.column_stack([grads[q, i, :, j], grads[q, i + m, :, j]]) for i in range(m)]
                t = sum(np.kron((A[i] - x)[None, :], dPhi[i]) for i in range(m))
                t = t + sum((np.kron((A[i] - Xbar)[None, :], dPhi[i]) for i in sets[s]), np.zeros((2, 4))) @ (
                    Mbar[s] - I4
                )
                res["d1"] = max(res["d1"], float(np.abs(t - deriv_target[j]).max()))
                for kk in range(2):
                    hPhi = [np.column_stack([hess[q, i, :, j, kk], hess[q, i + m, :, j, kk]]) for i in range(m)]
                    t2 = sum(np.kron((A[i] - x)[None, :], hPhi[i]) for i in range(m))
                    t2 = t2 + sum(
                        (np.kron((A[i] - Xbar)[None, :], hPhi[i]) for i in sets[s]), np.zeros((2, 4))
                    ) @ (Mbar[s] - I4)
                    res["d2"] = max(res["d2"], float(np.abs(t2).max()))
    return res


# ---------------------------------------------------------------------------
# global space
# ---------------------------------------------------------------------------
@dataclass
class IFESpace:
    """Classification and local shapes for every element of a mesh."""

    dof_map: DofMap
    mat: LameField
    element_side: np.ndarray  # -1/+1 for non-interface elements, 0 for interface elements
    interface_data: dict
    shapes: dict
    F_mode: object = None

    @property
    def mesh(self):
        return self.dof_map.mesh

    @property
    def space_kind(self) -> str:
        return self.dof_map.space_kind

    @property
    def interface(self):
        return self.mat.interface

    @property
    def interface_elements(self) -> np.ndarray:
        return np.flatnonzero(self.element_side == 0)

    def geometry(self, e: int) -> ElementGeometry:
        return element_geometry(self.dof_map, e)

    def shape_set(self, e: int) -> ShapeSet:
        if e in self.shapes:
            return self.shapes[e]
        return StandardShapeSet(self.geometry(e))

    def type_reference(self, t: int) -> ElementGeometry:
        """Geometry of the first element of type ``t`` translated to the origin."""
        e = int(np.flatnonzero(self.mesh.element_type == t)[0])
        g = self.geometry(e)
        return ElementGeometry(
            -1, g.space_kind, np.zeros(2), g.h, g.polygon - g.origin, g.sites - g.origin, g.site_edges
        )


def _candidate_elements(dof_map: DofMap, interface) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized pre-screen: elements whose boundary may meet the interface."""
    mesh = dof_map.mesh
    polys = mesh.vertices[mesh.elements]
    if mesh.kind == "rectangular":
        polys = polys[:, [0, 1, 3, 2]]
    nv = polys.shape[1]
    t = np.linspace(0.0, 1.0, EDGE_SAMPLES)
    a = polys
    b = np.roll(polys, -1, axis=1)
    pts = a[:, :, None, :] + t[None, None, :, None] * (b - a)[:, :, None, :]
    s = interface.phi(pts) >= 0.0
    s = s.reshape(len(polys), -1)
    mixed = s.any(axis=1) & ~s.all(axis=1)
    phi_v = interface.phi(polys)
    g = np.linalg.norm(interface.grad_phi(polys), axis=-1)
    near = np.any(np.abs(phi_v) <= 1e-9 * mesh.h * np.maximum(g, 1e-300), axis=1)
    side = np.where(s[:, 0], 1, -1)
    return mixed | near, side


def build_space(dof_map: DofMap, mat: LameField, F=None) -> IFESpace:
    """Classify all elements and construct IFE shapes on the interface ones."""
    if mat.interface is None:
        raise ValueError("LameField needs an interface to build an IFE space")
    candidates, side = _candidate_elements(dof_map, mat.interface)
    element_side = side.astype(int)
    data, shapes = {}, {}
    for e in np.flatnonzero(candidates):
        e = int(e)
        geom = element_geometry(dof_map, e)
        cls = classify_geometry(geom, mat.interface)
        if isinstance(cls, Side):
            element_side[e] = int(cls)
            continue
        element_side[e] = 0
        data[e] = cls
        shapes[e] = construct_ife_shapes(cls, mat, F)
    return IFESpace(dof_map, mat, element_side, data, shapes, F)
