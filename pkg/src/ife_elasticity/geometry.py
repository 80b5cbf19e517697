"""Level-set interfaces, interface-element classification and jump-condition matrices."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np
from scipy.optimize import brentq

from .basis import ElementGeometry, element_geometry
from .errors import DegenerateGeometryError, HypothesisViolation, IFEError
from .mesh import DofMap

SNAP_TOL = 1e-10
ROOT_TOL = 1e-14
EDGE_SAMPLES = 17


class Side(IntEnum):
    MINUS = -1
    PLUS = 1


# ---------------------------------------------------------------------------
# interfaces and materials
# ---------------------------------------------------------------------------
class LevelSetInterface:
    """Interface as the zero set of ``phi``; ``phi < 0`` is the minus region."""

    name = "level_set"

    def phi(self, X) -> np.ndarray:
        raise NotImplementedError

    def grad_phi(self, X) -> np.ndarray:
        raise NotImplementedError

    def side(self, X) -> np.ndarray:
        """+1 where phi >= 0, -1 elsewhere."""
        return np.where(self.phi(X) >= 0.0, 1, -1)


@dataclass(frozen=True)
class Ellipse(LevelSetInterface):
    """``phi = (x - cx)^2 / a^2 + (y - cy)^2 / b^2 - 1``."""

    a: float
    b: float
    center: tuple = (0.0, 0.0)
    name = "ellipse"

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("ellipse semi-axes must be positive")

    def phi(self, X):
        X = np.asarray(X, float)
        x = X[..., 0] - self.center[0]
        y = X[..., 1] - self.center[1]
        return x * x / self.a**2 + y * y / self.b**2 - 1.0

    def grad_phi(self, X):
        X = np.asarray(X, float)
        x = X[..., 0] - self.center[0]
        y = X[..., 1] - self.center[1]
        return np.stack([2 * x / self.a**2, 2 * y / self.b**2], axis=-1)

    def radius_param(self, X):
        """sqrt(phi + 1): equals 1 on the interface."""
        return np.sqrt(np.maximum(self.phi(X) + 1.0, 0.0))


@dataclass(frozen=True)
class LineInterface(LevelSetInterface):
    """Straight interface ``phi = normal . (X - point)``; exact cuts for tests."""

    normal: tuple
    point: tuple
    name = "line"

    def phi(self, X):
        X = np.asarray(X, float)
        n = np.asarray(self.normal, float)
        return (X - np.asarray(self.point, float)) @ n

    def grad_phi(self, X):
        X = np.asarray(X, float)
        return np.broadcast_to(np.asarray(self.normal, float), X.shape).copy()


def make_interface(name: str, **params) -> LevelSetInterface:
    """Level-set catalog: ``ellipse`` (a, b[, cx, cy]), ``circle`` (radius), ``line``."""
    name = name.strip().lower()
    if name == "ellipse":
        center = (float(params.get("cx", 0.0)), float(params.get("cy", 0.0)))
        return Ellipse(float(params["a"]), float(params["b"]), center)
    if name == "circle":
        r = float(params.get("radius", params.get("a", 1.0)))
        return Ellipse(r, r, (float(params.get("cx", 0.0)), float(params.get("cy", 0.0))))
    if name == "line":
        return LineInterface(tuple(params["normal"]), tuple(params["point"]))
    raise ValueError(f"unknown interface {name!r}")


@dataclass(frozen=True)
class LameField:
    lambda_minus: float
    lambda_plus: float
    mu_minus: float
    mu_plus: float
    interface: LevelSetInterface | None = None

    def __post_init__(self):
        vals = (self.lambda_minus, self.lambda_plus, self.mu_minus, self.mu_plus)
        if not all(v > 0 for v in vals):
            raise ValueError(f"Lame parameters must be positive, got {vals}")

    @property
    def lambda_hat(self) -> float:
        return self.lambda_plus - self.lambda_minus

    @property
    def mu_hat(self) -> float:
        return self.mu_plus - self.mu_minus

    def swapped(self) -> "LameField":
        return replace(
            self,
            lambda_minus=self.lambda_plus,
            lambda_plus=self.lambda_minus,
            mu_minus=self.mu_plus,
            mu_plus=self.mu_minus,
        )

    def params(self, side: int) -> tuple[float, float]:
        """(lambda, mu) on the given side."""
        if side < 0:
            return self.lambda_minus, self.mu_minus
        return self.lambda_plus, self.mu_plus

    @property
    def matched(self) -> bool:
        return self.lambda_minus == self.lambda_plus and self.mu_minus == self.mu_plus


# ---------------------------------------------------------------------------
# interface-element data
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class InterfaceElementData:
    """Geometry of one cut element, in construction labeling.

    ``minus``/``plus`` below refer to the labeling used to build IFE shapes,
    which always satisfies |I_plus| >= |I_minus|. When the physical minus
    side holds more DOF sites the roles are exchanged and ``swapped`` is set;
    ``oriented(mat)`` gives the matching material. ``nbar`` points into the
    construction-plus side.
    """

    element: ElementGeometry
    D: np.ndarray
    E: np.ndarray
    D_edge: int
    E_edge: int
    nbar: np.ndarray
    case_label: str
    d: float
    e: float
    t0: float
    F0: np.ndarray
    I_minus: tuple
    I_plus: tuple
    site_sides: np.ndarray  # physical side (+1/-1) of each DOF site
    swapped: bool

    @property
    def element_id(self) -> int:
        return self.element.element_id

    @property
    def tbar(self) -> np.ndarray:
        return np.array([self.nbar[1], -self.nbar[0]])

    @property
    def vertex_signs(self) -> np.ndarray:
        return self.site_sides

    def L(self, X) -> np.ndarray:
        """Signed distance-like function of the line l; >= 0 on the construction-plus side."""
        return (np.asarray(X, float) - self.D) @ self.nbar

    def oriented(self, mat: LameField) -> LameField:
        return mat.swapped() if self.swapped else mat

    def physical_side(self, construction_side: int) -> int:
        return -construction_side if self.swapped else construction_side


def find_edge_intersection(interface: LevelSetInterface, P0, P1, tol: float = ROOT_TOL) -> np.ndarray:
    """Zero of ``phi`` on the segment P0-P1, located to ``tol * |P1 - P0|``."""
    P0 = np.asarray(P0, float)
    P1 = np.asarray(P1, float)
    f0 = float(interface.phi(P0))
    f1 = float(interface.phi(P1))
    if f0 == 0.0:
        return P0.copy()
    if f1 == 0.0:
        return P1.copy()
    if f0 * f1 > 0:
        raise IFEError("no sign change of phi on segment", P0=P0.tolist(), P1=P1.tolist())
    seg = P1 - P0
    try:
        t, info = brentq(
            lambda t: float(interface.phi(P0 + t * seg)), 0.0, 1.0, xtol=tol, maxiter=100, full_output=True
        )
    except RuntimeError as exc:
        raise IFEError("edge intersection did not converge", P0=P0.tolist(), P1=P1.tolist()) from exc
    if not info.converged:
        raise IFEError("edge intersection did not converge", P0=P0.tolist(), P1=P1.tolist())
    return P0 + t * seg


def select_F0(case_label: str, d: float, e: float, D, E) -> tuple[float, np.ndarray]:
    """Point ``F0 = t0 D + (1 - t0) E`` on l where the traction jump is imposed."""
    D = np.asarray(D, float)
    E = np.asarray(E, float)
    if case_label == "Bil1":
        if d + e <= 0.0:
            raise DegenerateGeometryError("Bil1 cut with d + e = 0", d=d, e=e)
        t0 = e / (d + e)
    elif case_label == "Bil2":
        # e > d branch: t0 = d (mirror image of the d >= e branch)
        t0 = 1.0 - e if d >= e else d
    elif case_label in ("RQ2", "RQ3"):
        t0 = 1.0 if d >= e else 0.0
    else:
        # RQ4/RQ5 by rule; RQ1 and linear do not depend on F
        t0 = 0.5
    return t0, t0 * D + (1.0 - t0) * E


def _on_segment(X, a, b, tol) -> bool:
    ab = b - a
    L2 = ab @ ab
    t = np.clip((X - a) @ ab / L2, 0.0, 1.0)
    return np.linalg.norm(a + t * ab - X) <= tol


def build_interface_data(
    geom: ElementGeometry, D, E, D_edge: int, E_edge: int, plus_point=None, plus_side: int = 1
) -> InterfaceElementData:
    """Assemble interface data from the two cut points.

    ``plus_point`` is any point whose physical side ``plus_side`` is known;
    by default the polygon vertex farthest from l, which must then be given
    through ``plus_side``.
    """
    D = np.asarray(D, float)
    E = np.asarray(E, float)
    h = geom.h
    P = geom.polygon
    nv = len(P)
    tang = E - D
    length = np.linalg.norm(tang)
    if length <= SNAP_TOL * h:
        raise DegenerateGeometryError("cut points coincide", element=geom.element_id)
    nbar = np.array([tang[1], -tang[0]]) / length
    if plus_point is None:
        raise ValueError("plus_point is required")
    if np.dot(nbar, np.asarray(plus_point, float) - D) * plus_side < 0:
        nbar = -nbar

    Lsites = (geom.sites - D) @ nbar
    site_sides = np.where(Lsites >= -1e-12 * h, 1, -1)
    n_minus = int(np.sum(site_sides < 0))
    swapped = n_minus > geom.m - n_minus
    if swapped:
        nbar = -nbar
    c_sides = -site_sides if swapped else site_sides
    I_minus = tuple(int(i) for i in np.flatnonzero(c_sides < 0))
    I_plus = tuple(int(i) for i in np.flatnonzero(c_sides > 0))

    kind = geom.space_kind
    adjacent = nv == 3 or (D_edge - E_edge) % 4 in (1, 3)
    if adjacent:
        if {D_edge, E_edge} == {0, nv - 1}:
            corner = 0
        else:
            corner = max(D_edge, E_edge)
        Cv = P[corner]
        d = np.linalg.norm(D - Cv) / h
        e = np.linalg.norm(E - Cv) / h
        if kind == "linear":
            case = "Lin1" if corner == 0 else "Lin2"
        elif kind == "bilinear":
            case = "Bil1"
        else:
            corner_side = 1 if np.dot(nbar, Cv - D) >= 0 else -1
            count = int(np.sum(c_sides == corner_side))
            case = ("RQ1", "RQ2", "RQ3")[min(count, 2)]
    else:
        # canonical: D on bottom (left), E on top (right); offsets from x0 (y0)
        if {D_edge, E_edge} == {0, 2}:
            if D_edge != 0:
                D, E, D_edge, E_edge = E, D, E_edge, D_edge
            d = (D[0] - geom.origin[0]) / h
            e = (E[0] - geom.origin[0]) / h
        else:
            if D_edge != 3:
                D, E, D_edge, E_edge = E, D, E_edge, D_edge
            d = (D[1] - geom.origin[1]) / h
            e = (E[1] - geom.origin[1]) / h
        if kind == "bilinear":
            case = "Bil2"
        else:
            case = "RQ4" if len(I_minus) <= 1 else "RQ5"
    d = float(np.clip(d, 0.0, 1.0))
    e = float(np.clip(e, 0.0, 1.0))
    t0, F0 = select_F0(case, d, e, D, E)
    return InterfaceElementData(
        element=geom,
        D=D,
        E=E,
        D_edge=int(D_edge),
        E_edge=int(E_edge),
        nbar=nbar,
        case_label=case,
        d=d,
        e=e,
        t0=float(t0),
        F0=F0,
        I_minus=I_minus,
        I_plus=I_plus,
        site_sides=site_sides,
        swapped=bool(swapped),
    )


def _snapped_phi(interface, P, h):
    phi = np.asarray(interface.phi(P), float).copy()
    g = np.linalg.norm(interface.grad_phi(P), axis=-1)
    phi[np.abs(phi) <= SNAP_TOL * h * g] = 0.0
    return phi


def classify_geometry(geom: ElementGeometry, interface: LevelSetInterface):
    """Classify one element; returns a :class:`Side` or :class:`InterfaceElementData`."""
    P = geom.polygon
    h = geom.h
    nv = len(P)
    phi = _snapped_phi(interface, P, h)
    signs = np.where(phi >= 0.0, 1, -1)

    # sampled edges catch an interface entering and leaving through one edge
    t = np.linspace(0.0, 1.0, EDGE_SAMPLES)[1:-1]
    for k in range(nv):
        a, b = P[k], P[(k + 1) % nv]
        inner = np.where(interface.phi(a + t[:, None] * (b - a)) >= 0, 1, -1)
        s = np.concatenate([[signs[k]], inner, [signs[(k + 1) % nv]]])
        changes = int(np.sum(s[1:] != s[:-1]))
        if changes > 1:
            raise HypothesisViolation(
                "(H2) interface crosses one element edge more than once",
                element=geom.element_id,
                edge=k,
            )

    cut_edges = [k for k in range(nv) if signs[k] != signs[(k + 1) % nv]]
    if not cut_edges:
        return Side(int(signs[0]))
    if len(cut_edges) != 2:
        raise HypothesisViolation(
            "(H1) interface meets the element boundary at more than two points",
            element=geom.element_id,
            n_cut_edges=len(cut_edges),
        )

    points = []
    for k in cut_edges:
        a, b = P[k], P[(k + 1) % nv]
        ka, kb = k, (k + 1) % nv
        if phi[ka] == 0.0:
            X = a.copy()
        elif phi[kb] == 0.0:
            X = b.copy()
        else:
            X = find_edge_intersection(interface, a, b)
        dist = np.linalg.norm(P - X, axis=1)
        j = int(np.argmin(dist))
        if dist[j] <= SNAP_TOL * h:
            X = P[j].copy()
        points.append(X)
    D, E = points

    untouched = np.linalg.norm(D - E) <= SNAP_TOL * h or any(
        _on_segment(D, P[k], P[(k + 1) % nv], SNAP_TOL * h) and _on_segment(E, P[k], P[(k + 1) % nv], SNAP_TOL * h)
        for k in range(nv)
    )
    if untouched:
        centroid = P.mean(axis=0)
        return Side(1 if interface.phi(centroid) >= 0 else -1)

    Lv = np.abs((P - D) @ np.array([(E - D)[1], -(E - D)[0]]))
    far = int(np.argmax(Lv))
    return build_interface_data(geom, D, E, cut_edges[0], cut_edges[1], plus_point=P[far], plus_side=int(signs[far]))


def classify_element(dof_map: DofMap, interface: LevelSetInterface, element_id: int):
    """Classify element ``element_id`` of the mesh behind ``dof_map``."""
    return classify_geometry(element_geometry(dof_map, element_id), interface)


# ---------------------------------------------------------------------------
# jump matrices
# ---------------------------------------------------------------------------
def traction(G, lam, mu, n) -> np.ndarray:
    """``sigma(u) n`` for a displacement gradient ``G[i, j] = d u_i / d x_j``."""
    G = np.asarray(G, float)
    return lam * np.trace(G) * n + mu * (G + G.T) @ n


def nbar_matrix(n, lam, mu) -> np.ndarray:
    """Maps Vec(grad u) = (u1_x, u2_x, u1_y, u2_y) to (sigma n, tangential derivatives)."""
    n1, n2 = n
    return np.array(
        [
            [(lam + 2 * mu) * n1, mu * n2, mu * n2, lam * n1],
            [lam * n2, mu * n1, mu * n1, (lam + 2 * mu) * n2],
            [-n2, 0.0, n1, 0.0],
            [0.0, -n2, 0.0, n1],
        ]
    )


def _rotated_nbar(lam, mu):
    """N-bar in the (n, t) frame, where it is nearly triangular, and its inverse."""
    one, zero = np.longdouble(1), np.longdouble(0)
    lam, mu = np.longdouble(lam), np.longdouble(mu)
    a = lam + 2 * mu
    N = np.array([[a, zero, zero, lam], [zero, mu, mu, zero], [zero, zero, one, zero], [zero, zero, zero, one]])
    Ninv = np.array(
        [[one / a, zero, zero, -lam / a], [zero, one / mu, -one, zero], [zero, zero, one, zero], [zero, zero, zero, one]]
    )
    return N, Ninv


def mbar_matrices(n, lam_minus, mu_minus, lam_plus, mu_plus) -> tuple[np.ndarray, np.ndarray]:
    """``(inv(N+) N-, inv(N-) N+)`` from the closed-form inverse in the (n, t) frame.

    Evaluated in extended precision and rounded once, so that the 4x4 products
    keep full double accuracy even for material contrasts of order 1e6.
    """
    n = np.asarray(n, float).astype(np.longdouble)
    R = np.array([[n[0], -n[1]], [n[1], n[0]]])
    T = np.kron(R, R)  # Vec(grad u) = T Vec(rotated gradient)
    Nm, Nm_inv = _rotated_nbar(lam_minus, mu_minus)
    Np, Np_inv = _rotated_nbar(lam_plus, mu_plus)
    Mm = T @ (Np_inv @ Nm) @ T.T
    Mp = T @ (Nm_inv @ Np) @ T.T
    return Mm.astype(float), Mp.astype(float)


@dataclass(frozen=True)
class JumpMatrices:
    Nbar_minus: np.ndarray
    Nbar_plus: np.ndarray
    Mbar_minus: np.ndarray
    Mbar_plus: np.ndarray
    K: np.ndarray
    Q: np.ndarray
    P_minus: np.ndarray
    Xi: np.ndarray
    g_n: float
    g_t: float
    F: np.ndarray


def gn_gt(data: InterfaceElementData, F) -> tuple[float, float]:
    geom = data.element
    grads = geom.scalar_grads(np.asarray(F, float))  # (m, 2)
    G = np.zeros(2)
    for i in data.I_minus:
        G += data.L(geom.sites[i]) * grads[i]
    return float(G @ data.nbar), float(G @ data.tbar)


def build_jump_matrices(data: InterfaceElementData, mat: LameField, F=None) -> JumpMatrices:
    """All jump-condition matrices of one interface element, evaluated at ``F`` (default F0)."""
    F = data.F0 if F is None else np.asarray(F, float)
    m = data.oriented(mat)
    n = data.nbar
    Nm = nbar_matrix(n, m.lambda_minus, m.mu_minus)
    Np = nbar_matrix(n, m.lambda_plus, m.mu_plus)
    for N in (Nm, Np):
        if np.linalg.cond(N) > 1e12:
            raise IFEError("jump matrix conditioning exceeds 1e12", element=data.element_id)
    Mm, Mp = mbar_matrices(n, m.lambda_minus, m.mu_minus, m.lambda_plus, m.mu_plus)
    Q = np.column_stack([n, data.tbar])
    Pm = np.diag([m.lambda_minus + 2 * m.mu_minus, m.mu_minus])
    K = Q @ Pm @ Q.T
    g_n, g_t = gn_gt(data, F)
    lh, mh = m.lambda_hat, m.mu_hat
    Xi = Pm + np.array([[(lh + 2 * mh) * g_n, lh * g_t], [mh * g_t, mh * g_n]])
    return JumpMatrices(Nm, Np, Mm, Mp, K, Q, Pm, Xi, g_n, g_t, F)


@dataclass(frozen=True)
class UnisolvenceReport:
    det_Xi: float
    bound: float
    ok: bool
    system_det: float | None = None


def check_unisolvence_bound(jm: JumpMatrices, mat: LameField, data: InterfaceElementData | None = None):
    """Compare Det(Xi) with ``2 min(mu)^2``.

    For linear elements there is no such bound; pass ``data`` to get the
    determinant of the full coefficient system instead, ``ok`` then meaning
    it is numerically nonzero.
    """
    det_xi = float(np.linalg.det(jm.Xi))
    bound = 2.0 * min(mat.mu_minus, mat.mu_plus) ** 2
    if data is not None and data.element.space_kind == "linear":
        k = len(data.I_minus)
        det_sys = float(np.linalg.det(jm.K)) ** (k - 1) * det_xi
        scale = float(np.linalg.det(jm.P_minus)) ** k
        return UnisolvenceReport(det_xi, bound, abs(det_sys) > 1e-12 * scale, det_sys)
    return UnisolvenceReport(det_xi, bound, det_xi >= bound * (1.0 - 1e-12))
