"""Manufactured interface solution with an elliptic interface.

With ``s = x^2/a^2 + y^2/b^2`` and ``r = sqrt(s)`` (so r = 1 on the interface),
each component is ``u_k = c r^alpha_k + shift`` with
``c = a^2 b^2 / lambda`` on either side and
``shift = (1/lambda_minus - 1/lambda_plus) a^2 b^2`` on the plus side only.
Displacement is continuous across r = 1 and, when ``mu / lambda`` is the same
on both sides, so is the traction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Ellipse, LameField

DEFAULT_AXIS = np.pi / 6.28
DEFAULT_ALPHA = (5.0, 7.0)


def _pow(s, q):
    """``s ** q`` with the value at s = 0 set to 0 for negative q."""
    if q >= 0:
        return s**q
    with np.errstate(divide="ignore"):
        return np.where(s > 0, s ** q, 0.0)


@dataclass(frozen=True)
class ExactSolution:
    a: float
    b: float
    alpha: tuple
    mat: LameField

    @property
    def interface(self) -> Ellipse:
        return Ellipse(self.a, self.b)

    def side(self, X) -> np.ndarray:
        return self.interface.side(X)

    def _coeffs(self, side):
        lm, lp = self.mat.lambda_minus, self.mat.lambda_plus
        ab2 = self.a**2 * self.b**2
        c = np.where(side > 0, ab2 / lp, ab2 / lm)
        shift = np.where(side > 0, (1.0 / lm - 1.0 / lp) * ab2, 0.0)
        return c, shift

    def _s(self, X):
        x, y = X[..., 0], X[..., 1]
        s = x * x / self.a**2 + y * y / self.b**2
        ds = np.stack([2 * x / self.a**2, 2 * y / self.b**2], axis=-1)
        d2s = np.diag([2 / self.a**2, 2 / self.b**2])
        return s, ds, d2s

    def _resolve(self, X, side):
        X = np.asarray(X, float)
        return X, (self.side(X) if side is None else np.asarray(side))

    def u(self, X, side=None) -> np.ndarray:
        X, side = self._resolve(X, side)
        s, _, _ = self._s(X)
        c, shift = self._coeffs(side)
        return np.stack([c * s ** (al / 2) + shift for al in self.alpha], axis=-1)

    __call__ = u

    def grad(self, X, side=None) -> np.ndarray:
        """(..., 2, 2) with ``[i, j] = d u_i / d x_j``."""
        X, side = self._resolve(X, side)
        s, ds, _ = self._s(X)
        c, _ = self._coeffs(side)
        rows = []
        for al in self.alpha:
            p = al / 2
            rows.append((c * p * _pow(s, p - 1))[..., None] * ds)
        return np.stack(rows, axis=-2)

    def hessian(self, X, side=None) -> np.ndarray:
        """(..., 2, 2, 2) with ``[i, j, k] = d^2 u_i / d x_j d x_k``."""
        X, side = self._resolve(X, side)
        s, ds, d2s = self._s(X)
        c, _ = self._coeffs(side)
        out = []
        for al in self.alpha:
            p = al / 2
            outer = ds[..., :, None] * ds[..., None, :]
            H = (p * (p - 1) * _pow(s, p - 2))[..., None, None] * outer + (p * _pow(s, p - 1))[..., None, None] * d2s
            out.append(c[..., None, None] * H)
        return np.stack(out, axis=-3)

    def lame(self, side):
        side = np.asarray(side)
        lam = np.where(side > 0, self.mat.lambda_plus, self.mat.lambda_minus)
        mu = np.where(side > 0, self.mat.mu_plus, self.mat.mu_minus)
        return lam, mu

    def f(self, X, side=None) -> np.ndarray:
        """Body force ``-div sigma(u) = -[(lambda + mu) grad div u + mu Laplace u]``."""
        X, side = self._resolve(X, side)
        H = self.hessian(X, side)
        lam, mu = self.lame(side)
        grad_div = H[..., 0, 0, :] + H[..., 1, 1, :]
        lap = H[..., 0, 0] + H[..., 1, 1]
        return -((lam + mu)[..., None] * grad_div + mu[..., None] * lap)

    def stress(self, X, side=None) -> np.ndarray:
        X, side = self._resolve(X, side)
        G = self.grad(X, side)
        lam, mu = self.lame(side)
        div = G[..., 0, 0] + G[..., 1, 1]
        return lam[..., None, None] * div[..., None, None] * np.eye(2) + mu[..., None, None] * (
            G + np.swapaxes(G, -1, -2)
        )


def elliptic_power_solution(
    a: float = DEFAULT_AXIS,
    b: float = DEFAULT_AXIS,
    alpha=DEFAULT_ALPHA,
    lambda_minus: float = 1.0,
    lambda_plus: float = 5.0,
    mu_minus: float = 2.0,
    mu_plus: float = 10.0,
) -> ExactSolution:
    """The benchmark solution; the defaults are the reference configuration."""
    alpha = tuple(float(v) for v in alpha)
    if len(alpha) != 2:
        raise ValueError("alpha needs two exponents")
    if min(alpha) < 2:
        raise ValueError("exponents below 2 leave u outside H^2")
    iface = Ellipse(a, b)
    return ExactSolution(a, b, alpha, LameField(lambda_minus, lambda_plus, mu_minus, mu_plus, iface))
