"""Known coefficients of ``dX = A h(X) dt + Sigma(X) dW``.

Every callable takes points stacked along leading axes, shape (..., d), and
returns the value per point: ``h`` -> (..., d), ``Dh`` -> (..., d, d) with
``Dh[..., i, k] = d h_i / d x_k``, ``Sigma`` and ``Cinv`` -> (..., d, d),
``DCinv`` -> (..., d, d, d) with ``DCinv[..., j, l, n] = d Cinv_{jl} / d x_n``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import InvalidModelError, NumericalDomainError

log = logging.getLogger(__name__)

Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ModelSpec:
    dim: int
    h: Field
    Dh: Field
    Sigma: Field
    Cinv: Field
    DCinv: Optional[Field] = None
    name: str = "custom"

    def C(self, x: np.ndarray) -> np.ndarray:
        s = self.Sigma(x)
        return s @ np.swapaxes(s, -1, -2)

    def dcinv(self, x: np.ndarray) -> np.ndarray:
        """Derivative of ``Cinv``; central differences when none was supplied."""
        if self.DCinv is not None:
            return self.DCinv(x)
        log.warning("model %r has no analytic DCinv, using finite differences", self.name)
        return finite_difference(self.Cinv, x)

    def with_cinv_scaled(self, lam: float) -> "ModelSpec":
        """Same model with ``Cinv`` multiplied by ``lam`` (Sigma untouched)."""
        cinv, dcinv = self.Cinv, self.DCinv
        return replace(
            self,
            Cinv=lambda x: lam * cinv(x),
            DCinv=None if dcinv is None else (lambda x: lam * dcinv(x)),
            name=f"{self.name}*{lam:g}",
        )


def finite_difference(f: Field, x: np.ndarray) -> np.ndarray:
    """Central differences with step ``1e-6 * (1 + |x_n|)``, derivative axis last."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    cols = []
    for n in range(d):
        step = 1e-6 * (1.0 + np.abs(x[..., n]))
        e = np.zeros(d)
        e[n] = 1.0
        shift = step[..., None] * e
        num = np.asarray(f(x + shift)) - np.asarray(f(x - shift))
        cols.append(num / (2 * step.reshape(step.shape + (1,) * (num.ndim - step.ndim))))
    out = np.stack(cols, axis=-1)
    if not np.all(np.isfinite(out)):
        raise NumericalDomainError("non-finite finite-difference derivative")
    return out


def _const(mat: np.ndarray) -> Field:
    mat = np.array(mat, dtype=float)
    return lambda x: np.broadcast_to(mat, np.shape(x)[:-1] + mat.shape)


def _identity_h(x):
    return np.asarray(x, dtype=float)


def _cubic_h(x):
    x = np.asarray(x, dtype=float)
    return x + x**3


def _cubic_dh(x):
    x = np.asarray(x, dtype=float)
    return (1.0 + 3.0 * x**2)[..., None] * np.eye(x.shape[-1])


def _identity_dh(x):
    d = np.shape(x)[-1]
    return np.broadcast_to(np.eye(d), np.shape(x) + (d,))


H_SELECTORS = {
    "identity": (_identity_h, _identity_dh),
    "cubic": (_cubic_h, _cubic_dh),
}


def constant_sigma_model(dim: int, sigma, h: str = "identity") -> ModelSpec:
    """Model with constant diffusion matrix; ``sigma`` scalar means ``sigma * I``."""
    sig = np.asarray(sigma, dtype=float)
    if sig.ndim == 0:
        if not sig > 0:
            raise InvalidModelError(f"sigma must be positive, got {sigma}")
        sig = float(sig) * np.eye(dim)
    if sig.shape != (dim, dim):
        raise InvalidModelError(f"Sigma must be {dim}x{dim}, got {sig.shape}")
    cmat = sig @ sig.T
    try:
        cinv = np.linalg.inv(cmat)
    except np.linalg.LinAlgError as exc:
        raise InvalidModelError("Sigma Sigma^T is singular") from exc
    if h not in H_SELECTORS:
        raise InvalidModelError(f"unknown h selector {h!r}")
    hf, dhf = H_SELECTORS[h]
    return ModelSpec(
        dim=dim,
        h=hf,
        Dh=dhf,
        Sigma=_const(sig),
        Cinv=_const(cinv),
        DCinv=_const(np.zeros((dim, dim, dim))),
        name=f"{h}-sigma",
    )


def ou_model(dim: int, sigma=1.0) -> ModelSpec:
    """Ornstein-Uhlenbeck: ``h(x) = x`` and constant ``Sigma``."""
    return constant_sigma_model(dim, sigma, "identity")


def check_model(m: ModelSpec, points, tol: float = 1e-8) -> None:
    """Verify ``Cinv C = I`` and positive definiteness of ``Cinv`` at ``points``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[-1] != m.dim:
        raise InvalidModelError(f"points have dimension {pts.shape[-1]}, model {m.dim}")
    cinv = np.asarray(m.Cinv(pts))
    prod = cinv @ m.C(pts)
    if not np.allclose(prod, np.eye(m.dim), atol=tol, rtol=0):
        raise InvalidModelError("Cinv is not the inverse of Sigma Sigma^T")
    if not np.allclose(cinv, np.swapaxes(cinv, -1, -2), atol=tol):
        raise InvalidModelError("Cinv is not symmetric")
    if np.min(np.linalg.eigvalsh(cinv)) <= 0:
        raise InvalidModelError("Cinv is not positive definite")
