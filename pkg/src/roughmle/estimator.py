"""Maximum likelihood drift estimators, classical and rough.

For ``dX = A h(X) dt + Sigma(X) dW`` with ``C = Sigma Sigma^T`` the MLE
solves ``I_T A_hat = S_T``. Layout: ``A_hat[j, k]`` multiplies ``h_k`` in
the j-th drift component, and matrices on R^{d x d} are flattened row-major,
so ``information[(j, k), (j', k')] = int Cinv_{jj'} h_k h_k' ds`` and
``score[j, k] = sum_l int h_k Cinv_{jl} dX_l``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import (
    InvalidModelError,
    NumericalDomainError,
    SingularInformationError,
    UnsupportedError,
)
from .gridpath import Path, left_riemann
from .models import ModelSpec
from .roughcore import RoughPath, area, ito_integral, rough_integral

SINGULARITY_RTOL = 1e-8
SPAN_RTOL = 1e-8
METHODS = ("classical", "rough", "ou2d", "scalar_ou")


@dataclass(frozen=True, eq=False)
class DriftEstimate:
    a_hat: np.ndarray
    information: np.ndarray
    score: np.ndarray
    min_eigenvalue: float
    condition: float
    method: str = "classical"

    def to_json(self) -> str:
        return json.dumps(
            {
                "a_hat": self.a_hat.ravel().tolist(),
                "min_eigenvalue": self.min_eigenvalue,
                "condition": self.condition,
                "score": self.score.ravel().tolist(),
                "method": self.method,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "DriftEstimate":
        obj = json.loads(text)
        a = np.asarray(obj["a_hat"], dtype=float)
        d = int(round(np.sqrt(a.size)))
        if obj.get("method") not in METHODS:
            raise ValueError(f"unknown method {obj.get('method')!r}")
        return cls(
            a_hat=a.reshape(d, d),
            information=np.full((d * d, d * d), np.nan),
            score=np.asarray(obj["score"], dtype=float).reshape(d, d),
            min_eigenvalue=float(obj["min_eigenvalue"]),
            condition=float(obj["condition"]),
            method=obj["method"],
        )


@dataclass(frozen=True)
class SpanDiagnostic:
    spans: bool
    lambda_min: float


@dataclass(frozen=True)
class AreaDecomposition:
    """``a1 = regular + U * area / 2`` for the 2-D OU estimator's first entry.

    ``regular`` and ``U`` only involve Riemann integrals and endpoints; all
    of the sup-norm discontinuity sits in ``area``.
    """

    U: float
    area: float
    regular: float
    a1: float


def _check_dims(P: Path, m: ModelSpec) -> None:
    if P.dim != m.dim:
        raise InvalidModelError(f"path has dimension {P.dim}, model {m.dim}")


def _eval(f, x, shape, what):
    out = np.asarray(f(x), dtype=float)
    if out.shape != shape:
        raise InvalidModelError(f"{what} returned shape {out.shape}, expected {shape}")
    return out


def information_matrix(P: Path, m: ModelSpec) -> np.ndarray:
    """``int h (x) Cinv (x) h ds`` as a (d^2, d^2) matrix (left-point sum)."""
    _check_dims(P, m)
    n, d = P.values.shape
    x = P.values
    hx = _eval(m.h, x, (n, d), "h")
    cinv = _eval(m.Cinv, x, (n, d, d), "Cinv")
    integrand = np.einsum("njJ,nk,nK->njkJK", cinv, hx, hx)
    info = left_riemann(integrand, P.grid).reshape(d * d, d * d)
    return 0.5 * (info + info.T)


def _score_form(m: ModelSpec, x: np.ndarray) -> np.ndarray:
    n, d = x.shape
    hx = _eval(m.h, x, (n, d), "h")
    cinv = _eval(m.Cinv, x, (n, d, d), "Cinv")
    return np.einsum("nk,njl->njkl", hx, cinv).reshape(n, d * d, d)


def ito_score(P: Path, m: ModelSpec) -> np.ndarray:
    """``S[j, k] = sum_l int h_k Cinv_{jl} dX_l`` with left-point sums."""
    _check_dims(P, m)
    d = P.dim
    return ito_integral(lambda x: _score_form(m, x), P).reshape(d, d)


def _score_derivative(m: ModelSpec, x: np.ndarray) -> np.ndarray:
    """``D(h_k Cinv_{jl})`` in the direction ``n``, shape (N, d*d, d, d)."""
    n, d = x.shape
    hx = _eval(m.h, x, (n, d), "h")
    dh = _eval(m.Dh, x, (n, d, d), "Dh")
    cinv = _eval(m.Cinv, x, (n, d, d), "Cinv")
    dcinv = np.asarray(m.dcinv(x), dtype=float)
    if dcinv.shape != (n, d, d, d):
        raise InvalidModelError(f"DCinv returned shape {dcinv.shape}")
    out = np.einsum("nkq,njl->njklq", dh, cinv) + np.einsum("nk,njlq->njklq", hx, dcinv)
    if not np.all(np.isfinite(out)):
        raise NumericalDomainError("non-finite derivative in the rough score integrand")
    return out.reshape(n, d * d, d, d)


def rough_score(R: RoughPath, m: ModelSpec) -> np.ndarray:
    """Rough-integral score minus the Ito-Stratonovich trace correction.

    ``S[j, k] = int h_k Cinv_{j.} dX  -  1/2 int Tr[D(h_k Cinv_{j.}) C] ds``
    where the first integral is the compensated sum against ``R``.
    """
    P = R.path
    _check_dims(P, m)
    d = P.dim
    x = P.values
    integral = rough_integral(
        lambda y: _score_form(m, y), lambda y: _score_derivative(m, y), R
    )
    n = x.shape[0]
    cmat = _eval(m.C, x, (n, d, d), "Sigma Sigma^T")
    trace = np.einsum("ipln,inl->ip", _score_derivative(m, x), cmat)
    correction = 0.5 * left_riemann(trace, P.grid)
    return (integral - correction).reshape(d, d)


def _solve(info: np.ndarray, score: np.ndarray, method: str) -> DriftEstimate:
    d2 = info.shape[0]
    d = score.shape[0]
    eig = linalg.eigvalsh(info)
    lam_min, lam_max = float(eig[0]), float(eig[-1])
    threshold = SINGULARITY_RTOL * max(float(np.trace(info)), 0.0) / d2
    if not lam_min > threshold:
        raise SingularInformationError(
            "information matrix is singular (lambda_min = "
            f"{lam_min:.3g}): span{{h(X_t)}} does not fill R^{d}",
            min_eigenvalue=lam_min,
        )
    factor = linalg.cho_factor(info)
    a_hat = linalg.cho_solve(factor, score.ravel()).reshape(d, d)
    return DriftEstimate(
        a_hat=a_hat,
        information=info,
        score=score,
        min_eigenvalue=lam_min,
        condition=lam_max / lam_min,
        method=method,
    )


def classical_mle(P: Path, m: ModelSpec) -> DriftEstimate:
    """``A_hat = I_T^{-1} S_T`` with the Ito score."""
    return _solve(information_matrix(P, m), ito_score(P, m), "classical")


def rough_mle(R: RoughPath, m: ModelSpec) -> DriftEstimate:
    """``A_hat = I_T^{-1} S_T`` with the rough score, continuous in ``R``."""
    return _solve(information_matrix(R.path, m), rough_score(R, m), "rough")


def full_span_diagnostic(P: Path, m: ModelSpec) -> SpanDiagnostic:
    """Smallest eigenvalue of ``(1/T) int h(X) h(X)^T ds``."""
    _check_dims(P, m)
    n, d = P.values.shape
    hx = _eval(m.h, P.values, (n, d), "h")
    gram = left_riemann(np.einsum("na,nb->nab", hx, hx), P.grid) / P.grid.horizon
    lam = float(linalg.eigvalsh(0.5 * (gram + gram.T))[0])
    return SpanDiagnostic(bool(lam > SPAN_RTOL * float(np.trace(gram))), lam)


def scalar_ou_closed_form(P: Path, sigma: float) -> float:
    """``(X_T^2 - x_0^2 - sigma^2 T) / (2 int X^2 dt)`` with a left-point denominator."""
    if P.dim != 1:
        raise UnsupportedError(f"scalar closed form needs d = 1, got d = {P.dim}")
    x = P.values[:, 0]
    denom = 2.0 * float(left_riemann(x**2, P.grid))
    if denom == 0.0:
        raise SingularInformationError("int X^2 dt vanishes", min_eigenvalue=0.0)
    return (x[-1] ** 2 - x[0] ** 2 - sigma**2 * P.grid.horizon) / denom


def _require_2d(P: Path) -> None:
    if P.dim != 2:
        raise UnsupportedError(f"explicit 2-D formulas need d = 2, got d = {P.dim}")


def _gram_2d(P: Path):
    x1, x2 = P.values[:, 0], P.values[:, 1]
    g11 = float(left_riemann(x1 * x1, P.grid))
    g12 = float(left_riemann(x1 * x2, P.grid))
    g22 = float(left_riemann(x2 * x2, P.grid))
    return g11, g12, g22


def ou2d_explicit(P: Path, scheme: str = "ito") -> DriftEstimate:
    """2-D OU (``h = id``, ``Sigma = I``) via the explicit 4x4 system ``M a = b``.

    ``scheme="stratonovich"`` evaluates the ``dX`` integrals exactly on the
    piecewise-linear interpolant (trapezoidal sums) instead of left points.
    """
    _require_2d(P)
    g11, g12, g22 = _gram_2d(P)
    M = np.array(
        [
            [g11, g12, 0.0, 0.0],
            [g12, g22, 0.0, 0.0],
            [0.0, 0.0, g11, g12],
            [0.0, 0.0, g12, g22],
        ]
    )
    x = P.values[:-1]
    dx = P.increments
    if scheme == "stratonovich":
        x = x + 0.5 * dx
    elif scheme != "ito":
        raise ValueError(f"unknown scheme {scheme!r}")
    x1, x2, dx1, dx2 = x[:, 0], x[:, 1], dx[:, 0], dx[:, 1]
    b = np.array([x1 @ dx1, x2 @ dx1, x1 @ dx2, x2 @ dx2])
    det = g11 * g22 - g12 * g12
    scale = max(g11 * g22, 1e-300)
    if abs(det) <= SINGULARITY_RTOL * scale or g11 * g22 == 0.0:
        raise SingularInformationError(
            f"det M = {det:.3g}: the path does not span R^2", min_eigenvalue=0.0
        )
    a = np.linalg.solve(M, b)
    eig = np.linalg.eigvalsh(M)
    return DriftEstimate(
        a_hat=a.reshape(2, 2),
        information=M,
        score=b.reshape(2, 2),
        min_eigenvalue=float(eig[0]),
        condition=float(eig[-1] / eig[0]),
        method="ou2d",
    )


def ou2d_area_decomposition(P: Path) -> AreaDecomposition:
    """Split the first entry of the 2-D OU estimator into area and the rest.

    With Riemann-Stieltjes ``dX`` integrals of the piecewise-linear path,
    ``a1 = regular + U * area / 2`` where ``U = int x1 x2 / det(G)`` and
    ``area`` is the signed area over ``[0, T]``. ``a1`` agrees with
    ``ou2d_explicit(P, "stratonovich")``.
    """
    _require_2d(P)
    g11, g12, g22 = _gram_2d(P)
    det = g11 * g22 - g12 * g12
    if abs(det) <= SINGULARITY_RTOL * max(g11 * g22, 1e-300) or g11 * g22 == 0.0:
        raise SingularInformationError(f"det G = {det:.3g}", min_eigenvalue=0.0)
    x0, xT = P.start, P.end
    delta = xT - x0
    enclosed = area(P, 0.0, P.grid.horizon)
    int_x1dx1 = 0.5 * (xT[0] ** 2 - x0[0] ** 2)
    int_x2dx1_regular = x0[1] * delta[0] + 0.5 * delta[0] * delta[1]
    regular = (g22 * int_x1dx1 - g12 * int_x2dx1_regular) / det
    U = g12 / det
    return AreaDecomposition(U, enclosed, regular, regular + 0.5 * U * enclosed)

