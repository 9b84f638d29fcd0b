"""Level-2 rough paths over a sampled path.

Second-level tensors are stored relative to the base point,
``base[i] = XX_{0, t_i}``, together with the per-step tensors
``steps[i] = XX_{t_i, t_{i+1}}``. Windows are reconstructed by Chen's
relation

    XX_{s,t} = XX_{0,t} - XX_{0,s} - X_{0,s} (x) X_{s,t}.

Tensor convention: ``XX[a, b] = int X^a_{s,r} dX^b_r``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    IncompatiblePathsError,
    InvalidArgumentError,
    InvalidModelError,
    UnsupportedError,
)
from .gridpath import Path, TimeGrid, pair_lags

CSV_CHEN_TOLERANCE = 1e-6
# all-triples Chen sweep is cubic; larger grids are checked on a strided subgrid
_TRIPLE_SWEEP_POINTS = 160


@dataclass(frozen=True, eq=False)
class Level2:
    base_tensors: np.ndarray
    step_tensors: np.ndarray

    @classmethod
    def from_steps(cls, path: Path, step_tensors) -> "Level2":
        """Accumulate per-step tensors into base-point tensors via Chen."""
        steps = np.array(step_tensors, dtype=float)
        n, d = path.values.shape
        if steps.shape != (n - 1, d, d):
            raise IncompatiblePathsError(
                f"step tensors have shape {steps.shape}, expected {(n - 1, d, d)}"
            )
        x0s = path.values[:-1] - path.values[0]
        inc = np.einsum("ia,ib->iab", x0s, path.increments) + steps
        base = np.zeros((n, d, d))
        np.cumsum(inc, axis=0, out=base[1:])
        return cls(base, steps)

    @classmethod
    def from_base(cls, path: Path, base_tensors) -> "Level2":
        """Derive step tensors from base tensors (Chen-consistent by construction)."""
        base = np.array(base_tensors, dtype=float)
        n, d = path.values.shape
        if base.shape != (n, d, d):
            raise IncompatiblePathsError(
                f"base tensors have shape {base.shape}, expected {(n, d, d)}"
            )
        x0s = path.values[:-1] - path.values[0]
        steps = np.diff(base, axis=0) - np.einsum("ia,ib->iab", x0s, path.increments)
        return cls(base, steps)


@dataclass(frozen=True, eq=False)
class RoughPath:
    path: Path
    level2: Level2
    alpha: float = 0.4

    def __post_init__(self):
        n, d = self.path.values.shape
        if self.level2.base_tensors.shape != (n, d, d):
            raise IncompatiblePathsError("level-2 tensors do not match the path")
        if not 1 / 3 < self.alpha <= 0.5:
            raise InvalidArgumentError(f"alpha must lie in (1/3, 1/2], got {self.alpha}")

    @property
    def grid(self) -> TimeGrid:
        return self.path.grid

    @property
    def dim(self) -> int:
        return self.path.dim

    def windows(self, i, j) -> np.ndarray:
        """Vectorised ``XX_{t_i, t_j}`` for index arrays ``i <= j``."""
        x = self.path.values
        b = self.level2.base_tensors
        return b[j] - b[i] - np.einsum("...a,...b->...ab", x[i] - x[0], x[j] - x[i])


def lift_piecewise_linear(P: Path, alpha: float = 0.4) -> RoughPath:
    """Canonical geometric lift of the piecewise-linear interpolant of ``P``.

    Each linear step contributes ``1/2 dX (x) dX``.
    """
    if P.values.shape[0] < 2:
        raise InvalidArgumentError("need at least two samples to lift")
    dx = P.increments
    steps = 0.5 * np.einsum("ia,ib->iab", dx, dx)
    return RoughPath(P, Level2.from_steps(P, steps), alpha)


def level2_window(R: RoughPath, s: float, t: float) -> np.ndarray:
    if s > t:
        raise InvalidArgumentError(f"window start {s} is after its end {t}")
    i, j = R.grid.index_of(s), R.grid.index_of(t)
    return R.windows(i, j)


@dataclass(frozen=True)
class CheckReport:
    max_defect: float
    passed: bool

    def __bool__(self):
        return self.passed


def check_chen(R: RoughPath, tol: float = 1e-10) -> CheckReport:
    """Largest violation of ``XX_{s,t} + X_{s,t} (x) X_{t,u} + XX_{t,u} = XX_{s,u}``.

    Windows spanning one step use the stored step tensors, longer windows
    are reconstructed from the base tensors, so a base tensor that does not
    agree with the steps shows up as a defect. All grid triples are swept
    on grids of at most 160 points; longer grids add a strided subgrid
    sweep to the (exhaustive) consecutive-step check.
    """
    x = R.path.values
    base, steps = R.level2.base_tensors, R.level2.step_tensors
    n = x.shape[0]
    defect = float(np.max(np.abs(base[0]), initial=0.0))
    if n >= 2:
        # triples (0, t_i, t_{i+1}): base tensors versus step tensors
        x0s = x[:-1] - x[0]
        rebuilt = base[:-1] + np.einsum("ia,ib->iab", x0s, np.diff(x, axis=0)) + steps
        defect = max(defect, float(np.max(np.abs(rebuilt - base[1:]))))
    idx = np.arange(n)
    if n > _TRIPLE_SWEEP_POINTS:
        idx = np.unique(np.linspace(0, n - 1, _TRIPLE_SWEEP_POINTS).astype(int))
    for a in range(idx.size - 2):
        s = idx[a]
        rest = idx[a + 1 :]
        t, u = np.meshgrid(rest, rest, indexing="ij")
        keep = t < u
        t, u = t[keep], u[keep]
        w_st = R.windows(np.full(t.shape, s), t)
        w_st[t == s + 1] = steps[s]
        w_tu = R.windows(t, u)
        single = u == t + 1
        w_tu[single] = steps[t[single]]
        w_su = R.windows(np.full(t.shape, s), u)
        cross = np.einsum("ka,kb->kab", x[t] - x[s], x[u] - x[t])
        gap = w_st + cross + w_tu - w_su
        defect = max(defect, float(np.max(np.abs(gap))))
    return CheckReport(defect, defect <= tol)


def check_geometric(
    R: RoughPath, tol: float = 1e-10, lags: Sequence[int] | None = None
) -> CheckReport:
    """Largest violation of ``2 Sym(XX_{s,t}) = X_{s,t} (x) X_{s,t}`` over grid pairs."""
    x = R.path.values
    n = x.shape[0]
    defect = 0.0
    for k in pair_lags(n, lags):
        i = np.arange(n - k)
        w = R.windows(i, i + k)
        dx = x[k:] - x[:-k]
        gap = w + np.swapaxes(w, -1, -2) - np.einsum("ka,kb->kab", dx, dx)
        defect = max(defect, float(np.max(np.abs(gap))))
    return CheckReport(defect, defect <= tol)


def rough_distance(
    R1: RoughPath,
    R2: RoughPath,
    alpha: float | None = None,
    lags: Sequence[int] | None = None,
) -> float:
    """Inhomogeneous alpha-Holder rough path distance over grid pairs.

    ``lags`` restricts the pairs to ``(i, i + k)``; the result is then a
    lower bound of the all-pairs value (itself a lower bound of the
    continuum supremum).
    """
    alpha = R1.alpha if alpha is None else alpha
    if not 1 / 3 < alpha <= 0.5:
        raise InvalidArgumentError(f"alpha must lie in (1/3, 1/2], got {alpha}")
    if not R1.grid.same_as(R2.grid) or R1.dim != R2.dim:
        raise IncompatiblePathsError("rough paths do not share grid and dimension")
    t = R1.grid.times
    # coordinate-major copies keep the per-lag slices contiguous
    x1 = np.ascontiguousarray(R1.path.values.T)
    x2 = np.ascontiguousarray(R2.path.values.T)
    d, n = x1.shape
    rel1, rel2 = x1 - x1[:, :1], x2 - x2[:, :1]
    dpath = x1 - x2
    dbase = np.ascontiguousarray(
        (R1.level2.base_tensors - R2.level2.base_tensors).reshape(n, d * d).T
    )
    first = second = 0.0
    for k in pair_lags(n, lags):
        dt = t[k:] - t[:-k]
        inc1, inc2 = x1[:, k:] - x1[:, :-k], x2[:, k:] - x2[:, :-k]
        sq1 = np.zeros(n - k)
        sq2 = np.zeros(n - k)
        for a in range(d):
            da = dpath[a, k:] - dpath[a, :-k]
            sq1 += da * da
            for b in range(d):
                dw = dbase[a * d + b, k:] - dbase[a * d + b, :-k]
                dw -= rel1[a, :-k] * inc1[b] - rel2[a, :-k] * inc2[b]
                sq2 += dw * dw
        first = max(first, float(np.sqrt(np.max(sq1 / dt ** (2 * alpha)))))
        second = max(second, float(np.sqrt(np.max(sq2 / dt ** (4 * alpha)))))
    return first + second


def area(P: Path, s: float, t: float) -> float:
    """Signed area ``XX^{12}_{s,t} - XX^{21}_{s,t}`` of the piecewise-linear path.

    A circle of radius r traversed once counter-clockwise has area 2 pi r^2.
    """
    if P.dim != 2:
        raise UnsupportedError(f"area is defined for d = 2 only, got d = {P.dim}")
    if s > t:
        raise InvalidArgumentError(f"window start {s} is after its end {t}")
    i, j = P.grid.index_of(s), P.grid.index_of(t)
    x = P.values[i : j + 1]
    rel = x[:-1] - x[0]
    dx = np.diff(x, axis=0)
    return float(np.sum(rel[:, 0] * dx[:, 1] - rel[:, 1] * dx[:, 0]))


def _evaluate_form(F: Callable, points: np.ndarray, d: int) -> np.ndarray:
    vals = np.asarray(F(points), dtype=float)
    n = points.shape[0]
    if vals.ndim == 2 and vals.shape == (n, d):
        vals = vals[:, None, :]
    if vals.ndim != 3 or vals.shape[0] != n or vals.shape[2] != d:
        raise InvalidModelError(
            f"integrand must map (N, {d}) points to (N, m, {d}), got {vals.shape}"
        )
    return vals


def rough_integral(F: Callable, DF: Callable, R: RoughPath) -> np.ndarray:
    """Compensated Riemann sum ``sum_i F(X_i) X_{i,i+1} + DF(X_i) XX_{i,i+1}``.

    ``F`` maps stacked points (N, d) to (N, m, d); ``DF`` maps them to
    (N, m, d, d) with the derivative direction last, so the compensation
    reads ``sum_{b,c} dF_{ab}/dx_c XX^{cb}``.
    """
    x = R.path.values[:-1]
    d = R.dim
    f = _evaluate_form(F, x, d)
    df = np.asarray(DF(x), dtype=float)
    if df.ndim == 3 and f.shape[1] == 1:
        df = df[:, None]
    if df.shape != f.shape + (d,):
        raise InvalidModelError(
            f"derivative has shape {df.shape}, expected {f.shape + (d,)}"
        )
    first = np.einsum("nab,nb->a", f, R.path.increments)
    second = np.einsum("nabc,ncb->a", df, R.level2.step_tensors)
    return first + second


def ito_integral(F: Callable, P: Path) -> np.ndarray:
    """Left-point sum ``sum_i F(X_i) X_{i,i+1}``."""
    f = _evaluate_form(F, P.values[:-1], P.dim)
    return np.einsum("nab,nb->a", f, P.increments)


def rough_path_to_csv(R: RoughPath) -> str:
    d = R.dim
    cols = ["t"] + [f"x{k + 1}" for k in range(d)]
    cols += [f"xx{a + 1}{b + 1}" for a in range(d) for b in range(d)]
    n = R.path.values.shape[0]
    data = np.column_stack(
        [R.path.times, R.path.values, R.level2.base_tensors.reshape(n, d * d)]
    )
    buf = io.StringIO()
    np.savetxt(buf, data, fmt="%.17g", delimiter=",", header=",".join(cols), comments="")
    return buf.getvalue()


def rough_path_from_csv(text: str, alpha: float = 0.4) -> RoughPath:
    """Parse a rough path and reject it if Chen's relation fails by more than 1e-6."""
    header = text.splitlines()[0].strip().split(",") if text else []
    ncol = len(header)
    d = int(round((np.sqrt(4 * ncol - 3) - 1) / 2)) if ncol else 0
    expected = ["t"] + [f"x{k + 1}" for k in range(d)]
    expected += [f"xx{a + 1}{b + 1}" for a in range(d) for b in range(d)]
    if d < 1 or header != expected:
        raise InvalidArgumentError(f"unexpected rough path CSV header: {header}")
    data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
    path = Path(TimeGrid.from_times(data[:, 0]), data[:, 1 : 1 + d])
    base = data[:, 1 + d :].reshape(-1, d, d)
    R = RoughPath(path, Level2.from_base(path, base), alpha)
    report = check_chen(R, CSV_CHEN_TOLERANCE)
    if not report.passed:
        raise InvalidArgumentError(
            f"rough path violates Chen's relation (defect {report.max_defect:.3g})"
        )
    return R


def write_rough_path(R: RoughPath, filename) -> None:
    with open(filename, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(rough_path_to_csv(R))


def read_rough_path(filename, alpha: float = 0.4) -> RoughPath:
    with open(filename, encoding="utf-8") as fh:
        return rough_path_from_csv(fh.read(), alpha)
