"""Time grids, sampled paths and elementary path calculus.

A :class:`Path` is a d-dimensional trajectory sampled on a :class:`TimeGrid`.
All ``ds``-integrals are left-point Riemann sums so that they close exactly
with the left-point (Ito) ``dX``-sums used elsewhere.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import IncompatiblePathsError, InvalidArgumentError

UNIFORM_RTOL = 1e-12


def _equal_gaps(gaps: np.ndarray, horizon: float) -> bool:
    # rounding in t_i = T * i / N is a few ulps of T, not of dt
    atol = 64 * np.finfo(float).eps * abs(horizon)
    return bool(np.allclose(gaps, gaps[0], rtol=UNIFORM_RTOL, atol=atol))


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing times ``0 = t_0 < ... < t_N = T``."""

    times: np.ndarray
    uniform: bool = False

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise InvalidArgumentError("a grid needs at least two times")
        if times[0] != 0.0:
            raise InvalidArgumentError(f"grid must start at 0, got {times[0]}")
        gaps = np.diff(times)
        if not np.all(gaps > 0):
            raise InvalidArgumentError("grid times must be strictly increasing")
        if self.uniform and not _equal_gaps(gaps, times[-1]):
            raise InvalidArgumentError("grid flagged uniform but gaps differ")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @classmethod
    def from_times(cls, times) -> "TimeGrid":
        """Build a grid and detect uniformity."""
        times = np.asarray(times, dtype=float)
        gaps = np.diff(times)
        uniform = gaps.size > 0 and _equal_gaps(gaps, times[-1])
        return cls(times, uniform)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def steps(self) -> int:
        return self.times.size - 1

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.times)

    def same_as(self, other: "TimeGrid") -> bool:
        return self is other or (
            self.times.shape == other.times.shape
            and bool(np.array_equal(self.times, other.times))
        )

    def index_of(self, t: float) -> int:
        """Index of grid time ``t``; raises if ``t`` is not on the grid."""
        i = int(np.searchsorted(self.times, t))
        for j in (i - 1, i):
            if 0 <= j < self.times.size and np.isclose(
                self.times[j], t, rtol=1e-12, atol=1e-15
            ):
                return j
        raise InvalidArgumentError(f"time {t} is not a grid time")

    def subsample(self, every: int) -> "TimeGrid":
        if every < 1 or self.steps % every:
            raise InvalidArgumentError(
                f"cannot subsample {self.steps} steps every {every}"
            )
        return TimeGrid(self.times[::every], self.uniform)


@dataclass(frozen=True, eq=False)
class Path:
    """Sampled trajectory, ``values[i]`` is the point at ``grid.times[i]``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] != self.grid.times.size:
            raise IncompatiblePathsError(
                f"values shape {values.shape} does not match "
                f"{self.grid.times.size} grid times"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def start(self) -> np.ndarray:
        return self.values[0]

    @property
    def end(self) -> np.ndarray:
        return self.values[-1]

    @property
    def increments(self) -> np.ndarray:
        """``X_{t_i, t_{i+1}}`` for every step, shape (N, d)."""
        return np.diff(self.values, axis=0)

    def subsample(self, every: int) -> "Path":
        return Path(self.grid.subsample(every), self.values[::every])


def make_uniform_grid(horizon: float, steps: int) -> TimeGrid:
    if not horizon > 0:
        raise InvalidArgumentError(f"horizon must be positive, got {horizon}")
    if int(steps) != steps or steps < 1:
        raise InvalidArgumentError(f"steps must be a positive integer, got {steps}")
    steps = int(steps)
    times = horizon * (np.arange(steps + 1) / steps)
    return TimeGrid(times, uniform=True)


def _require_same_grid(P: Path, Q: Path) -> None:
    if not P.grid.same_as(Q.grid):
        raise IncompatiblePathsError("paths are sampled on different grids")
    if P.dim != Q.dim:
        raise IncompatiblePathsError(f"dimensions differ: {P.dim} vs {Q.dim}")


def row_norms(x: np.ndarray) -> np.ndarray:
    """Euclidean norm of each row, without underflow for tiny entries."""
    scale = np.max(np.abs(x), axis=1)
    safe = np.where(scale > 0, scale, 1.0)
    return scale * np.linalg.norm(x / safe[:, None], axis=1)


def sup_distance(P: Path, Q: Path) -> float:
    """Uniform distance ``max_i |P(t_i) - Q(t_i)|``."""
    _require_same_grid(P, Q)
    return float(np.max(row_norms(P.values - Q.values)))


def pair_lags(n_points: int, lags: Iterable[int] | None = None) -> np.ndarray:
    """Index lags ``k`` so that pairs ``(i, i + k)`` are visited.

    ``None`` means every lag, i.e. every pair of grid points.
    """
    if lags is None:
        return np.arange(1, n_points)
    lags = np.unique(np.asarray(list(lags), dtype=int))
    return lags[(lags >= 1) & (lags < n_points)]


def multiscale_lags(n_points: int, dense: int = 128, ratio: float = 1.25) -> np.ndarray:
    """All lags up to ``dense`` then a geometric ladder up to ``n_points - 1``.

    Suprema over the resulting pairs are lower bounds of the all-pairs
    suprema at O(N log N) cost.
    """
    out = list(range(1, min(dense, n_points - 1) + 1))
    k = float(max(dense, 1))
    while k < n_points - 1:
        k = max(k * ratio, k + 1)
        out.append(min(int(round(k)), n_points - 1))
    out.append(n_points - 1)
    return pair_lags(n_points, out)


def holder_seminorm(P: Path, alpha: float, lags: Sequence[int] | None = None) -> float:
    """``max_{s<t} |X_{s,t}| / (t - s)^alpha`` over grid pairs."""
    if not 0 < alpha <= 1:
        raise InvalidArgumentError(f"alpha must lie in (0, 1], got {alpha}")
    t, x = P.times, P.values
    best = 0.0
    for k in pair_lags(t.size, lags):
        num = row_norms(x[k:] - x[:-k])
        best = max(best, float(np.max(num / (t[k:] - t[:-k]) ** alpha)))
    return best


def left_riemann(samples, grid: TimeGrid):
    """``sum_i samples[i] * (t_{i+1} - t_i)``, elementwise for array samples.

    ``samples`` may have one entry per grid time (the last one is ignored)
    or one per step.
    """
    samples = np.asarray(samples, dtype=float)
    n = grid.times.size
    if samples.shape[0] == n:
        samples = samples[:-1]
    elif samples.shape[0] != n - 1:
        raise IncompatiblePathsError(
            f"{samples.shape[0]} samples do not align with {n} grid times"
        )
    return np.tensordot(grid.dt, samples, axes=(0, 0))


def quadratic_variation(P: Path) -> np.ndarray:
    """``sum_i X_{t_i,t_{i+1}} (x) X_{t_i,t_{i+1}}`` as a d x d matrix."""
    dx = P.increments
    return dx.T @ dx


def path_to_csv(P: Path) -> str:
    header = ",".join(["t"] + [f"x{k + 1}" for k in range(P.dim)])
    buf = io.StringIO()
    np.savetxt(
        buf,
        np.column_stack([P.times, P.values]),
        fmt="%.17g",
        delimiter=",",
        header=header,
        comments="",
    )
    return buf.getvalue()


def path_from_csv(text: str) -> Path:
    lines = text.splitlines()
    if not lines:
        raise InvalidArgumentError("empty path CSV")
    cols = lines[0].strip().split(",")
    d = len(cols) - 1
    if d < 1 or cols != ["t"] + [f"x{k + 1}" for k in range(d)]:
        raise InvalidArgumentError(f"unexpected path CSV header: {lines[0]!r}")
    data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
    return Path(TimeGrid.from_times(data[:, 0]), data[:, 1:])


def write_path(P: Path, filename) -> None:
    with open(filename, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(path_to_csv(P))


def read_path(filename) -> Path:
    with open(filename, encoding="utf-8") as fh:
        return path_from_csv(fh.read())
