"""Seeded noise, Brownian and Volterra fBm paths, Euler-Maruyama, loop paths.

Randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence(seed, spawn_key=(stream_id,))``; Gaussians use numpy's
``Generator.standard_normal`` (ziggurat). Streams are bit-reproducible for a
fixed numpy release.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .errors import IncompatiblePathsError, InvalidArgumentError, UnsupportedError
from .gridpath import Path, TimeGrid, write_path
from .models import ModelSpec

HURST_RANGE = (1 / 3, 1.0)
RNG_ALGORITHM = "numpy-PCG64/SeedSequence/ziggurat"
LOOP_SAMPLES = 64


@dataclass(frozen=True)
class RngConfig:
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise InvalidArgumentError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.stream_id < 0:
            raise InvalidArgumentError(f"stream_id must be nonnegative, got {self.stream_id}")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(seq))

    def replica(self, index: int) -> "RngConfig":
        """Stream for replica ``index`` (independent of every other replica)."""
        return RngConfig(self.seed, index)


@dataclass(frozen=True, eq=False)
class SimSpec:
    drift: np.ndarray
    x0: np.ndarray
    grid: TimeGrid
    model: ModelSpec
    hurst: float = 0.5

    def __post_init__(self):
        drift = np.atleast_2d(np.asarray(self.drift, dtype=float))
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        d = self.model.dim
        if drift.shape != (d, d) or x0.shape != (d,):
            raise IncompatiblePathsError(
                f"drift {drift.shape} / x0 {x0.shape} do not match dimension {d}"
            )
        _check_hurst(self.hurst)
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "x0", x0)

    @property
    def dim(self) -> int:
        return self.model.dim


def _check_hurst(H: float) -> None:
    lo, hi = HURST_RANGE
    if not lo < H < hi:
        raise InvalidArgumentError(f"Hurst index must lie in (1/3, 1), got {H}")


def _require_uniform(grid: TimeGrid) -> float:
    if not grid.uniform:
        raise UnsupportedError("simulation requires a uniform grid")
    return float(grid.times[1] - grid.times[0])


def brownian_increments(grid: TimeGrid, d: int, rng: RngConfig, replicas: int | None = None):
    """Independent N(0, dt I) increments, shape (N, d) or (replicas, N, d)."""
    dt = _require_uniform(grid)
    shape = (grid.steps, d) if replicas is None else (replicas, grid.steps, d)
    return np.sqrt(dt) * rng.generator().standard_normal(shape)


def brownian_path(grid: TimeGrid, d: int, rng: RngConfig) -> Path:
    dW = brownian_increments(grid, d, rng)
    return Path(grid, np.vstack([np.zeros((1, d)), np.cumsum(dW, axis=0)]))


def volterra_weights(grid: TimeGrid, H: float) -> np.ndarray:
    """Cell integrals of ``(t - s)^{H - 1/2}`` divided by ``dt``, by lag 1..N."""
    _check_hurst(H)
    dt = _require_uniform(grid)
    k = np.arange(grid.steps + 1, dtype=float)
    p = H + 0.5
    cum = k**p
    return dt ** (H - 0.5) * np.diff(cum) / p


def volterra_fbm(grid: TimeGrid, H: float, dW) -> Path:
    """``W^H_{t_i} = sum_{j<i} w_{ij} dW_j / dt`` with exact per-cell kernel integrals.

    ``dW`` has shape (N, d); coordinates are transformed independently.
    Singular kernels (H < 1/2) are integrated over each cell, never
    point-evaluated.
    """
    dW = np.asarray(dW, dtype=float)
    if dW.ndim == 1:
        dW = dW[:, None]
    if dW.shape[0] != grid.steps:
        raise IncompatiblePathsError(f"{dW.shape[0]} increments for {grid.steps} steps")
    w = volterra_weights(grid, H)
    n = grid.steps
    out = np.zeros((n + 1, dW.shape[1]))
    if n:
        conv = fftconvolve(dW, w[:, None], axes=0) if n > 64 else np.stack(
            [np.convolve(dW[:, c], w) for c in range(dW.shape[1])], axis=1
        )
        out[1:] = conv[:n]
    return Path(grid, out)


def fbm_gap_variance(H: float, Hp: float) -> float:
    """``int_0^1 (r^{H-1/2} - r^{H'-1/2})^2 dr`` in closed form."""
    _check_hurst(H)
    _check_hurst(Hp)
    return 1.0 / (2 * H) - 2.0 / (H + Hp) + 1.0 / (2 * Hp)


def _euler(drift, model: ModelSpec, x0, dt, dD):
    """Euler-Maruyama over leading replica axes; ``dD`` has shape (..., N, d)."""
    n = dD.shape[-2]
    out = np.empty(dD.shape[:-2] + (n + 1, dD.shape[-1]))
    x = np.broadcast_to(x0, dD.shape[:-2] + x0.shape).copy()
    out[..., 0, :] = x
    At = drift.T
    for i in range(n):
        sig = model.Sigma(x)
        x = x + (model.h(x) @ At) * dt[i] + np.einsum("...ab,...b->...a", sig, dD[..., i, :])
        out[..., i + 1, :] = x
    return out


def euler_maruyama(spec: SimSpec, driver: Path) -> Path:
    """``X_{i+1} = X_i + A h(X_i) dt + Sigma(X_i) (D_{i+1} - D_i)``, ``X_0 = x0``."""
    if not driver.grid.same_as(spec.grid):
        raise IncompatiblePathsError("driver is not sampled on the simulation grid")
    if driver.dim != spec.dim:
        raise IncompatiblePathsError(f"driver has dimension {driver.dim}, model {spec.dim}")
    values = _euler(spec.drift, spec.model, spec.x0, spec.grid.dt, driver.increments)
    return Path(spec.grid, values)


def simulate_replicas(
    spec: SimSpec, rng: RngConfig, replicas: int | Sequence[int]
) -> list[Path]:
    """Brownian-driven replicas; replica ``r`` uses stream ``rng.replica(r)``.

    ``replicas`` is a count or an explicit list of replica indices. All
    replicas are stepped together, which gives the same paths as simulating
    each stream separately.
    """
    indices = range(replicas) if isinstance(replicas, (int, np.integer)) else replicas
    dW = np.stack(
        [brownian_increments(spec.grid, spec.dim, rng.replica(int(r))) for r in indices]
    )
    values = _euler(spec.drift, spec.model, spec.x0, spec.grid.dt, dW)
    return [Path(spec.grid, v) for v in values]


def simulate_hurst_family(spec: SimSpec, H_list: Sequence[float], rng: RngConfig) -> list[Path]:
    """One diffusion path per Hurst index, all driven by the same Brownian increments."""
    dW = brownian_increments(spec.grid, spec.dim, rng)
    paths = []
    for H in H_list:
        driver = volterra_fbm(spec.grid, H, dW)
        paths.append(euler_maruyama(spec, driver))
    return paths


def dyadic_radius(rate: float = 0.25) -> Callable[[int], float]:
    """``n -> 2^{-rate * n}``; ``rate = 1/4`` is the divergent family."""
    return lambda n: 2.0 ** (-rate * n)


@dataclass(frozen=True, eq=False)
class CounterexampleLayout:
    """Index bookkeeping for :func:`counterexample_pair` grids."""

    n: int
    radius: float
    dyadic_indices: np.ndarray
    loop_starts: np.ndarray = field(repr=False)
    half_index: int = 0


def counterexample_layout(
    n: int,
    radius_rule: Callable[[int], float] = dyadic_radius(),
    line_steps: int = 16,
    loop_samples: int = LOOP_SAMPLES,
):
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"dyadic level must be >= 1, got {n}")
    n = int(n)
    delta = 2.0**-n
    intervals = 2 ** (n - 1)
    per = line_steps + loop_samples
    # first half of every dyadic cell: line_steps steps, second half: the loop
    cell = np.concatenate(
        [
            np.linspace(0.0, 0.5, line_steps, endpoint=False),
            np.linspace(0.5, 1.0, loop_samples, endpoint=False),
        ]
    )
    left = (np.arange(intervals)[:, None] + cell[None, :]).ravel() * delta
    right = 0.5 + np.arange(1, intervals * line_steps + 1) * (0.5 / (intervals * line_steps))
    times = np.concatenate([left, [0.5], right])
    grid = TimeGrid.from_times(times)
    dyadic = np.concatenate(
        [np.arange(intervals + 1) * per, intervals * per + np.arange(1, intervals + 1) * line_steps]
    )
    layout = CounterexampleLayout(
        n=n,
        radius=float(radius_rule(n)),
        dyadic_indices=dyadic,
        loop_starts=np.arange(intervals) * per + line_steps,
        half_index=intervals * per,
    )
    return grid, layout


def counterexample_pair(
    n: int,
    radius_rule: Callable[[int], float] = dyadic_radius(),
    line_steps: int = 16,
    loop_samples: int = LOOP_SAMPLES,
) -> tuple[Path, Path]:
    """Base L-shaped path and its looped perturbation on a shared grid.

    The base path is ``(t, 0)`` on ``[0, 1/2]`` and ``(1/2, t - 1/2)`` after.
    On each of the ``2^{n-1}`` dyadic cells of ``[0, 1/2]`` the looped path
    runs the segment at double speed, then traverses a closed
    counter-clockwise circle of radius ``r_n`` (``loop_samples`` steps)
    ending where the cell ends. Both paths agree at every ``k 2^{-n}``.
    """
    grid, layout = counterexample_layout(n, radius_rule, line_steps, loop_samples)
    t = grid.times
    r = layout.radius
    base = np.column_stack([np.minimum(t, 0.5), np.maximum(t - 0.5, 0.0)])

    delta = 2.0**-layout.n
    looped = base.copy()
    first = t <= 0.5
    cell = np.minimum(np.floor(t[first] / delta), 2 ** (layout.n - 1) - 1)
    phase = t[first] / delta - cell
    on_line = phase < 0.5
    x1 = np.where(on_line, (cell + 2 * phase) * delta, (cell + 1) * delta)
    theta = 2 * np.pi * np.clip(2 * phase - 1, 0.0, 1.0)
    loop = np.where(on_line[:, None], 0.0, r * np.column_stack([np.cos(theta) - 1, np.sin(theta)]))
    looped[first] = np.column_stack([x1, np.zeros_like(x1)]) + loop
    # t = 1/2 closes the last cell
    looped[layout.half_index] = base[layout.half_index]
    return Path(grid, base), Path(grid, looped)


def simulation_metadata(spec: SimSpec, rng: RngConfig) -> dict:
    return {
        "seed": rng.seed,
        "stream_id": rng.stream_id,
        "hurst": spec.hurst,
        "drift": spec.drift.tolist(),
        "steps": spec.grid.steps,
        "horizon": spec.grid.horizon,
    }


def write_simulated_path(P: Path, spec: SimSpec, rng: RngConfig, filename) -> None:
    """Path CSV plus a ``.json`` sidecar holding the simulation metadata."""
    write_path(P, filename)
    sidecar = str(filename).rsplit(".", 1)[0] + ".json"
    with open(sidecar, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(simulation_metadata(spec, rng), fh, indent=2, sort_keys=True)
        fh.write("\n")
