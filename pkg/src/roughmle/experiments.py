"""The four batch experiments and their CSV result tables.

Every experiment is a pure function of its resolved config: replica ``r``
draws from the stream ``(seed, r)`` and replica results are aggregated in
index order, so reruns give byte-identical tables.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Sequence

import numpy as np

from ._version import __version__
from .config import ExperimentConfig, config_to_dict
from .errors import ConfigError
from .estimator import (
    ou2d_area_decomposition,
    rough_mle,
    classical_mle,
    scalar_ou_closed_form,
)
from .gridpath import Path, TimeGrid, left_riemann, make_uniform_grid, multiscale_lags, sup_distance
from .models import constant_sigma_model
from .roughcore import area, lift_piecewise_linear, rough_distance, rough_integral
from .stochsim import (
    RNG_ALGORITHM,
    RngConfig,
    SimSpec,
    counterexample_pair,
    dyadic_radius,
    fbm_gap_variance,
    simulate_hurst_family,
    simulate_replicas,
)


@dataclass(frozen=True, eq=False)
class ResultTable:
    columns: tuple
    rows: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        columns = tuple(str(c) for c in self.columns)
        rows = np.array(self.rows, dtype=float)
        if rows.ndim == 1 and rows.size == 0:
            rows = rows.reshape(0, len(columns))
        if rows.ndim != 2 or rows.shape[1] != len(columns):
            raise ValueError(f"rows of shape {rows.shape} do not fit {len(columns)} columns")
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "rows", rows)

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]


def _metadata(cfg: ExperimentConfig, **summary) -> dict:
    meta = {"config": config_to_dict(cfg), "version": __version__, "rng": RNG_ALGORITHM}
    if summary:
        meta["summary"] = summary
    return meta


def table_to_csv(table: ResultTable) -> str:
    # repr gives the shortest string that parses back to the same double
    lines = [",".join(table.columns)]
    lines += [",".join(repr(float(v)) for v in row) for row in table.rows]
    return "\n".join(lines) + "\n"


def sidecar_path(path) -> FsPath:
    return FsPath(path).with_suffix(".json")


def emit_table(table: ResultTable, path) -> None:
    """Write the CSV and a ``.json`` metadata sidecar next to it."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table_to_csv(table))
    with open(sidecar_path(path), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(table.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_table(path) -> ResultTable:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    columns = lines[0].split(",")
    rows = [[float(v) for v in line.split(",")] for line in lines[1:] if line]
    meta_file = sidecar_path(path)
    metadata = json.loads(meta_file.read_text(encoding="utf-8")) if meta_file.exists() else {}
    return ResultTable(tuple(columns), np.array(rows, dtype=float).reshape(len(rows), len(columns)), metadata)


def _require(cfg: ExperimentConfig, experiment: str) -> None:
    if cfg.experiment != experiment:
        raise ConfigError(
            f"expected a {experiment} config, got {cfg.experiment}", field="experiment"
        )


def _mean_se(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and standard errors over replicas (axis 0)."""
    values = np.asarray(values, dtype=float)
    mean = values.mean(axis=0)
    if values.shape[0] < 2:
        return mean, np.full_like(mean, np.nan)
    return mean, values.std(axis=0, ddof=1) / np.sqrt(values.shape[0])


# -- counterexample -------------------------------------------------------


COUNTEREXAMPLE_COLUMNS = (
    "n",
    "radius",
    "sup_distance",
    "area_half",
    "U",
    "a1_base",
    "a1_looped",
    "gap",
    "gap_scaled",
    "rough_distance",
)


def counterexample_row(n: int, cfg: ExperimentConfig) -> list[float]:
    base, looped = counterexample_pair(
        n, dyadic_radius(cfg.radius_rate), cfg.line_steps, cfg.loop_samples
    )
    dec_base = ou2d_area_decomposition(base)
    dec_loop = ou2d_area_decomposition(looped)
    gap = abs(dec_loop.a1 - dec_base.a1)
    rho = rough_distance(
        lift_piecewise_linear(base, cfg.alpha),
        lift_piecewise_linear(looped, cfg.alpha),
        lags=multiscale_lags(base.times.size),
    )
    return [
        n,
        2.0 ** (-cfg.radius_rate * n),
        sup_distance(base, looped),
        area(looped, 0.0, 0.5),
        dec_loop.U,
        dec_base.a1,
        dec_loop.a1,
        gap,
        gap / 2.0 ** (n / 2),
        rho,
    ]


def run_counterexample(cfg: ExperimentConfig) -> ResultTable:
    """Classical estimator gap and rough distance between the L-path and its looped copy.

    With more than one level a ``growth`` column holds ``gap_n / gap_{n_prev}``
    (the first row repeats NaN).
    """
    _require(cfg, "counterexample")
    rows = [counterexample_row(n, cfg) for n in cfg.n_list]
    columns = COUNTEREXAMPLE_COLUMNS
    if len(rows) > 1:
        gaps = [r[7] for r in rows]
        growth = [np.nan] + [g / p for p, g in zip(gaps[:-1], gaps[1:])]
        rows = [r + [g] for r, g in zip(rows, growth)]
        columns = columns + ("growth",)
    return ResultTable(columns, rows, _metadata(cfg))


# -- sigma sweep ----------------------------------------------------------


def _model(cfg: ExperimentConfig, sigma: float | None = None):
    return constant_sigma_model(cfg.dim, cfg.sigma if sigma is None else sigma, cfg.h)


def _simulation(cfg: ExperimentConfig, grid: TimeGrid | None = None) -> SimSpec:
    grid = grid or make_uniform_grid(cfg.horizon, cfg.steps)
    return SimSpec(np.array(cfg.drift), np.array(cfg.x0), grid, _model(cfg))


def affine_sigma_coefficients(R, model) -> tuple[np.ndarray, np.ndarray]:
    """``(R J^{-1}, K J^{-1})`` so that ``A_hat(sigma) = R J^{-1} - sigma^2/2 K J^{-1}``.

    Valid for ``Sigma = sigma I``: ``R[j, k]`` is the rough integral of
    ``h_k`` against ``X^j``, ``J = int h h^T ds`` and ``K[j, k] = int d_j h_k ds``.
    """
    P = R.path
    d = P.dim
    eye = np.eye(d)

    def form(x):
        return np.einsum("nk,jl->njkl", model.h(x), eye).reshape(len(x), d * d, d)

    def dform(x):
        return np.einsum("nkq,jl->njklq", model.Dh(x), eye).reshape(len(x), d * d, d, d)

    rough = rough_integral(form, dform, R).reshape(d, d)
    hx = model.h(P.values)
    J = left_riemann(np.einsum("na,nb->nab", hx, hx), P.grid)
    K = left_riemann(np.swapaxes(model.Dh(P.values), -1, -2), P.grid)
    Jinv = np.linalg.inv(J)
    return rough @ Jinv, K @ Jinv


def run_sigma_sweep(cfg: ExperimentConfig) -> ResultTable:
    """Rough MLE under ``Sigma = sigma I`` for each listed sigma, one shared path.

    ``affine_residual`` compares each estimate with the exact affine law in
    sigma^2; for d = 1 with ``h = identity`` ``closed_form_residual``
    compares with the explicit scalar formula.
    """
    _require(cfg, "sigma_sweep")
    spec = _simulation(cfg)
    P = simulate_replicas(spec, RngConfig(cfg.seed), 1)[0]
    R = lift_piecewise_linear(P, cfg.alpha)
    reference = rough_mle(R, _model(cfg)).a_hat
    intercept, slope = affine_sigma_coefficients(R, _model(cfg))
    scalar = cfg.dim == 1 and cfg.h == "identity"
    d = cfg.dim
    columns = ["sigma"] + [f"a{j + 1}{k + 1}" for j in range(d) for k in range(d)]
    columns += ["diff_norm", "affine_residual"]
    if scalar:
        columns.append("closed_form_residual")
    rows = []
    for sigma in cfg.sigma_list:
        a_hat = rough_mle(R, _model(cfg, sigma)).a_hat
        predicted = intercept - 0.5 * sigma**2 * slope
        row = [sigma, *a_hat.ravel()]
        row += [
            float(np.linalg.norm(a_hat - reference)),
            float(np.max(np.abs(a_hat - predicted))),
        ]
        if scalar:
            row.append(abs(a_hat[0, 0] - scalar_ou_closed_form(P, sigma)))
        rows.append(row)
    return ResultTable(tuple(columns), rows, _metadata(cfg))


# -- Hurst sweep ----------------------------------------------------------


def hurst_levels(cfg: ExperimentConfig) -> list[float]:
    """Listed Hurst indices plus the Brownian reference ``1/2`` if absent."""
    levels = list(cfg.hurst_list)
    return levels if 0.5 in levels else levels + [0.5]


def hurst_replica(cfg: ExperimentConfig, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Estimator gaps and rough distances to ``H = 1/2`` for replica ``r``.

    Both arrays follow :func:`hurst_levels`.
    """
    levels = hurst_levels(cfg)
    spec = _simulation(cfg)
    paths = simulate_hurst_family(spec, levels, RngConfig(cfg.seed).replica(r))
    lifts = [lift_piecewise_linear(P, cfg.alpha) for P in paths]
    model = _model(cfg)
    ref = levels.index(0.5)
    estimates = [rough_mle(R, model).a_hat for R in lifts]
    lags = multiscale_lags(spec.grid.times.size)
    errors = np.array([np.linalg.norm(a - estimates[ref]) for a in estimates])
    rho = np.array(
        [0.0 if i == ref else rough_distance(R, lifts[ref], lags=lags) for i, R in enumerate(lifts)]
    )
    return errors, rho


def hurst_errors(cfg: ExperimentConfig, order: Sequence[int] | None = None):
    """Per-replica ``(errors, rho)`` arrays, shape (replicas, levels), in index order.

    ``order`` only changes the execution order of the replicas.
    """
    order = range(cfg.replicas) if order is None else order
    results = {r: hurst_replica(cfg, r) for r in order}
    if sorted(results) != list(range(cfg.replicas)):
        raise ValueError("order must be a permutation of the replica indices")
    errors = np.array([results[r][0] for r in range(cfg.replicas)])
    rho = np.array([results[r][1] for r in range(cfg.replicas)])
    return errors, rho


def run_hurst_sweep(cfg: ExperimentConfig) -> ResultTable:
    """Mean and standard error of ``|A_hat^H - A_hat^{1/2}|`` and ``rho_alpha`` per H."""
    _require(cfg, "hurst_sweep")
    levels = hurst_levels(cfg)
    errors, rho = hurst_errors(cfg)
    err_mean, err_se = _mean_se(errors)
    rho_mean, rho_se = _mean_se(rho)
    rows = []
    for H in cfg.hurst_list:
        i = levels.index(H)
        rows.append(
            [H, err_mean[i], err_se[i], rho_mean[i], rho_se[i], fbm_gap_variance(H, 0.5)]
        )
    columns = ("hurst", "mean_error", "se_error", "mean_rho", "se_rho", "gap_variance")
    return ResultTable(columns, rows, _metadata(cfg))


# -- consistency ----------------------------------------------------------


def _prefix(P: Path, horizon: float) -> Path:
    k = P.grid.index_of(horizon)
    return Path(TimeGrid(P.times[: k + 1], P.grid.uniform), P.values[: k + 1])


def consistency_errors(cfg: ExperimentConfig) -> dict:
    """Per-replica estimation errors on nested horizons of one long path per replica.

    Returns arrays of shape (replicas, horizons): Frobenius error norms of
    the classical and rough estimators and the entry-averaged signed error
    of the classical one.
    """
    spec = _simulation(cfg)
    truth = np.array(cfg.drift)
    model = _model(cfg)
    out = {"classical": [], "rough": [], "signed": []}
    for P in simulate_replicas(spec, RngConfig(cfg.seed), cfg.replicas):
        cls_row, rgh_row, sgn_row = [], [], []
        for T in cfg.horizon_list:
            Q = _prefix(P, T)
            a_cls = classical_mle(Q, model).a_hat
            a_rgh = rough_mle(lift_piecewise_linear(Q, cfg.alpha), model).a_hat
            cls_row.append(np.linalg.norm(a_cls - truth))
            rgh_row.append(np.linalg.norm(a_rgh - truth))
            sgn_row.append(float(np.mean(a_cls - truth)))
        out["classical"].append(cls_row)
        out["rough"].append(rgh_row)
        out["signed"].append(sgn_row)
    return {k: np.array(v) for k, v in out.items()}


def loglog_slope(horizons, errors) -> float:
    """Least-squares slope of ``log error`` against ``log T``."""
    return float(np.polyfit(np.log(horizons), np.log(errors), 1)[0])


def run_consistency(cfg: ExperimentConfig) -> ResultTable:
    """Mean estimation error per horizon; the log-log slopes go in the metadata."""
    _require(cfg, "consistency")
    errs = consistency_errors(cfg)
    cls_mean, cls_se = _mean_se(errs["classical"])
    rgh_mean, rgh_se = _mean_se(errs["rough"])
    sgn_mean, sgn_se = _mean_se(errs["signed"])
    rows = np.column_stack(
        [cfg.horizon_list, cls_mean, cls_se, rgh_mean, rgh_se, sgn_mean, sgn_se]
    )
    columns = (
        "horizon",
        "mean_error_classical",
        "se_error_classical",
        "mean_error_rough",
        "se_error_rough",
        "mean_signed_error",
        "se_signed_error",
    )
    summary = {}
    if len(cfg.horizon_list) > 1:
        summary = {
            "slope_classical": loglog_slope(cfg.horizon_list, cls_mean),
            "slope_rough": loglog_slope(cfg.horizon_list, rgh_mean),
        }
    return ResultTable(columns, rows, _metadata(cfg, **summary))


RUNNERS = {
    "counterexample": run_counterexample,
    "sigma_sweep": run_sigma_sweep,
    "hurst_sweep": run_hurst_sweep,
    "consistency": run_consistency,
}


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    return RUNNERS[cfg.experiment](cfg)
