"""Experiment configuration: strict JSON schema with per-experiment defaults.

Unknown keys are rejected. Fields left out of the JSON are filled in by
:func:`resolve`, and the resolved config is what every result table echoes.
"""

from __future__ import annotations

import json
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError

EXPERIMENTS = ("counterexample", "sigma_sweep", "hurst_sweep", "consistency")

Experiment = Literal["counterexample", "sigma_sweep", "hurst_sweep", "consistency"]

# Defaults are sized so that each experiment runs in seconds on a laptop.
DEFAULTS = {
    "counterexample": {
        "dim": 2,
        "n_list": list(range(4, 13)),
    },
    "sigma_sweep": {
        "dim": 2,
        "horizon": 10.0,
        "steps": 4096,
        "sigma_list": [0.8, 0.9, 1.0, 1.1, 1.25],
    },
    "hurst_sweep": {
        "dim": 1,
        "horizon": 10.0,
        "steps": 4096,
        "hurst_list": [0.4, 0.45, 0.48, 0.5],
    },
    "consistency": {
        "dim": 1,
        "horizon_list": [12.5, 25.0, 50.0, 100.0],
        "steps": 10000,
    },
}


def _default_drift(dim: int) -> list[list[float]]:
    if dim == 2:
        return [[-1.0, 0.5], [-0.5, -1.0]]
    return (-np.eye(dim)).tolist()


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    experiment: Experiment
    dim: Optional[int] = Field(default=None, ge=1)
    horizon: Optional[float] = Field(default=None, gt=0)
    steps: Optional[int] = Field(default=None, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    replicas: int = Field(default=1, ge=1)
    alpha: float = Field(default=0.4, gt=1 / 3, le=0.5)
    drift: Optional[list[list[float]]] = None
    sigma: float = Field(default=1.0, gt=0)
    h: Literal["identity", "cubic"] = "identity"
    x0: Optional[list[float]] = None
    sigma_list: Optional[list[float]] = None
    hurst_list: Optional[list[float]] = None
    n_list: Optional[list[int]] = None
    horizon_list: Optional[list[float]] = None
    radius_rate: float = Field(default=0.25, gt=0)
    line_steps: int = Field(default=16, ge=1)
    loop_samples: int = Field(default=64, ge=3)
    output: Optional[str] = None

    @field_validator("sigma_list")
    @classmethod
    def _positive_sigmas(cls, v):
        if v is not None:
            if not v:
                raise ValueError("must not be empty")
            for s in v:
                if not s > 0:
                    raise ValueError(f"sigma must be positive, got {s}")
        return v

    @field_validator("hurst_list")
    @classmethod
    def _hurst_range(cls, v):
        if v is not None:
            if not v:
                raise ValueError("must not be empty")
            for H in v:
                if not 1 / 3 < H < 1:
                    raise ValueError(f"Hurst index must lie in (1/3, 1), got {H}")
        return v

    @field_validator("n_list")
    @classmethod
    def _levels(cls, v):
        if v is not None:
            if not v:
                raise ValueError("must not be empty")
            for n in v:
                if n < 1:
                    raise ValueError(f"dyadic level must be >= 1, got {n}")
        return v

    @field_validator("horizon_list")
    @classmethod
    def _horizons(cls, v):
        if v is not None:
            if not v:
                raise ValueError("must not be empty")
            for T in v:
                if not T > 0:
                    raise ValueError(f"horizon must be positive, got {T}")
        return v

    @model_validator(mode="after")
    def _shapes(self):
        d = self.dim
        if d is not None and self.drift is not None:
            if len(self.drift) != d or any(len(row) != d for row in self.drift):
                raise ValueError(f"drift must be a {d}x{d} matrix")
        if d is not None and self.x0 is not None and len(self.x0) != d:
            raise ValueError(f"x0 must have {d} entries")
        if self.experiment == "counterexample" and d not in (None, 2):
            raise ValueError("the counterexample lives in dimension 2")
        return self


def _loc(err: dict) -> str:
    return ".".join(str(p) for p in err["loc"]) or "<root>"


def _raise_config_error(exc: ValidationError):
    err = exc.errors()[0]
    raise ConfigError(err["msg"], field=_loc(err)) from None


def resolve(cfg: ExperimentConfig) -> ExperimentConfig:
    """Fill every unset field with the experiment's default."""
    values = cfg.model_dump()
    for key, val in DEFAULTS[cfg.experiment].items():
        if values.get(key) is None:
            values[key] = val
    d = values["dim"]
    if values["drift"] is None:
        values["drift"] = _default_drift(d)
    if values["x0"] is None:
        values["x0"] = [0.0] * d
    if cfg.experiment == "consistency" and values["horizon"] is None:
        values["horizon"] = max(values["horizon_list"])
    try:
        out = ExperimentConfig.model_validate(values)
    except ValidationError as exc:
        _raise_config_error(exc)
    if out.experiment == "consistency":
        grid_dt = out.horizon / out.steps
        for T in out.horizon_list:
            k = T / grid_dt
            if T > out.horizon * (1 + 1e-12) or abs(k - round(k)) > 1e-9 * max(k, 1):
                raise ConfigError(
                    f"{T} is not a grid time of [0, {out.horizon}] with {out.steps} steps",
                    field="horizon_list",
                )
    return out


def parse_config(text: str, seed: Optional[int] = None) -> ExperimentConfig:
    """Validate a JSON config and resolve defaults; ``seed`` overrides the file."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (line {exc.lineno})", field="<root>") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object", field="<root>")
    if seed is not None:
        raw = {**raw, "seed": seed}
    try:
        cfg = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        _raise_config_error(exc)
    return resolve(cfg)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return cfg.model_dump(mode="json")
