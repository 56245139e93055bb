# stc_synth/config/schema.py
"""
Configuración de una corrida (JSON validado con pydantic).

Ejemplo mínimo:
{
  "plant":   {"A": [[0, 1], [-2, 3]], "B": [[0], [1]], "K": [[1, -4]]},
  "trigger": {"kind": "predictive_lyapunov", "P": [[1, 0.25], [0.25, 1]],
              "Q_lyap": [[0.5, 0.25], [0.25, 1.5]], "rho": 0.5},
  "h": 0.1,
  "kmax": 20,
  "run": {"l_max": 3, "budget": 100000, "seed": 0}
}

Los campos desconocidos se rechazan. Todo error se reporta como ConfigError con
la ruta del campo, por ejemplo plant.A[1].
"""
from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_core import PydanticCustomError

from stc_synth.config.settings import (
    CALIBRATION_GRID,
    DEFAULT_BUDGET,
    DEFAULT_L_MAX,
    DEFAULT_N_INIT,
    DEFAULT_SEED,
    DEFAULT_STEPS,
)
from stc_synth.errors import ConfigError
from stc_synth.modules.control.lti_core import Plant, TriggerSpec, predictive_trigger
from stc_synth.modules.sintesis.calibration import PredictiveTemplate

Matrix = list[list[float]]

_TRIGGER_TAGS = {"quadratic", "predictive_lyapunov"}


def _check_matrix(value: Matrix) -> Matrix:
    if not value or not value[0]:
        raise PydanticCustomError("empty_matrix", "la matriz no puede estar vacía")

    width = len(value[0])
    for i, row in enumerate(value):
        if len(row) != width:
            raise PydanticCustomError(
                "ragged_matrix",
                "fila con {got} columnas; se esperaban {width}",
                {"row": i, "got": len(row), "width": width},
            )
        if not np.all(np.isfinite(row)):
            raise PydanticCustomError("non_finite", "la fila tiene valores no finitos", {"row": i})

    return value


def _shape(value: Matrix) -> tuple[int, int]:
    return len(value), len(value[0])


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PlantConfig(_Strict):
    A: Matrix
    B: Matrix
    K: Matrix

    _matrices = field_validator("A", "B", "K")(_check_matrix)


class QuadraticTrigger(_Strict):
    kind: Literal["quadratic"]
    Q: Matrix

    _matrices = field_validator("Q")(_check_matrix)


class PredictiveTrigger(_Strict):
    kind: Literal["predictive_lyapunov"]
    P: Matrix
    Q_lyap: Matrix
    rho: float = Field(gt=0.0, lt=1.0)

    _matrices = field_validator("P", "Q_lyap")(_check_matrix)


TriggerConfig = Annotated[Union[QuadraticTrigger, PredictiveTrigger], Field(discriminator="kind")]


class CalibrateConfig(_Strict):
    target: float = Field(0.233, gt=0.0)
    grid: list[float] = Field(default_factory=lambda: list(CALIBRATION_GRID), min_length=1)

    @field_validator("grid")
    @classmethod
    def _grid_in_range(cls, grid: list[float]) -> list[float]:
        for i, rho in enumerate(grid):
            if not 0.0 < rho < 1.0:
                raise PydanticCustomError("rho_range", "rho fuera de (0, 1): {rho}", {"row": i, "rho": rho})
        return grid


class RunConfig(_Strict):
    l_max: int = Field(DEFAULT_L_MAX, ge=1)
    budget: int = Field(DEFAULT_BUDGET, ge=1)
    seed: int = DEFAULT_SEED
    n_init: int = Field(DEFAULT_N_INIT, ge=1)
    steps: int = Field(DEFAULT_STEPS, ge=1)
    stop_eps: float = Field(0.0, ge=0.0)
    improvement_stop: float = 0.0
    calibrate: Optional[CalibrateConfig] = None


class RunnerConfig(_Strict):
    plant: PlantConfig
    trigger: TriggerConfig
    h: float = Field(gt=0.0)
    kmax: int = Field(ge=1)
    run: RunConfig = Field(default_factory=RunConfig)

    @model_validator(mode="after")
    def _dimensions(self) -> "RunnerConfig":
        n_x, cols = _shape(self.plant.A)
        if cols != n_x:
            raise ValueError(f"plant.A debe ser cuadrada; se recibió {n_x}x{cols}")

        b_rows, n_u = _shape(self.plant.B)
        if b_rows != n_x:
            raise ValueError(f"plant.B debe tener {n_x} filas; se recibieron {b_rows}")
        if _shape(self.plant.K) != (n_u, n_x):
            raise ValueError(f"plant.K debe ser {n_u}x{n_x}; se recibió {_shape(self.plant.K)}")

        if isinstance(self.trigger, QuadraticTrigger):
            if _shape(self.trigger.Q) != (2 * n_x, 2 * n_x):
                raise ValueError(f"trigger.Q debe ser {2 * n_x}x{2 * n_x}")
        else:
            for name in ("P", "Q_lyap"):
                if _shape(getattr(self.trigger, name)) != (n_x, n_x):
                    raise ValueError(f"trigger.{name} debe ser {n_x}x{n_x}")

        return self

    @property
    def h_exact(self) -> Fraction:
        return Fraction(str(self.h))

    def to_plant(self) -> Plant:
        return Plant(A=self.plant.A, B=self.plant.B, K_fb=self.plant.K)

    def to_trigger(self, plant: Optional[Plant] = None, rho: Optional[float] = None) -> TriggerSpec:
        """TriggerSpec de la corrida; rho reemplaza el de la configuración (calibración)."""
        plant = plant or self.to_plant()

        if isinstance(self.trigger, QuadraticTrigger):
            return TriggerSpec(Q=self.trigger.Q, h=self.h, kmax=self.kmax, h_exact=self.h_exact)

        return predictive_trigger(
            plant,
            self.trigger.P,
            self.trigger.Q_lyap,
            self.trigger.rho if rho is None else rho,
            self.h,
            self.kmax,
            h_exact=self.h_exact,
        )

    def to_template(self) -> PredictiveTemplate:
        """Plantilla de calibración; solo existe para la condición predictiva."""
        if not isinstance(self.trigger, PredictiveTrigger):
            raise ConfigError("trigger.kind: la calibración requiere 'predictive_lyapunov'.")

        return PredictiveTemplate(
            P=np.asarray(self.trigger.P, dtype=float),
            Q_lyap=np.asarray(self.trigger.Q_lyap, dtype=float),
            h=self.h,
            kmax=self.kmax,
            h_exact=self.h_exact,
        )


def format_validation_error(exc: ValidationError, prefix: str = "") -> str:
    """
    Convierte los errores de pydantic en líneas 'ruta: mensaje'.
    Las etiquetas del discriminador (quadratic, predictive_lyapunov) se omiten
    y el índice de fila de las matrices se agrega como [i].
    """
    lines = []
    for err in exc.errors():
        path = prefix
        for part in err["loc"]:
            if part in _TRIGGER_TAGS:
                continue
            if isinstance(part, int):
                path += f"[{part}]"
            else:
                path += f".{part}" if path else str(part)

        row = (err.get("ctx") or {}).get("row")
        if row is not None:
            path += f"[{row}]"

        lines.append(f"{path or '<raíz>'}: {err['msg']}")

    return "; ".join(lines)


def parse_runner_config(document: dict) -> RunnerConfig:
    try:
        return RunnerConfig.model_validate(document)
    except ValidationError as exc:
        raise ConfigError(f"Configuración inválida: {format_validation_error(exc)}") from exc


def load_runner_config(path: Path) -> RunnerConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"No se pudo leer la configuración {path}: {exc}") from exc

    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: JSON inválido en la línea {exc.lineno}, columna {exc.colno}.") from exc

    if not isinstance(document, dict):
        raise ConfigError(f"{path}: la configuración debe ser un objeto JSON.")

    return parse_runner_config(document)
