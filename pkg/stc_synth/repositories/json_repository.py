# stc_synth/repositories/json_repository.py
"""
Persistencia de modelos, estrategias, reportes y calibraciones en JSON.

- Orden de llaves fijo e indent=2: las mismas entradas producen los mismos bytes.
- Los racionales se guardan como num/den exactos (más decimal en los reportes).
- La carga valida la forma con pydantic y reporta la ruta del campo en ConfigError.
"""
from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from stc_synth.config.schema import format_validation_error
from stc_synth.errors import ConfigError
from stc_synth.modules.control.petc_deadlines import DeadlineWord
from stc_synth.modules.juegos.weighted_game import WeightedGame
from stc_synth.modules.sintesis.calibration import CalibrationResult
from stc_synth.modules.sintesis.synthesis import StrategyTable, SynthesisReport


def sha256_file(path: Path, chunk_size: int = 1024 * 1024) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(chunk_size), b""):
            h.update(chunk)
    return h.hexdigest()


class _StateDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: int = Field(ge=0)
    word: list[int] = Field(min_length=1)
    witness: list[float]


class _ModelDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    l: int = Field(ge=1)
    h: float = Field(gt=0.0)
    kmax: int = Field(ge=1)
    states: list[_StateDocument] = Field(min_length=1)
    edges: list[tuple[int, int, int, int]]


class _TableEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    word: list[int] = Field(min_length=1)
    action: int = Field(ge=1)


class _StrategyDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    l: int = Field(ge=1)
    h: float = Field(gt=0.0)
    game_value_num: int
    game_value_den: int = Field(ge=1)
    upper_num: int
    upper_den: int = Field(ge=1)
    table: list[_TableEntry]


class JsonRepository:
    """
    Repositorio de documentos JSON bajo una carpeta de salida.

    Las rutas relativas se resuelven contra base_dir; las absolutas se respetan.
    """

    def __init__(self, base_dir: Path):
        self.base_dir = Path(base_dir)

    def _path(self, name: str | Path) -> Path:
        path = Path(name)
        return path if path.is_absolute() else self.base_dir / path

    def write(self, name: str | Path, document: Any) -> Path:
        path = self._path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(document, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        return path

    def read(self, name: str | Path) -> Any:
        path = self._path(name)
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"No se pudo leer {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: JSON inválido en la línea {exc.lineno}, columna {exc.colno}.") from exc

    def _validate(self, schema: type[BaseModel], document: Any, path: Path):
        try:
            return schema.model_validate(document)
        except ValidationError as exc:
            raise ConfigError(f"{path}: {format_validation_error(exc)}") from exc

    # ------------------------------------------------------------------
    # Modelos de tráfico
    # ------------------------------------------------------------------
    def save_model(self, game: WeightedGame, name: str | Path) -> Path:
        if game.output is None or game.witnesses is None:
            raise ConfigError("Solo se pueden guardar modelos de tráfico (con palabras y testigos).")

        document = {
            "l": game.l,
            "h": game.h,
            "kmax": game.kmax,
            "states": [
                {
                    "id": i,
                    "word": list(game.labels[i].indices),
                    "witness": [float(v) for v in game.witnesses[i][0]],
                }
                for i in range(game.num_states)
            ],
            "edges": [list(edge) for edge in game.edges],
        }
        return self.write(name, document)

    def load_model(self, name: str | Path) -> WeightedGame:
        path = self._path(name)
        doc = self._validate(_ModelDocument, self.read(path), path)

        states = sorted(doc.states, key=lambda s: s.id)
        if [s.id for s in states] != list(range(len(states))):
            raise ConfigError(f"{path}: states.id debe ser 0..{len(states) - 1} sin huecos.")

        words = [DeadlineWord(tuple(s.word)) for s in states]
        if any(len(word) != doc.l for word in words):
            raise ConfigError(f"{path}: states.word debe tener longitud l={doc.l}.")

        game = WeightedGame.from_edges(
            len(words),
            doc.edges,
            labels=words,
            output=tuple(word.first for word in words),
            witnesses=tuple(np.asarray([s.witness], dtype=float) for s in states),
            l=doc.l,
            h=doc.h,
            kmax=doc.kmax,
            h_exact=Fraction(str(doc.h)),
        )
        game.validate_abstraction()
        return game

    # ------------------------------------------------------------------
    # Estrategias
    # ------------------------------------------------------------------
    def save_strategy(self, strategy: StrategyTable, name: str | Path) -> Path:
        document = {
            "l": strategy.l,
            "h": float(strategy.h),
            "game_value_num": strategy.game_value.numerator,
            "game_value_den": strategy.game_value.denominator,
            "upper_num": strategy.upper.numerator,
            "upper_den": strategy.upper.denominator,
            "table": [
                {"word": list(word.indices), "action": action}
                for word, action in sorted(strategy.table.items())
            ],
        }
        return self.write(name, document)

    def load_strategy(self, name: str | Path) -> StrategyTable:
        path = self._path(name)
        doc = self._validate(_StrategyDocument, self.read(path), path)

        table: dict[DeadlineWord, int] = {}
        for i, entry in enumerate(doc.table):
            word = DeadlineWord(tuple(entry.word))
            if len(word) != doc.l:
                raise ConfigError(f"{path}: table[{i}].word debe tener longitud l={doc.l}.")
            if entry.action > word.first:
                raise ConfigError(f"{path}: table[{i}].action supera el deadline {word.first}.")
            table[word] = entry.action

        return StrategyTable(
            l=doc.l,
            h=Fraction(str(doc.h)),
            table=table,
            game_value=Fraction(doc.game_value_num, doc.game_value_den),
            upper=Fraction(doc.upper_num, doc.upper_den),
        )

    # ------------------------------------------------------------------
    # Reportes
    # ------------------------------------------------------------------
    def save_report(
        self,
        report: SynthesisReport,
        name: str | Path,
        config_sha256: str | None = None,
        calibration: CalibrationResult | None = None,
    ) -> Path:
        document: dict[str, Any] = {"config_sha256": config_sha256}
        document.update(report.to_document())
        if calibration is not None:
            document["calibration"] = {
                "rho": calibration.rho,
                "l": calibration.l,
                "gap": round(calibration.gap, 6),
                "consistent": calibration.consistent,
                "reproduced": calibration.reproduced,
            }
        return self.write(name, document)

    def save_calibration(self, calibration: CalibrationResult, name: str | Path) -> Path:
        return self.write(name, calibration.to_document())
