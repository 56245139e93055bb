# stc_synth/repositories/trace_repository.py
"""
Exportación e importación de trazas en CSV.

Encabezado: i,t,tau,k,x1..xn,V  (V vacío cuando no hay datos de Lyapunov).
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional

import numpy as np

from stc_synth.errors import ConfigError
from stc_synth.modules.simulacion.simulation import Trace

_FIXED = ("i", "t", "tau", "k")


class TraceRepository:
    def __init__(self, base_dir: Path):
        self.base_dir = Path(base_dir)

    def _path(self, name: str | Path) -> Path:
        path = Path(name)
        return path if path.is_absolute() else self.base_dir / path

    def save(self, trace: Trace, name: str | Path) -> Path:
        path = self._path(name)
        path.parent.mkdir(parents=True, exist_ok=True)

        n_x = trace.directions.shape[1]
        header = list(_FIXED) + [f"x{j + 1}" for j in range(n_x)] + ["V"]

        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for i, t, tau, k, x, V in trace.rows:
                writer.writerow(
                    [i, repr(t), repr(tau), k]
                    + [repr(float(v)) for v in x]
                    + ["" if V is None else repr(V)]
                )

        return path

    def load(self, name: str | Path, P: Optional[np.ndarray] = None) -> Trace:
        """
        Lee un CSV exportado. h se deduce de tau/k de la primera fila.
        Cualquier problema de forma se reporta como ConfigError con fila y columna.
        """
        path = self._path(name)
        try:
            with open(path, newline="", encoding="utf-8") as f:
                rows = list(csv.reader(f))
        except OSError as exc:
            raise ConfigError(f"No se pudo leer la traza {path}: {exc}") from exc

        if not rows:
            raise ConfigError(f"{path}: archivo vacío.")

        header = rows[0]
        if tuple(header[:4]) != _FIXED or len(header) < 6 or header[-1] != "V":
            raise ConfigError(f"{path}: encabezado inválido {header!r}; se espera i,t,tau,k,x1..xn,V.")

        n_x = len(header) - 5
        expected = [f"x{j + 1}" for j in range(n_x)]
        if header[4:-1] != expected:
            raise ConfigError(f"{path}: columnas de estado inválidas {header[4:-1]!r}.")

        body = rows[1:]
        if not body:
            raise ConfigError(f"{path}: la traza no tiene filas.")

        ks, taus, states = [], [], []
        for line, row in enumerate(body, start=2):
            if len(row) != len(header):
                raise ConfigError(f"{path}: fila {line} tiene {len(row)} columnas; se esperaban {len(header)}.")
            try:
                taus.append(float(row[2]))
                ks.append(int(row[3]))
                states.append([float(v) for v in row[4:4 + n_x]])
            except ValueError as exc:
                raise ConfigError(f"{path}: fila {line}: {exc}") from exc

        if any(k < 1 for k in ks):
            raise ConfigError(f"{path}: la columna k debe ser >= 1.")

        h = taus[0] / ks[0]
        if h <= 0 or not np.isfinite(h):
            raise ConfigError(f"{path}: tau/k no define un h positivo.")

        return Trace.from_states(
            ks,
            np.asarray(states),
            round(h, 12),
            P=P,
            metadata={"policy": path.stem, "source": str(path)},
        )
