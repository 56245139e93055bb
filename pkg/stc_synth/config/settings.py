import os
from pathlib import Path

from dotenv import load_dotenv


# Ruta raíz del proyecto.
# Permite cargar el archivo .env sin depender de la carpeta desde donde se ejecute
# la CLI, pytest o un script externo.
ROOT_DIR = Path(__file__).resolve().parents[2]
load_dotenv(ROOT_DIR / ".env")


def _float_list(raw: str) -> tuple[float, ...]:
    return tuple(
        float(item)
        for item in raw.split(",")
        if item.strip()
    )


# ---------------------------------------------------------------------
# Logging
# ---------------------------------------------------------------------
# Carpeta por defecto de los logs de los comandos. Cuando un comando recibe
# --out, los logs se escriben en <out>/logs y esta ruta no se usa.
LOG_DIR = Path(os.getenv("STC_LOG_DIR", str(ROOT_DIR / "logs")).strip())

LOG_LEVEL = os.getenv("STC_LOG_LEVEL", "INFO").strip().upper()


# ---------------------------------------------------------------------
# Tolerancias numéricas
# ---------------------------------------------------------------------
SYMMETRY_TOL = float(os.getenv("STC_SYMMETRY_TOL", "1e-12").strip())

PD_TOL = float(os.getenv("STC_PD_TOL", "1e-12").strip())

# Norma a partir de la cual una simulación se considera divergente.
DIVERGENCE_NORM = float(os.getenv("STC_DIVERGENCE_NORM", "1e100").strip())


# ---------------------------------------------------------------------
# Valores por defecto de ejecución
# ---------------------------------------------------------------------
DEFAULT_SEED = int(os.getenv("STC_DEFAULT_SEED", "0").strip())

DEFAULT_BUDGET = int(os.getenv("STC_DEFAULT_BUDGET", "100000").strip())

# Máximo de testigos guardados por estado abstracto (reservoir sampling).
WITNESS_CAP = int(os.getenv("STC_WITNESS_CAP", "64").strip())

# Rondas de muestras frescas al derivar transiciones; termina antes si una ronda
# no agrega aristas ni estados. El lote es max(REFINE_BATCH_MIN, presupuesto // 4).
REFINE_ROUNDS = int(os.getenv("STC_REFINE_ROUNDS", "8").strip())

REFINE_BATCH_MIN = int(os.getenv("STC_REFINE_BATCH_MIN", "1000").strip())

DEFAULT_L_MAX = int(os.getenv("STC_DEFAULT_L_MAX", "3").strip())

DEFAULT_STEPS = int(os.getenv("STC_DEFAULT_STEPS", "2000").strip())

DEFAULT_N_INIT = int(os.getenv("STC_DEFAULT_N_INIT", "100").strip())

# Cantidad de trazas exportadas por política en el pipeline.
PIPELINE_TRACE_COUNT = int(os.getenv("STC_PIPELINE_TRACE_COUNT", "10").strip())


# ---------------------------------------------------------------------
# Solver y calibración
# ---------------------------------------------------------------------
# Horizonte inicial de la iteración de valores. Se duplica hasta certificar
# o hasta alcanzar la cota 4·|X|³·W.
SOLVER_INITIAL_HORIZON = int(os.getenv("STC_SOLVER_INITIAL_HORIZON", "64").strip())

# Timeout por consulta del backend exacto (milisegundos).
Z3_TIMEOUT_MS = int(os.getenv("STC_Z3_TIMEOUT_MS", "10000").strip())

CALIBRATION_GRID = _float_list(
    os.getenv(
        "STC_CALIBRATION_GRID",
        "0.05,0.10,0.15,0.20,0.25,0.30,0.35,0.40,0.45,0.50,"
        "0.55,0.60,0.65,0.70,0.75,0.80,0.85,0.90,0.95",
    )
)

# Tolerancia con la que se considera reproducido un SAIST objetivo.
SAIST_TOLERANCE = float(os.getenv("STC_SAIST_TOLERANCE", "0.02").strip())

# Tamaño reducido de la simulación de control cruzado durante la calibración.
CALIBRATION_SIM_N_INIT = int(os.getenv("STC_CALIBRATION_SIM_N_INIT", "20").strip())

CALIBRATION_SIM_STEPS = int(os.getenv("STC_CALIBRATION_SIM_STEPS", "400").strip())

# Mayor l probado por rho hasta que el modelo coincide con la simulación.
CALIBRATION_L_MAX = int(os.getenv("STC_CALIBRATION_L_MAX", "3").strip())
