import logging
from datetime import datetime
from pathlib import Path

from stc_synth.config.settings import LOG_DIR, LOG_LEVEL


def build_log_path(job_name: str, logs_dir: Path | None = None, dated: bool = True) -> Path:
    """
    Construye la ruta del log de un comando.
    job_name: ej 'pipeline'
    dated: si True -> pipeline_2026-03-04.log
    """
    job = (job_name or "job").strip().replace(" ", "_")
    if logs_dir is None:
        logs_dir = LOG_DIR

    logs_dir.mkdir(parents=True, exist_ok=True)

    if dated:
        d = datetime.now().strftime("%Y-%m-%d")
        return logs_dir / f"{job}_{d}.log"
    return logs_dir / f"{job}.log"


def setup_job_logger(
    job_name: str,
    level: int | str | None = None,
    logs_dir: Path | None = None,
    dated: bool = True,
    to_file: bool = True,
) -> logging.Logger:
    """
    Logger estándar de los comandos:
    - StreamHandler a stderr (stdout queda reservado para las líneas de resumen)
    - FileHandler opcional a <out>/logs o a STC_LOG_DIR
    - Evita duplicación de handlers si el comando se ejecuta varias veces

    El logger raíz del paquete (stc_synth) recibe los mismos handlers, así los
    módulos de librería que usan logging.getLogger(__name__) quedan en el mismo archivo.
    """
    if level is None:
        level = LOG_LEVEL

    logger = logging.getLogger(f"stc_synth.jobs.{job_name}")
    package_logger = logging.getLogger("stc_synth")
    package_logger.setLevel(level)
    package_logger.propagate = False

    # Cada ejecución reemplaza los handlers anteriores: en tests la CLI se invoca
    # muchas veces dentro del mismo proceso y con carpetas de salida distintas.
    for handler in list(package_logger.handlers):
        package_logger.removeHandler(handler)
        handler.close()

    fmt = logging.Formatter(
        fmt="%(asctime)s | %(levelname)s | %(name)s | %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    sh = logging.StreamHandler()
    sh.setLevel(level)
    sh.setFormatter(fmt)
    package_logger.addHandler(sh)

    if to_file:
        log_path = build_log_path(job_name, logs_dir=logs_dir, dated=dated)
        fh = logging.FileHandler(log_path, encoding="utf-8")
        fh.setLevel(level)
        fh.setFormatter(fmt)
        package_logger.addHandler(fh)
        logger.info("Logger inicializado. Archivo: %s", str(log_path))

    return logger


def write_last_status(job_name: str, status: str, status_dir: Path) -> Path:
    """
    Escribe <job>_last_status.txt con SUCCESS o FAILED_<código>.

    Permite que un scheduler externo revise el resultado de la última corrida
    sin tener que leer el log completo.
    """
    status_dir.mkdir(parents=True, exist_ok=True)
    path = status_dir / f"{job_name}_last_status.txt"
    path.write_text(status, encoding="utf-8")
    return path
