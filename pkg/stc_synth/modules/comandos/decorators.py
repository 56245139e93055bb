# stc_synth/modules/comandos/decorators.py
from __future__ import annotations

import logging
from functools import wraps
from pathlib import Path

import click

from stc_synth.errors import ConfigError, InvalidSpecError, MalformedGameError, NumericalError
from stc_synth.tools.logging_utils import setup_job_logger, write_last_status

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID_INPUT = 2
EXIT_NUMERICAL = 3


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, InvalidSpecError, MalformedGameError)):
        return EXIT_INVALID_INPUT
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_FAILED


def job_command(job_name: str):
    """
    Envuelve el cuerpo de un comando de la CLI.

    - Inicializa el logger del comando (archivo en <out>/logs si hay --out).
    - Pasa el logger al cuerpo como argumento logger=.
    - Traduce las excepciones a códigos de salida: 2 entrada inválida,
      3 falla numérica, 1 cualquier otro error. El mensaje va a stderr.
    - Con --out escribe <out>/status/<job>_last_status.txt.
    """
    def decorator(fn):
        @wraps(fn)
        def wrapper(*args, **kwargs):
            out = kwargs.get("out")
            out_dir = Path(out) if out else None

            logger = setup_job_logger(
                job_name,
                logs_dir=out_dir / "logs" if out_dir else None,
                to_file=out_dir is not None,
            )

            code = EXIT_OK
            try:
                fn(*args, logger=logger, **kwargs)
            except Exception as exc:  # noqa: BLE001
                code = exit_code_for(exc)
                if code == EXIT_FAILED:
                    logger.exception("[%s] Error inesperado", job_name.upper())
                else:
                    logger.error("[%s] %s", job_name.upper(), exc)
                click.echo(f"ERROR: {exc}", err=True)
            finally:
                if out_dir is not None:
                    status = "SUCCESS" if code == EXIT_OK else f"FAILED_{code}"
                    write_last_status(job_name, status, out_dir / "status")
                package_logger = logging.getLogger("stc_synth")
                for handler in list(package_logger.handlers):
                    package_logger.removeHandler(handler)
                    handler.close()

            if code != EXIT_OK:
                click.get_current_context().exit(code)

        return wrapper

    return decorator
