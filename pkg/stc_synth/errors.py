# stc_synth/errors.py

class StcError(Exception):
    """
    Error base del toolkit.

    El código de librería siempre lanza excepciones de esta familia. Solo la capa
    de comandos las traduce a códigos de salida y mensajes en stderr.
    """


class ConfigError(StcError):
    """
    Configuración o archivo de entrada inválido (JSON, CSV, modelo persistido).

    El mensaje debe incluir la ruta del campo problemático, por ejemplo plant.A[1].
    """


class InvalidSpecError(StcError, ValueError):
    """
    Datos de planta o de triggering inconsistentes: dimensiones, valores no
    finitos, matrices de Lyapunov que no son definidas positivas, h o kmax
    fuera de rango.

    Hereda de ValueError para que pydantic lo convierta en error de validación.
    """


class NumericalError(StcError):
    """Falla numérica durante el cálculo. La CLI la reporta con código 3."""


class NumericalOverflowError(NumericalError):
    """La matriz de transición dejó de ser finita: tau demasiado grande para la dinámica."""


class DivergedError(NumericalError):
    """La norma del estado simulado superó el límite configurado."""


class SolverError(NumericalError):
    """La iteración de valores no pudo certificar los valores antes del horizonte máximo."""


class AbstractionError(NumericalError):
    """Violación de un invariante interno al construir la abstracción."""


class MalformedGameError(StcError):
    """Juego con estados bloqueantes o aristas inconsistentes."""
