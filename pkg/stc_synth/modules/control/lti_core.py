# stc_synth/modules/control/lti_core.py
"""
Núcleo LTI del toolkit.

Responsabilidad:
- Representar la planta en tiempo continuo (A, B) con su ganancia K.
- Calcular la matriz de transición con entrada retenida M(t).
- Construir las formas cuadráticas usadas por el triggering y por los deadlines.

Todos los objetos son inmutables después de construidos; se pueden compartir
entre hilos o procesos sin copias.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.linalg as la

from stc_synth.config.settings import PD_TOL, SYMMETRY_TOL
from stc_synth.errors import InvalidSpecError, NumericalOverflowError


logger = logging.getLogger(__name__)


def _as_matrix(value, name: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as ex:
        raise InvalidSpecError(f"{name} no es una matriz numérica: {ex}") from ex

    if arr.ndim != 2:
        raise InvalidSpecError(f"{name} debe ser una matriz 2D; se recibió ndim={arr.ndim}.")

    if not np.all(np.isfinite(arr)):
        raise InvalidSpecError(f"{name} contiene valores no finitos.")

    arr.setflags(write=False)
    return arr


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    """
    Parte simétrica de una matriz. Las formas cuadráticas solo ven esta parte.
    """
    sym = (matrix + matrix.T) / 2.0
    sym.setflags(write=False)
    return sym


def _fingerprint(*parts) -> str:
    h = hashlib.sha256()
    for part in parts:
        if part is None:
            h.update(b"none|")
        elif isinstance(part, np.ndarray):
            h.update(str(part.shape).encode("utf-8"))
            h.update(np.ascontiguousarray(part).tobytes())
        else:
            h.update(repr(part).encode("utf-8"))
        h.update(b"|")
    return h.hexdigest()


def _require_positive_definite(matrix: np.ndarray, name: str) -> None:
    eig = np.linalg.eigvalsh(matrix)
    if eig.min() <= PD_TOL:
        raise InvalidSpecError(
            f"{name} no es definida positiva (autovalor mínimo {eig.min():.3e})."
        )


@dataclass(frozen=True, eq=False)
class Plant:
    """
    Planta LTI en tiempo continuo con realimentación de estado muestreada:
    dx/dt = A x + B K x̂.

    La igualdad y el hash se basan en el contenido de las matrices, así una
    planta se puede usar como llave de caché.
    """

    A: np.ndarray
    B: np.ndarray
    K_fb: np.ndarray
    fingerprint: str = field(init=False, repr=False)

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        K_fb = _as_matrix(self.K_fb, "K")

        n_x = A.shape[0]
        if A.shape != (n_x, n_x):
            raise InvalidSpecError(f"A debe ser cuadrada; se recibió {A.shape}.")
        if B.shape[0] != n_x:
            raise InvalidSpecError(f"B debe tener {n_x} filas; se recibió {B.shape}.")
        n_u = B.shape[1]
        if K_fb.shape != (n_u, n_x):
            raise InvalidSpecError(f"K debe ser {n_u}x{n_x}; se recibió {K_fb.shape}.")

        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "K_fb", K_fb)
        object.__setattr__(self, "fingerprint", _fingerprint(A, B, K_fb))

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def closed_loop(self) -> np.ndarray:
        return self.A + self.B @ self.K_fb

    def __eq__(self, other) -> bool:
        return isinstance(other, Plant) and other.fingerprint == self.fingerprint

    def __hash__(self) -> int:
        return hash(self.fingerprint)


@dataclass(frozen=True, eq=False)
class TriggerSpec:
    """
    Condición de triggering cuadrática [x; x̂]ᵀ Q [x; x̂] > 0, revisada cada h
    unidades de tiempo, con tiempo máximo entre muestras h·kmax.

    P, Q_lyap y rho solo están presentes cuando Q se construyó con la condición
    predictiva de Lyapunov; la simulación los usa para reportar V(x).

    h_exact guarda h como fracción exacta (0.1 -> 1/10) para que los valores
    físicos del juego sean racionales exactos.
    """

    Q: np.ndarray
    h: float
    kmax: int
    P: Optional[np.ndarray] = None
    Q_lyap: Optional[np.ndarray] = None
    rho: Optional[float] = None
    h_exact: Optional[Fraction] = None
    fingerprint: str = field(init=False, repr=False)

    def __post_init__(self):
        Q = _as_matrix(self.Q, "Q")
        if Q.shape[0] != Q.shape[1] or Q.shape[0] % 2:
            raise InvalidSpecError(f"Q debe ser cuadrada de dimensión par; se recibió {Q.shape}.")
        Q = symmetrize(Q)

        h = float(self.h)
        if not np.isfinite(h) or h <= 0:
            raise InvalidSpecError(f"h debe ser positivo; se recibió {self.h!r}.")

        if int(self.kmax) != self.kmax or int(self.kmax) < 1:
            raise InvalidSpecError(f"kmax debe ser un entero >= 1; se recibió {self.kmax!r}.")

        P = symmetrize(_as_matrix(self.P, "P")) if self.P is not None else None
        Q_lyap = symmetrize(_as_matrix(self.Q_lyap, "Q_lyap")) if self.Q_lyap is not None else None

        h_exact = self.h_exact
        if h_exact is None:
            # str(float) es la representación decimal más corta: 0.1 -> '0.1' -> 1/10.
            h_exact = Fraction(str(h))

        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "kmax", int(self.kmax))
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Q_lyap", Q_lyap)
        object.__setattr__(self, "h_exact", Fraction(h_exact))
        object.__setattr__(
            self,
            "fingerprint",
            _fingerprint(Q, h, self.kmax, P, Q_lyap, self.rho),
        )

    @property
    def n_x(self) -> int:
        return self.Q.shape[0] // 2

    def check_plant(self, plant: Plant) -> None:
        if self.n_x != plant.n_x:
            raise InvalidSpecError(
                f"Q es de dimensión {self.Q.shape} pero la planta tiene n_x={plant.n_x}."
            )

    def __eq__(self, other) -> bool:
        return isinstance(other, TriggerSpec) and other.fingerprint == self.fingerprint

    def __hash__(self) -> int:
        return hash(self.fingerprint)


@dataclass(frozen=True, eq=False)
class QuadForm:
    """Forma cuadrática simétrica xᵀ N x."""

    N: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "N", symmetrize(np.asarray(self.N, dtype=float)))

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.N @ x)

    def values(self, X: np.ndarray) -> np.ndarray:
        return np.einsum("mi,ij,mj->m", X, self.N, X)


def discretize(plant: Plant, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Retorna (A_d, B_d) = (e^{Aτ}, ∫₀^τ e^{As} ds B) con una sola exponencial de la
    matriz aumentada [[A, B], [0, 0]].

    scipy.linalg.expm usa scaling-and-squaring con aproximante de Padé.
    """
    tau = float(tau)
    if not np.isfinite(tau) or tau < 0:
        raise InvalidSpecError(f"tau debe ser finito y >= 0; se recibió {tau!r}.")

    n_x, n_u = plant.n_x, plant.n_u
    aug = np.zeros((n_x + n_u, n_x + n_u))
    aug[:n_x, :n_x] = plant.A
    aug[:n_x, n_x:] = plant.B

    with np.errstate(over="ignore", invalid="ignore"):
        E = la.expm(aug * tau)

    if not np.all(np.isfinite(E)):
        raise NumericalOverflowError(
            f"La exponencial de la planta no es finita para tau={tau}: "
            "tau es demasiado grande para la dinámica en doble precisión."
        )

    return E[:n_x, :n_x], E[:n_x, n_x:]


def state_exponential(plant: Plant, tau: float) -> np.ndarray:
    """Factor exponencial e^{Aτ} de la transición."""
    return discretize(plant, tau)[0]


def hold_transition(plant: Plant, tau: float) -> np.ndarray:
    """
    Matriz de transición con entrada retenida:
    M(τ) = e^{Aτ} + ∫₀^τ e^{As} ds · B K.

    Lanza NumericalOverflowError si el resultado no es finito.
    """
    Ad, Bd = discretize(plant, tau)
    M = Ad + Bd @ plant.K_fb

    if not np.all(np.isfinite(M)):
        raise NumericalOverflowError(f"M({tau}) no es finita.")

    return M


def step_trigger_form(plant: Plant, trig: TriggerSpec, k: int) -> QuadForm:
    """
    Forma N(hk) = [M(hk); I]ᵀ Q [M(hk); I] en el estado muestreado x.

    xᵀN(hk)x > 0 equivale a "la condición de triggering está violada en el
    chequeo kh dado el muestreo x".
    """
    if not 1 <= k <= trig.kmax:
        raise InvalidSpecError(f"k debe estar en 1..{trig.kmax}; se recibió {k}.")
    trig.check_plant(plant)

    M = hold_transition(plant, trig.h * k)
    lift = np.vstack([M, np.eye(plant.n_x)])
    return QuadForm(lift.T @ trig.Q @ lift)


def lyapunov_residual(plant: Plant, P, Q_lyap) -> np.ndarray:
    """A_clᵀP + P A_cl + Q_lyap; es cero cuando (P, Q_lyap) resuelven la ecuación de Lyapunov."""
    P = np.asarray(P, dtype=float)
    Q_lyap = np.asarray(Q_lyap, dtype=float)
    A_cl = plant.closed_loop
    return A_cl.T @ P + P @ A_cl + Q_lyap


def lyapunov_derivative_form(plant: Plant, P, Q_lyap, rho: float) -> np.ndarray:
    """
    Forma en [ζ; x̂] de la condición V̇(ζ, x̂) + ρ ζᵀQ_lyap ζ > 0, con V̇ evaluada
    bajo la entrada retenida K x̂:
    V̇ = ζᵀ(AᵀP + PA)ζ + 2 ζᵀ P B K x̂.
    """
    P = np.asarray(P, dtype=float)
    Q_lyap = np.asarray(Q_lyap, dtype=float)
    n_x = plant.n_x

    block_x = plant.A.T @ P + P @ plant.A + rho * Q_lyap
    block_cross = P @ plant.B @ plant.K_fb

    form = np.block([
        [block_x, block_cross],
        [block_cross.T, np.zeros((n_x, n_x))],
    ])
    return symmetrize(form)


def build_predictive_lyapunov_Q(plant: Plant, P, Q_lyap, rho: float, h: float) -> np.ndarray:
    """
    Construye Q para la condición predictiva de Lyapunov.

    ζ = A_d(h) x + B_d(h) K x̂ es la predicción del estado en el siguiente chequeo.
    La condición implementada es la lectura por derivada:
        V̇(ζ, x̂) > −ρ ζᵀ Q_lyap ζ.
    La desigualdad impresa con V(ζ) en lugar de V̇ se cumple siempre para ζ ≠ 0
    cuando P y Q_lyap son definidas positivas, por eso no se usa.

    Ā = [[A_d, B_d K], [0, I]] lleva [x; x̂] a [ζ; x̂], y Q = Āᵀ Q̄ Ā.
    """
    P = symmetrize(_as_matrix(P, "P"))
    Q_lyap = symmetrize(_as_matrix(Q_lyap, "Q_lyap"))
    n_x = plant.n_x

    if P.shape != (n_x, n_x) or Q_lyap.shape != (n_x, n_x):
        raise InvalidSpecError(f"P y Q_lyap deben ser {n_x}x{n_x}.")

    _require_positive_definite(P, "P")
    _require_positive_definite(Q_lyap, "Q_lyap")

    rho = float(rho)
    if not 0.0 < rho < 1.0:
        raise InvalidSpecError(f"rho debe estar en (0, 1); se recibió {rho!r}.")

    logger.warning(
        "[LTI][PREDICTIVA] Se usa la lectura por derivada V̇(ζ) > -ρ ζᵀQ_lyap ζ; "
        "la forma literal con V(ζ) es degenerada. rho=%s h=%s",
        rho,
        h,
    )

    Ad, Bd = discretize(plant, h)
    A_bar = np.block([
        [Ad, Bd @ plant.K_fb],
        [np.zeros((n_x, n_x)), np.eye(n_x)],
    ])

    Q_bar = lyapunov_derivative_form(plant, P, Q_lyap, rho)
    return symmetrize(A_bar.T @ Q_bar @ A_bar)


def predictive_trigger(
    plant: Plant,
    P,
    Q_lyap,
    rho: float,
    h: float,
    kmax: int,
    h_exact: Optional[Fraction] = None,
) -> TriggerSpec:
    """TriggerSpec con la condición predictiva de Lyapunov y sus datos guardados."""
    Q = build_predictive_lyapunov_Q(plant, P, Q_lyap, rho, h)
    return TriggerSpec(
        Q=Q,
        h=h,
        kmax=kmax,
        P=np.asarray(P, dtype=float),
        Q_lyap=np.asarray(Q_lyap, dtype=float),
        rho=float(rho),
        h_exact=h_exact,
    )


def check_symmetric(matrix: np.ndarray, tol: float = SYMMETRY_TOL) -> bool:
    return bool(np.max(np.abs(matrix - matrix.T), initial=0.0) <= tol)
