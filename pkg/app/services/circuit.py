"""
Circuit math for n parallel modules driving a resistive load.

Each module is an ideal (modulated) voltage source V_k in series with its
internal resistance Z_k; all modules share one bus with load Z_l. Everything
here is a pure function of its inputs.
"""
from typing import Sequence, Tuple
import numpy as np
from pydantic import ValidationError
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from app.errors import CircuitError, DimensionError, DomainError
from app.models.schemas import ImpedanceMatrix


def _positive_vector(values: Sequence[float], what: str) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.ndim != 1 or array.size == 0:
        raise DimensionError(f"{what} must be a non-empty vector")
    bad = np.flatnonzero(~(array > 0))
    if bad.size:
        k = int(bad[0])
        raise DomainError(f"{what} of module {k + 1} must be positive, got {array[k]}")
    return array


def _positive_load(load: float) -> float:
    load = float(load)
    if not load > 0:
        raise DomainError(f"load resistance must be positive, got {load}")
    return load


def _vector_of_length(values: Sequence[float], n: int, what: str) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.shape != (n,):
        raise DimensionError(f"{what} must have length {n}, got shape {array.shape}")
    return array


def gain_factors(impedances: Sequence[float], load: float) -> np.ndarray:
    """g_j = (1/Z_j) / (1/Z_l + sum_k 1/Z_k), so that V_bus = sum_j g_j V_j."""
    z = _positive_vector(impedances, "impedance")
    load = _positive_load(load)
    conductances = 1.0 / z
    return conductances / (1.0 / load + conductances.sum())


def bus_voltage(module_voltages: Sequence[float], impedances: Sequence[float], load: float) -> float:
    g = gain_factors(impedances, load)
    v = _vector_of_length(module_voltages, g.size, "module_voltages")
    return float(g @ v)


def bus_current(module_voltages: Sequence[float], impedances: Sequence[float], load: float) -> float:
    return bus_voltage(module_voltages, impedances, load) / _positive_load(load)


def impedance_matrix(impedances: Sequence[float], load: float) -> ImpedanceMatrix:
    """
    Build D with I = D V for the given load.

    Off-diagonal d_kj = -(1/Z_k)(1/Z_j)/S, diagonal d_kk = (1/Z_k)(S - 1/Z_k)/S
    with S = 1/Z_l + sum_m 1/Z_m. D is symmetric positive definite, so the
    inverse goes through a Cholesky factorization.
    """
    z = _positive_vector(impedances, "impedance")
    load = _positive_load(load)
    y = 1.0 / z
    s = 1.0 / load + y.sum()

    d = -np.outer(y, y) / s
    np.fill_diagonal(d, y * (s - y) / s)

    try:
        factor = cho_factor(d, lower=True)
    except LinAlgError as e:
        raise CircuitError(f"impedance matrix is not positive definite for load {load} ohm") from e
    d_inv = cho_solve(factor, np.eye(z.size))
    d_inv = 0.5 * (d_inv + d_inv.T)

    try:
        return ImpedanceMatrix(n=z.size, load_ohms=load, d=d, d_inv=d_inv)
    except ValidationError as e:
        raise CircuitError(f"impedance matrix failed its invariants: {e}") from e


def inverse_closed_form(impedances: Sequence[float], load: float) -> np.ndarray:
    """D^-1 = diag(Z) + Z_l * 11^T, from V_k = Z_k I_k + Z_l sum_m I_m."""
    z = _positive_vector(impedances, "impedance")
    load = _positive_load(load)
    return np.diag(z) + load * np.ones((z.size, z.size))


def currents_from_voltages(dm: ImpedanceMatrix, voltages: Sequence[float]) -> np.ndarray:
    v = _vector_of_length(voltages, dm.n, "voltages")
    return dm.d @ v


def voltages_from_currents(dm: ImpedanceMatrix, currents: Sequence[float]) -> np.ndarray:
    i = _vector_of_length(currents, dm.n, "currents")
    return dm.d_inv @ i


def nodal_solve(
    module_voltages: Sequence[float], impedances: Sequence[float], load: float
) -> Tuple[float, np.ndarray]:
    """
    Solve the bus directly, without D: V_bus from the gain factors, then
    I_k = (V_k - V_bus) / Z_k.

    Returns (v_bus, module_currents).
    """
    z = _positive_vector(impedances, "impedance")
    v = _vector_of_length(module_voltages, z.size, "module_voltages")
    v_bus = bus_voltage(v, z, load)
    return v_bus, (v - v_bus) / z


def stray_current(currents: Sequence[float]) -> float:
    """Magnitude of the largest current flowing back into a module (0 if none)."""
    currents = np.asarray(currents, dtype=float)
    return float(max(0.0, -currents.min())) if currents.size else 0.0
