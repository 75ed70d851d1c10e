"""
Centralized recursive current scheduling.

Each tick: estimate the load from the bus measurement, rebuild D for that
load, solve the one-variable LP

    max beta  s.t.  D^-1 [beta_1 ... beta_n]^T beta <= V^OCV,  beta >= 0

and command V_opt = beta_opt D^-1 [beta_1 ... beta_n]^T to the modules.
"""
import logging
from typing import Sequence, Tuple
import numpy as np
from scipy.optimize import linprog
from app.errors import DimensionError, DomainError, MeasurementError, SchedulingError
from app.models.schemas import (
    ImpedanceMatrix,
    Measurement,
    ScalingVector,
    ScheduleCommand,
    ScheduleResult,
    SchedulerConfig,
    SchedulerState,
)
from app.services.circuit import bus_voltage, currents_from_voltages, impedance_matrix

logger = logging.getLogger(__name__)

DUTY_SNAP_TOL = 1e-9
TIE_RTOL = 1e-12
# Largest relative gap tolerated between the LP optimum and the min-ratio bound.
LP_AGREEMENT_RTOL = 1e-9


def _constraint_rows(dm: ImpedanceMatrix, scaling: ScalingVector, ocvs: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    betas = scaling.as_array()
    b = np.asarray(ocvs, dtype=float)
    if betas.shape != (dm.n,) or b.shape != (dm.n,):
        raise DimensionError(f"scaling and ocvs must have length {dm.n}")
    if not np.any(betas > 0):
        raise DomainError("scaling vector must have at least one positive entry")
    bad = np.flatnonzero(~(b > 0))
    if bad.size:
        raise DomainError(f"OCV of module {bad[0] + 1} must be positive, got {b[bad[0]]}")
    return dm.d_inv @ betas, b


def _min_ratio(a: np.ndarray, b: np.ndarray, rows: np.ndarray) -> Tuple[float, int]:
    ratios = np.where(rows, b / np.where(rows, a, 1.0), np.inf)
    best = ratios.min()
    # rows within rounding of the minimum count as tied; the lowest id binds
    k = int(np.flatnonzero(ratios <= best * (1.0 + TIE_RTOL))[0])
    return float(best), k + 1


def _solve_analytic(a: np.ndarray, b: np.ndarray) -> Tuple[float, int]:
    positive = a > 0
    if not positive.any():
        raise SchedulingError("scheduling LP is unbounded: no constraint row limits beta")
    return _min_ratio(a, b, positive)


def _solve_linprog(a: np.ndarray, b: np.ndarray) -> Tuple[float, int]:
    res = linprog(c=[-1.0], A_ub=a.reshape(-1, 1), b_ub=b, bounds=[(0, None)], method="highs")
    if res.status == 3:
        raise SchedulingError("scheduling LP is unbounded: no constraint row limits beta")
    if not res.success:
        raise SchedulingError(f"scheduling LP failed: {res.message}")

    beta = float(res.x[0])
    rows = a > 0
    if not rows.any():
        raise SchedulingError("scheduling LP is unbounded: no constraint row limits beta")
    # binding row: smallest relative slack at the LP optimum, lowest id on ties
    slack = np.where(rows, (b - a * beta) / b, np.inf)
    k = int(np.flatnonzero(slack <= slack.min() + TIE_RTOL)[0])
    return beta, k + 1


def linprog_beta(dm: ImpedanceMatrix, scaling: ScalingVector, ocvs: Sequence[float]) -> Tuple[float, int]:
    """Raw HiGHS optimum and its binding module, without the min-ratio cross-check."""
    a, b = _constraint_rows(dm, scaling, ocvs)
    return _solve_linprog(a, b)


def solve_beta(
    dm: ImpedanceMatrix, scaling: ScalingVector, ocvs: Sequence[float], method: str = "linprog"
) -> Tuple[float, int]:
    """
    Largest absolute scaling beta_opt keeping every module voltage at or below
    its OCV.

    Returns (beta_opt, binding module id). Ties go to the lowest module id.
    """
    a, b = _constraint_rows(dm, scaling, ocvs)
    if method == "analytic":
        return _solve_analytic(a, b)
    if method == "linprog":
        beta, binding = _solve_linprog(a, b)
        bound, _ = _solve_analytic(a, b)
        if abs(beta - bound) > LP_AGREEMENT_RTOL * bound:
            raise SchedulingError(
                f"LP optimum {beta!r} disagrees with the min-ratio bound {bound!r} beyond {LP_AGREEMENT_RTOL:g}"
            )
        # never exceed the feasible bound by LP rounding
        return min(beta, bound), binding
    raise DomainError(f"unknown solver method: {method}")


def optimal_voltages(dm: ImpedanceMatrix, scaling: ScalingVector, beta_opt: float) -> np.ndarray:
    if beta_opt < 0:
        raise DomainError(f"beta_opt must be non-negative, got {beta_opt}")
    betas = scaling.as_array()
    if betas.shape != (dm.n,):
        raise DimensionError(f"scaling must have length {dm.n}, got {betas.size}")
    return beta_opt * (dm.d_inv @ betas)


def command_from_voltages(voltages: Sequence[float], ocvs: Sequence[float]) -> ScheduleCommand:
    """Turn target voltages into duties, rejecting anything outside (0, 1]."""
    v = np.asarray(voltages, dtype=float)
    b = np.asarray(ocvs, dtype=float)
    v = np.where(np.abs(v - b) <= DUTY_SNAP_TOL * b, np.minimum(v, b), v)
    duties = v / b
    for k, duty in enumerate(duties, start=1):
        if not 0.0 < duty <= 1.0:
            raise SchedulingError(f"duty of module {k} is infeasible: {duty}")
    return ScheduleCommand(voltages=tuple(v.tolist()), duties=tuple(duties.tolist()))


def solve_schedule(
    ocvs: Sequence[float],
    impedances: Sequence[float],
    scaling: ScalingVector,
    load: float,
    method: str = "linprog",
) -> ScheduleResult:
    """Schedule for a known load: beta_opt, voltages, duties and predicted currents."""
    dm = impedance_matrix(impedances, load)
    beta_opt, binding = solve_beta(dm, scaling, ocvs, method)
    command = command_from_voltages(optimal_voltages(dm, scaling, beta_opt), ocvs)
    v_bus = bus_voltage(command.voltages, impedances, load)
    return ScheduleResult(
        load_ohms=float(load),
        beta_opt=beta_opt,
        binding_module=binding,
        voltages=command.voltages,
        duties=command.duties,
        currents=tuple(currents_from_voltages(dm, command.voltages).tolist()),
        v_bus=v_bus,
        i_bus=v_bus / load,
    )


def initial_state(cfg: SchedulerConfig) -> SchedulerState:
    """State at t=0: fallback load estimate, uniform initial duty."""
    command = ScheduleCommand.from_duties([cfg.initial_duty] * len(cfg.ocvs), cfg.ocvs)
    return SchedulerState(tick=0, load_estimate=cfg.fallback_load, last_command=command, beta_opt=0.0)


def estimate_load(v_bus: float, i_bus: float, state: SchedulerState, cfg: SchedulerConfig) -> float:
    """
    Z_l = V_bus / I_bus.

    The previous estimate is held when I_bus is below cfg.min_bus_current or
    V_bus is zero, since a zero estimate is not a valid load resistance.
    Negative readings raise MeasurementError.
    """
    if v_bus < 0 or i_bus < 0:
        raise MeasurementError(f"negative bus reading (v_bus={v_bus}, i_bus={i_bus}) while discharging")
    if i_bus >= cfg.min_bus_current and v_bus > 0:
        return v_bus / i_bus
    logger.warning(
        "Bus reading v=%.6g V, i=%.6g A (guard %.6g A) at tick %d, holding load estimate %.6g ohm",
        v_bus, i_bus, cfg.min_bus_current, state.tick, state.load_estimate,
    )
    return state.load_estimate


def scheduler_step(
    measurement: Measurement, state: SchedulerState, cfg: SchedulerConfig
) -> Tuple[SchedulerState, ScheduleCommand]:
    if measurement.tick != state.tick:
        raise DomainError(f"measurement tick {measurement.tick} does not match scheduler tick {state.tick}")

    load = estimate_load(measurement.v_bus, measurement.i_bus, state, cfg)
    dm = impedance_matrix(cfg.impedances, load)
    beta_opt, binding = solve_beta(dm, cfg.scaling, cfg.ocvs, cfg.solver)
    command = command_from_voltages(optimal_voltages(dm, cfg.scaling, beta_opt), cfg.ocvs)

    logger.debug(
        "tick %d: Z_l=%.6g ohm beta_opt=%.6g A binding=%d duties=%s",
        state.tick, load, beta_opt, binding, command.duties,
    )
    new_state = SchedulerState(
        tick=state.tick + 1,
        load_estimate=load,
        last_command=command,
        beta_opt=beta_opt,
        binding_module=binding,
    )
    return new_state, command
