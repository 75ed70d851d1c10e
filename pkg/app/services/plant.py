"""
Simulated test bench: buck-regulated modules on a shared bus.

The PWM output is modelled by its average value alpha_k * V_k^OCV. Each
module keeps an unquantized ramp setpoint: increases are slew-limited,
decreases are immediate, and only the applied duty is snapped to the PWM
grid. Currents come from the nodal solve so the plant
never shares the controller's impedance-matrix path.
"""
from typing import Tuple
import numpy as np
from app.errors import DimensionError, DomainError
from app.models.schemas import Measurement, PlantConfig, PlantState, ScheduleCommand
from app.services.circuit import nodal_solve


def _check_fraction(value: float, what: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{what} must lie in [0, 1], got {value}")
    return value


def quantize_duty(duty: float, levels: int) -> float:
    """Nearest point of the (levels-1)-step PWM grid; exact halves round to even."""
    duty = _check_fraction(duty, "duty")
    if levels < 2:
        raise DomainError(f"PWM resolution must be at least 2 levels, got {levels}")
    steps = levels - 1
    return float(np.rint(duty * steps)) / steps


def apply_ramp(actual: float, target: float, dt: float, ramp_up_seconds: float) -> float:
    """Rise at most dt / ramp_up_seconds of full scale per step; fall instantly."""
    actual = _check_fraction(actual, "actual duty")
    target = _check_fraction(target, "target duty")
    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    if target <= actual or ramp_up_seconds == 0:
        return target
    return min(target, actual + dt / ramp_up_seconds)


def initial_plant_state(cfg: PlantConfig, duty: float) -> PlantState:
    """Plant at t=0 with every module already at the (quantized) initial duty."""
    applied = quantize_duty(duty, cfg.pwm_resolution)
    n = cfg.pack.n
    duty = float(duty)
    return PlantState(
        time=0.0, step=0, actual_duties=(applied,) * n, target_duties=(duty,) * n, ramp_duties=(duty,) * n,
    )


def plant_step(
    state: PlantState, command: ScheduleCommand, load_now: float, cfg: PlantConfig
) -> Tuple[PlantState, Measurement]:
    """
    Apply the command for one dt and sample the bus.

    The measurement is taken at state.time with the duties that hold during
    this step; the returned state is advanced to the next step.
    """
    n = cfg.pack.n
    if len(command.duties) != n or len(state.actual_duties) != n:
        raise DimensionError(f"command and plant state must cover {n} modules")
    if not load_now > 0:
        raise DomainError(f"load resistance must be positive, got {load_now}")

    targets = command.duties
    ramp = tuple(
        apply_ramp(r, t, cfg.dt, cfg.ramp_up_seconds) for r, t in zip(state.ramp_duties, targets)
    )
    actual = tuple(quantize_duty(r, cfg.pwm_resolution) for r in ramp)

    voltages = np.array(actual) * cfg.pack.ocvs
    v_bus, currents = nodal_solve(voltages, cfg.pack.impedances, load_now)
    i_bus = float(currents.sum())

    if cfg.noise_stddev > 0:
        rng = np.random.default_rng([cfg.rng_seed, state.step])
        noise = rng.normal(0.0, cfg.noise_stddev, size=n + 2)
        # sensed bus readings cannot go below zero
        v_bus = max(0.0, v_bus + noise[0])
        i_bus = max(0.0, i_bus + noise[1])
        currents = currents + noise[2:]

    measurement = Measurement(
        tick=state.step,
        time=state.time,
        v_bus=float(v_bus),
        i_bus=i_bus,
        module_currents=tuple(currents.tolist()),
        load_true=float(load_now),
    )
    next_state = PlantState(
        time=(state.step + 1) * cfg.dt,
        step=state.step + 1,
        actual_duties=actual,
        target_duties=tuple(targets),
        ramp_duties=ramp,
    )
    return next_state, measurement

