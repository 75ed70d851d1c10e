from typing import Literal, Optional, Tuple
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


SYMMETRY_RTOL = 1e-12
INVERSE_ATOL = 1e-9


class FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# Circuit


class ModuleParams(FrozenModel):
    id: int = Field(ge=1, description="1-based module index")
    ocv: float = Field(gt=0, description="Open circuit voltage in volts")
    impedance: float = Field(gt=0, description="Internal resistance in ohms")
    soc: float = Field(default=1.0, gt=0, le=1, description="State of charge fraction")


class PackModel(FrozenModel):
    modules: Tuple[ModuleParams, ...] = Field(min_length=1)

    @model_validator(mode="after")
    def validate_ids(self):
        ids = [m.id for m in self.modules]
        if sorted(ids) != list(range(1, len(ids) + 1)):
            raise ValueError(f"module ids must be 1..{len(ids)} without duplicates, got {ids}")
        if ids != sorted(ids):
            raise ValueError("modules must be listed in id order")
        return self

    @property
    def n(self) -> int:
        return len(self.modules)

    @property
    def ocvs(self) -> np.ndarray:
        return np.array([m.ocv for m in self.modules], dtype=float)

    @property
    def impedances(self) -> np.ndarray:
        return np.array([m.impedance for m in self.modules], dtype=float)

    @property
    def socs(self) -> np.ndarray:
        return np.array([m.soc for m in self.modules], dtype=float)


class ImpedanceMatrix(FrozenModel):
    """The matrix D mapping module voltages to module currents, plus its inverse."""
    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    n: int = Field(ge=1)
    load_ohms: float = Field(gt=0)
    d: np.ndarray
    d_inv: np.ndarray

    @model_validator(mode="after")
    def validate_matrix(self):
        for name in ("d", "d_inv"):
            matrix = getattr(self, name)
            if matrix.shape != (self.n, self.n):
                raise ValueError(f"{name} must be {self.n}x{self.n}, got {matrix.shape}")
            matrix.setflags(write=False)
        scale = np.max(np.abs(self.d))
        if not np.allclose(self.d, self.d.T, rtol=0.0, atol=SYMMETRY_RTOL * scale):
            raise ValueError("d must be symmetric")
        if not np.allclose(self.d @ self.d_inv, np.eye(self.n), rtol=0.0, atol=INVERSE_ATOL):
            raise ValueError("d_inv is not the inverse of d")
        return self


# Scaling


class ScalingVector(FrozenModel):
    betas: Tuple[float, ...] = Field(min_length=1)

    @field_validator("betas")
    @classmethod
    def validate_range(cls, v):
        for k, beta in enumerate(v, start=1):
            if not 0.0 <= beta <= 1.0:
                raise ValueError(f"beta of module {k} must lie in [0, 1], got {beta}")
        if abs(max(v) - 1.0) > 1e-12:
            raise ValueError(f"largest beta must be 1, got {max(v)}")
        return v

    @property
    def n(self) -> int:
        return len(self.betas)

    def as_array(self) -> np.ndarray:
        return np.array(self.betas, dtype=float)


# Scheduler


class ScheduleCommand(FrozenModel):
    voltages: Tuple[float, ...] = Field(description="Target module voltages V_k")
    duties: Tuple[float, ...] = Field(description="Duty cycles alpha_k = V_k / V_k^OCV")

    @model_validator(mode="after")
    def validate_duties(self):
        if len(self.voltages) != len(self.duties):
            raise ValueError("voltages and duties must have the same length")
        for k, duty in enumerate(self.duties, start=1):
            if not 0.0 <= duty <= 1.0:
                raise ValueError(f"duty of module {k} must lie in [0, 1], got {duty}")
        return self

    @classmethod
    def from_duties(cls, duties, ocvs) -> "ScheduleCommand":
        duties = np.asarray(duties, dtype=float)
        voltages = duties * np.asarray(ocvs, dtype=float)
        return cls(voltages=tuple(voltages.tolist()), duties=tuple(duties.tolist()))


class SchedulerConfig(FrozenModel):
    ocvs: Tuple[float, ...] = Field(min_length=1)
    impedances: Tuple[float, ...] = Field(min_length=1)
    scaling: ScalingVector
    min_bus_current: float = Field(default=1e-3, gt=0, description="Load estimation guard in amperes")
    fallback_load: float = Field(default=10.0, gt=0, description="Load estimate used before the first valid one")
    initial_duty: float = Field(default=0.5, ge=0, le=1)
    solver: Literal["linprog", "analytic"] = "linprog"

    @model_validator(mode="after")
    def validate_lengths(self):
        n = len(self.ocvs)
        if len(self.impedances) != n or self.scaling.n != n:
            raise ValueError("ocvs, impedances and scaling must describe the same number of modules")
        if any(v <= 0 for v in self.ocvs) or any(z <= 0 for z in self.impedances):
            raise ValueError("ocvs and impedances must be positive")
        return self


class SchedulerState(FrozenModel):
    tick: int = Field(ge=0)
    load_estimate: float = Field(gt=0)
    last_command: ScheduleCommand
    beta_opt: float = Field(ge=0)
    binding_module: Optional[int] = None


class ScheduleResult(FrozenModel):
    """One-shot schedule for a known load."""
    load_ohms: float
    beta_opt: float
    binding_module: int
    voltages: Tuple[float, ...]
    duties: Tuple[float, ...]
    currents: Tuple[float, ...]
    v_bus: float
    i_bus: float


# Plant


class PlantConfig(FrozenModel):
    pack: PackModel
    pwm_resolution: int = Field(default=256, ge=2)
    ramp_up_seconds: float = Field(default=5.0, ge=0)
    dt: float = Field(default=0.1, gt=0)
    noise_stddev: float = Field(default=0.0, ge=0)
    rng_seed: int = Field(default=0, ge=0)


class PlantState(FrozenModel):
    time: float = Field(default=0.0, ge=0)
    step: int = Field(default=0, ge=0)
    actual_duties: Tuple[float, ...] = Field(description="Duties applied on the PWM grid")
    target_duties: Tuple[float, ...]
    ramp_duties: Tuple[float, ...] = Field(description="Slew-limited setpoints before quantization")

    @model_validator(mode="after")
    def validate_duties(self):
        if not len(self.actual_duties) == len(self.target_duties) == len(self.ramp_duties):
            raise ValueError("actual_duties, target_duties and ramp_duties must have the same length")
        for duty in self.actual_duties + self.target_duties + self.ramp_duties:
            if not 0.0 <= duty <= 1.0:
                raise ValueError(f"duties must lie in [0, 1], got {duty}")
        return self


class Measurement(FrozenModel):
    tick: int = Field(ge=0)
    time: float
    v_bus: float
    i_bus: float
    module_currents: Tuple[float, ...]
    load_true: float = Field(gt=0, description="Ground truth, never given to the scheduler")


# Experiment


class LoadSegment(FrozenModel):
    start_time: float = Field(ge=0)
    resistance: float = Field(gt=0)


class LoadProfile(FrozenModel):
    segments: Tuple[LoadSegment, ...] = Field(min_length=1)

    @model_validator(mode="after")
    def validate_segments(self):
        if self.segments[0].start_time != 0:
            raise ValueError("first load segment must start at t=0")
        starts = [s.start_time for s in self.segments]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("load segment start times must be strictly increasing")
        return self


class ScalingSettings(FrozenModel):
    mode: Literal["equal", "discharge_soc", "charge_soc", "explicit"] = "equal"
    betas: Optional[Tuple[float, ...]] = None

    @model_validator(mode="after")
    def validate_betas(self):
        if self.mode == "explicit" and self.betas is None:
            raise ValueError("explicit scaling requires betas")
        if self.mode != "explicit" and self.betas is not None:
            raise ValueError(f"betas are only accepted with explicit scaling, not {self.mode}")
        return self


class PlantSettings(FrozenModel):
    pwm_resolution: int = Field(default=256, ge=2)
    ramp_up_seconds: float = Field(default=5.0, ge=0)
    dt: float = Field(default=0.1, gt=0)
    noise_stddev: float = Field(default=0.0, ge=0)
    rng_seed: int = Field(default=0, ge=0)


class SchedulerSettings(FrozenModel):
    min_bus_current: float = Field(default=1e-3, gt=0)
    fallback_load: float = Field(default=10.0, gt=0)
    initial_duty: float = Field(default=0.5, ge=0, le=1)
    solver: Literal["linprog", "analytic"] = "linprog"


class ExperimentConfig(FrozenModel):
    schema_version: int = 1
    name: str = "experiment"
    pack: PackModel
    scaling: ScalingSettings = ScalingSettings()
    load_profile: LoadProfile
    duration: float = Field(gt=0)
    scheduler_period: float = Field(default=1.0, gt=0)
    controller: Literal["recursive", "open_loop"] = "recursive"
    plant: PlantSettings = PlantSettings()
    scheduler: SchedulerSettings = SchedulerSettings()
    output_path: Optional[str] = None
    spread_tolerance: float = Field(default=5e-3, gt=0, description="Convergence tolerance on current spread")
    steady_window: float = Field(default=50.0, gt=0, description="Trailing seconds of a segment treated as steady state")

    @model_validator(mode="after")
    def validate_timing(self):
        if self.scheduler_period < self.plant.dt:
            raise ValueError("scheduler_period must be at least plant.dt")
        if self.scaling.betas is not None and len(self.scaling.betas) != self.pack.n:
            raise ValueError("scaling.betas must have one entry per module")
        return self


class TelemetryRecord(FrozenModel):
    time: float
    load_true: float
    load_estimate: float
    beta_opt: float
    duties: Tuple[float, ...]
    v_cmd: Tuple[float, ...]
    currents: Tuple[float, ...]
    v_bus: float
    i_bus: float
    current_spread: float
    binding_module: Optional[int] = None


class SegmentSummary(FrozenModel):
    start_time: float
    end_time: float
    load_ohms: float
    mean_spread: float
    max_spread: float
    max_deviation: float = Field(description="max_k |I_k - mean(I)| over the steady window")
    mean_bus_current: float
    mean_beta_opt: float
    binding_module: Optional[int]
    load_estimate_error: float = Field(description="Largest |estimate - truth| over the steady window")
    first_within_tolerance: Optional[float] = Field(
        default=None, description="Seconds from segment start to the first record with spread <= tolerance"
    )
    convergence_time: Optional[float] = Field(
        description="Seconds from segment start until spread stays <= tolerance to the end of the segment"
    )
    max_stray_current: float
    mean_duties: Tuple[float, ...]


class SummaryReport(FrozenModel):
    name: str
    records: int
    spread_tolerance: float
    max_voltage_ratio: float = Field(description="Largest commanded V_k / V_k^OCV over the run")
    segments: Tuple[SegmentSummary, ...]


class CheckReport(FrozenModel):
    instances: int
    seed: int
    failures: dict[str, int]
    worst: dict[str, float]

    @property
    def passed(self) -> bool:
        return not any(self.failures.values())
