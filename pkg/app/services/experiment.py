"""
Experiment runner: drives the scheduler against the simulated plant under a
piecewise-constant load and condenses the telemetry into per-segment
statistics.
"""
import bisect
import logging
from collections import Counter
from typing import List, Optional, Sequence
import numpy as np
from app.errors import DomainError
from app.models.schemas import (
    ExperimentConfig,
    LoadProfile,
    Measurement,
    PlantConfig,
    ScheduleCommand,
    SchedulerConfig,
    SchedulerState,
    SegmentSummary,
    SummaryReport,
    TelemetryRecord,
)
from app.services.circuit import stray_current
from app.services.plant import initial_plant_state, plant_step
from app.services.scaling import scaling_for_pack
from app.services.scheduler import initial_state, scheduler_step

logger = logging.getLogger(__name__)


def load_profile_eval(profile: LoadProfile, t: float) -> float:
    """Resistance at time t; segments are right-open and the last one never ends."""
    if t < 0:
        raise DomainError(f"load profile time must be non-negative, got {t}")
    starts = [s.start_time for s in profile.segments]
    return profile.segments[bisect.bisect_right(starts, t) - 1].resistance


def build_scheduler_config(cfg: ExperimentConfig) -> SchedulerConfig:
    scaling = scaling_for_pack(cfg.pack, cfg.scaling.mode, cfg.scaling.betas)
    return SchedulerConfig(
        ocvs=tuple(cfg.pack.ocvs.tolist()),
        impedances=tuple(cfg.pack.impedances.tolist()),
        scaling=scaling,
        **cfg.scheduler.model_dump(),
    )


def build_plant_config(cfg: ExperimentConfig) -> PlantConfig:
    return PlantConfig(pack=cfg.pack, **cfg.plant.model_dump())


def _record(
    measurement: Measurement,
    state: SchedulerState,
    command: ScheduleCommand,
    duties: Sequence[float],
) -> TelemetryRecord:
    currents = measurement.module_currents
    return TelemetryRecord(
        time=measurement.time,
        load_true=measurement.load_true,
        load_estimate=state.load_estimate,
        beta_opt=state.beta_opt,
        duties=tuple(duties),
        v_cmd=command.voltages,
        currents=currents,
        v_bus=measurement.v_bus,
        i_bus=measurement.i_bus,
        current_spread=max(currents) - min(currents),
        binding_module=state.binding_module,
    )


def run_experiment(cfg: ExperimentConfig) -> List[TelemetryRecord]:
    """
    Alternate plant steps (every dt) with scheduler steps (every
    scheduler_period), one telemetry record per plant step.

    The scheduler consumes the measurement of the last plant step of each
    period; its command takes effect from the following plant step.
    """
    sched_cfg = build_scheduler_config(cfg)
    plant_cfg = build_plant_config(cfg)
    dt = plant_cfg.dt
    steps = int(round(cfg.duration / dt))
    steps_per_tick = max(1, int(round(cfg.scheduler_period / dt)))

    sched_state = initial_state(sched_cfg)
    command = sched_state.last_command
    plant_state = initial_plant_state(plant_cfg, sched_cfg.initial_duty)

    logger.info(
        "Running %s: %d modules, %d plant steps of %.3g s, scheduler every %d steps (%s)",
        cfg.name, cfg.pack.n, steps, dt, steps_per_tick, cfg.controller,
    )
    records: List[TelemetryRecord] = []
    previous_load: Optional[float] = None
    for i in range(steps):
        load_now = load_profile_eval(cfg.load_profile, i * dt)
        if previous_load is not None and load_now != previous_load:
            logger.info("Load step at t=%.3f s: %.6g -> %.6g ohm", i * dt, previous_load, load_now)
        previous_load = load_now

        plant_state, measurement = plant_step(plant_state, command, load_now, plant_cfg)
        records.append(_record(measurement, sched_state, command, plant_state.actual_duties))

        if cfg.controller == "recursive" and (i + 1) % steps_per_tick == 0:
            measurement = measurement.model_copy(update={"tick": sched_state.tick})
            sched_state, command = scheduler_step(measurement, sched_state, sched_cfg)

    logger.info("Finished %s: %d records, %d scheduler ticks", cfg.name, len(records), sched_state.tick)
    return records


def _split_segments(records: Sequence[TelemetryRecord]) -> List[List[TelemetryRecord]]:
    segments: List[List[TelemetryRecord]] = [[records[0]]]
    for record in records[1:]:
        if record.load_true != segments[-1][-1].load_true:
            segments.append([])
        segments[-1].append(record)
    return segments


def _first_within(segment: Sequence[TelemetryRecord], tolerance: float) -> Optional[float]:
    for record in segment:
        if record.current_spread <= tolerance:
            return record.time - segment[0].time
    return None


def _settling_time(segment: Sequence[TelemetryRecord], tolerance: float) -> Optional[float]:
    """Seconds from segment start until the spread stays within tolerance."""
    if segment[-1].current_spread > tolerance:
        return None
    settled = segment[0]
    for record in segment:
        if record.current_spread > tolerance:
            settled = None
        elif settled is None:
            settled = record
    return settled.time - segment[0].time


def _summarize_segment(
    segment: Sequence[TelemetryRecord], end_time: float, tolerance: float, steady_window: float
) -> SegmentSummary:
    steady = [r for r in segment if r.time >= end_time - steady_window] or list(segment)
    currents = np.array([r.currents for r in steady])
    deviation = np.abs(currents - currents.mean(axis=1, keepdims=True)).max()
    spreads = np.array([r.current_spread for r in steady])
    bindings = Counter(r.binding_module for r in steady if r.binding_module is not None)
    return SegmentSummary(
        start_time=segment[0].time,
        end_time=end_time,
        load_ohms=segment[0].load_true,
        mean_spread=float(spreads.mean()),
        max_spread=float(spreads.max()),
        max_deviation=float(deviation),
        mean_bus_current=float(np.mean([r.i_bus for r in steady])),
        mean_beta_opt=float(np.mean([r.beta_opt for r in steady])),
        binding_module=bindings.most_common(1)[0][0] if bindings else None,
        load_estimate_error=float(max(abs(r.load_estimate - r.load_true) for r in steady)),
        first_within_tolerance=_first_within(segment, tolerance),
        convergence_time=_settling_time(segment, tolerance),
        max_stray_current=float(max(stray_current(r.currents) for r in segment)),
        mean_duties=tuple(np.mean([r.duties for r in steady], axis=0).tolist()),
    )


def summarize(
    records: Sequence[TelemetryRecord],
    ocvs: Optional[Sequence[float]] = None,
    name: str = "experiment",
    spread_tolerance: float = 5e-3,
    steady_window: float = 50.0,
) -> SummaryReport:
    """Per-load-segment statistics over the trailing steady window of each segment."""
    if not records:
        raise DomainError("cannot summarize an empty telemetry stream")

    dt = records[1].time - records[0].time if len(records) > 1 else 0.0
    segments = _split_segments(records)
    summaries = []
    for index, segment in enumerate(segments):
        end_time = segments[index + 1][0].time if index + 1 < len(segments) else segment[-1].time + dt
        summaries.append(_summarize_segment(segment, end_time, spread_tolerance, steady_window))

    max_ratio = 0.0
    if ocvs is not None:
        v_cmd = np.array([r.v_cmd for r in records])
        max_ratio = float((v_cmd / np.asarray(ocvs, dtype=float)).max())

    return SummaryReport(
        name=name,
        records=len(records),
        spread_tolerance=spread_tolerance,
        max_voltage_ratio=max_ratio,
        segments=tuple(summaries),
    )


def summarize_experiment(cfg: ExperimentConfig, records: Sequence[TelemetryRecord]) -> SummaryReport:
    return summarize(
        records,
        ocvs=cfg.pack.ocvs,
        name=cfg.name,
        spread_tolerance=cfg.spread_tolerance,
        steady_window=cfg.steady_window,
    )


def format_summary(report: SummaryReport) -> str:
    lines = [
        f"Experiment {report.name}: {report.records} records, "
        f"max commanded V/OCV {report.max_voltage_ratio:.6f}",
        f"{'segment':>17} {'load':>8} {'beta_opt':>10} {'I_bus':>9} {'spread':>9} "
        f"{'max dev':>9} {'est err':>9} {'first':>7} {'settle':>7} {'bind':>4}",
    ]
    for s in report.segments:
        first = f"{s.first_within_tolerance:7.1f}" if s.first_within_tolerance is not None else "   none"
        settle = f"{s.convergence_time:7.1f}" if s.convergence_time is not None else "   none"
        lines.append(
            f"{s.start_time:7.1f}-{s.end_time:7.1f}s {s.load_ohms:8.3f} {s.mean_beta_opt:10.6f} "
            f"{s.mean_bus_current:9.6f} {s.mean_spread * 1e3:7.3f}mA {s.max_deviation * 1e3:7.3f}mA "
            f"{s.load_estimate_error:9.2e} {first} {settle} {s.binding_module or '-':>4}"
        )
    return "\n".join(lines)
