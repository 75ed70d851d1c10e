import numpy as np
import pytest
from numpy.testing import assert_allclose
import app.services.plant as plant
from app.errors import DimensionError, DomainError
from app.models.schemas import PlantConfig, ScheduleCommand
from app.services.plant import apply_ramp, initial_plant_state, plant_step, quantize_duty
from app.services.scaling import equal_scaling
from app.services.scheduler import solve_schedule
from tests.conftest import BALANCED_BETA, BENCH_LOAD, BENCH_OCV, BENCH_Z


@pytest.fixture
def plant_cfg(bench_pack):
    return PlantConfig(pack=bench_pack)


def _run(cfg, command, load, steps, initial_duty=0.5):
    state = initial_plant_state(cfg, initial_duty)
    trace = []
    for _ in range(steps):
        state, measurement = plant_step(state, command, load, cfg)
        trace.append((state, measurement))
    return trace


@pytest.mark.parametrize("duty,levels,expected", [
    (0.0, 256, 0.0),
    (1.0, 256, 1.0),
    (0.5, 256, 128 / 255),
    (0.91667, 256, 234 / 255),
    (0.3, 2, 0.0),
    (0.7, 2, 1.0),
])
def test_quantize_duty(duty, levels, expected):
    assert quantize_duty(duty, levels) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("duty,levels", [(1.2, 256), (-0.1, 256), (0.5, 1)])
def test_quantize_duty_rejects_bad_input(duty, levels):
    with pytest.raises(DomainError):
        quantize_duty(duty, levels)


def test_apply_ramp():
    assert apply_ramp(0.2, 0.9, 0.1, 5.0) == pytest.approx(0.22)
    assert apply_ramp(0.5, 0.51, 0.1, 5.0) == 0.51
    # decreases and a zero ramp time are immediate
    assert apply_ramp(0.9, 0.2, 0.1, 5.0) == 0.2
    assert apply_ramp(0.2, 0.9, 0.1, 0.0) == 0.9


def test_apply_ramp_rejects_bad_input():
    with pytest.raises(DomainError):
        apply_ramp(0.2, 0.9, 0.0, 5.0)
    with pytest.raises(DomainError):
        apply_ramp(0.2, 1.5, 0.1, 5.0)


def test_initial_state_is_quantized(plant_cfg):
    state = initial_plant_state(plant_cfg, 0.5)
    assert state.actual_duties == (128 / 255,) * 3
    assert state.target_duties == (0.5,) * 3
    assert state.ramp_duties == (0.5,) * 3
    assert state.step == 0 and state.time == 0.0


def test_balanced_schedule_settles_within_quantization(plant_cfg):
    schedule = solve_schedule(BENCH_OCV, BENCH_Z, equal_scaling(3), BENCH_LOAD)
    command = ScheduleCommand(voltages=schedule.voltages, duties=schedule.duties)
    state, measurement = _run(plant_cfg, command, BENCH_LOAD, 100)[-1]

    assert state.actual_duties == tuple(quantize_duty(d, 256) for d in schedule.duties)
    assert np.abs(np.array(measurement.module_currents) - BALANCED_BETA).max() <= 2e-3
    assert measurement.i_bus == pytest.approx(3 * BALANCED_BETA, abs=1e-4)


def test_measurement_conserves_current(plant_cfg):
    command = ScheduleCommand.from_duties([0.8, 0.9, 1.0], BENCH_OCV)
    for _, m in _run(plant_cfg, command, 25.0, 50):
        assert m.i_bus == pytest.approx(sum(m.module_currents), rel=1e-12)
        assert m.i_bus == pytest.approx(m.v_bus / 25.0, rel=1e-9)


def test_zero_duties_give_no_current(plant_cfg):
    command = ScheduleCommand.from_duties([0.0, 0.0, 0.0], BENCH_OCV)
    _, m = _run(plant_cfg, command, BENCH_LOAD, 3, initial_duty=0.0)[-1]
    assert m.i_bus == 0.0
    assert m.v_bus == 0.0
    assert_allclose(m.module_currents, [0.0, 0.0, 0.0])


def _ramp_trace(cfg, steps):
    up = ScheduleCommand.from_duties([1.0, 0.7, 0.35], BENCH_OCV)
    trace = _run(cfg, up, BENCH_LOAD, steps, initial_duty=0.0)
    ramp = np.array([[0.0] * 3] + [s.ramp_duties for s, _ in trace])
    applied = np.array([[0.0] * 3] + [s.actual_duties for s, _ in trace])
    return ramp, applied


def test_duty_increases_respect_the_ramp(plant_cfg):
    ramp, applied = _ramp_trace(plant_cfg, 80)
    bound = plant_cfg.dt / plant_cfg.ramp_up_seconds

    assert np.diff(ramp, axis=0).max() <= bound + 1e-12
    assert np.abs(applied - ramp).max() <= 0.5 / 255 + 1e-12
    assert np.all(np.diff(applied, axis=0) >= 0)
    assert applied[-1].tolist() == [quantize_duty(d, 256) for d in (1.0, 0.7, 0.35)]


def test_ramp_holds_when_a_step_is_finer_than_one_pwm_level(bench_pack):
    cfg = PlantConfig(pack=bench_pack, dt=0.01, ramp_up_seconds=5.0)
    assert cfg.dt / cfg.ramp_up_seconds < 1 / 255
    ramp, applied = _ramp_trace(cfg, 600)

    assert np.diff(ramp, axis=0).max() <= cfg.dt / cfg.ramp_up_seconds + 1e-12
    assert np.abs(applied - ramp).max() <= 0.5 / 255 + 1e-12
    assert np.all(np.diff(applied, axis=0) >= 0)
    # full scale takes the whole ramp time, not one PWM level per step
    first_full = int(np.flatnonzero(applied[:, 0] == 1.0)[0])
    assert first_full * cfg.dt == pytest.approx(cfg.ramp_up_seconds, abs=0.02)
    assert np.mean(np.diff(applied[: first_full + 1, 0])) == pytest.approx(cfg.dt / cfg.ramp_up_seconds, rel=0.01)


def test_duty_decreases_are_immediate(plant_cfg):
    down = ScheduleCommand.from_duties([0.3, 0.3, 0.3], BENCH_OCV)
    state, _ = _run(plant_cfg, down, BENCH_LOAD, 1, initial_duty=1.0)[0]
    assert state.actual_duties == (quantize_duty(0.3, 256),) * 3


def test_time_advances_by_dt(plant_cfg):
    command = ScheduleCommand.from_duties([0.5] * 3, BENCH_OCV)
    trace = _run(plant_cfg, command, BENCH_LOAD, 3)
    assert [m.tick for _, m in trace] == [0, 1, 2]
    assert [m.time for _, m in trace] == pytest.approx([0.0, 0.1, 0.2])
    assert trace[-1][0].step == 3
    assert all(m.load_true == BENCH_LOAD for _, m in trace)


def test_plant_is_deterministic(bench_pack):
    cfg = PlantConfig(pack=bench_pack, noise_stddev=1e-3, rng_seed=11)
    command = ScheduleCommand.from_duties([0.9, 0.95, 1.0], BENCH_OCV)
    assert _run(cfg, command, BENCH_LOAD, 20) == _run(cfg, command, BENCH_LOAD, 20)


def test_noise_depends_on_seed(bench_pack):
    command = ScheduleCommand.from_duties([0.9, 0.95, 1.0], BENCH_OCV)
    quiet = _run(PlantConfig(pack=bench_pack), command, BENCH_LOAD, 5)
    a = _run(PlantConfig(pack=bench_pack, noise_stddev=1e-3, rng_seed=1), command, BENCH_LOAD, 5)
    b = _run(PlantConfig(pack=bench_pack, noise_stddev=1e-3, rng_seed=2), command, BENCH_LOAD, 5)

    assert [m.v_bus for _, m in a] != [m.v_bus for _, m in b]
    assert [m.v_bus for _, m in a] != [m.v_bus for _, m in quiet]
    # noise never touches the applied duties
    assert [s.actual_duties for s, _ in a] == [s.actual_duties for s, _ in quiet]


def test_plant_step_rejects_bad_input(plant_cfg):
    state = initial_plant_state(plant_cfg, 0.5)
    with pytest.raises(DimensionError):
        plant_step(state, ScheduleCommand.from_duties([0.5, 0.5], [5.0, 5.0]), BENCH_LOAD, plant_cfg)
    with pytest.raises(DomainError):
        plant_step(state, ScheduleCommand.from_duties([0.5] * 3, BENCH_OCV), 0.0, plant_cfg)


def test_plant_does_not_use_the_impedance_matrix():
    assert not hasattr(plant, "impedance_matrix")
    assert not hasattr(plant, "ImpedanceMatrix")
