import pytest
from app.models.schemas import ModuleParams, PackModel
from app.services.config_loader import load_experiment_config
from app.services.experiment import run_experiment
from app.services.property_check import random_instance
from app.utils.paths import experiments_path

BENCH_Z = [3.0, 4.5, 6.0]
BENCH_OCV = [5.0, 5.0, 5.0]
BENCH_LOAD = 10.0
BALANCED_BETA = 5.0 / 36.0
BALANCED_VOLTAGES = [BALANCED_BETA * (3 * BENCH_LOAD + z) for z in BENCH_Z]


@pytest.fixture
def bench_pack() -> PackModel:
    return PackModel(modules=[
        ModuleParams(id=k, ocv=v, impedance=z) for k, (v, z) in enumerate(zip(BENCH_OCV, BENCH_Z), start=1)
    ])


@pytest.fixture(scope="session")
def bench_config_path():
    return experiments_path("paper_sec5.json")


@pytest.fixture(scope="session")
def bench_config(bench_config_path):
    return load_experiment_config(bench_config_path)


@pytest.fixture(scope="session")
def bench_records(bench_config):
    return run_experiment(bench_config)


@pytest.fixture(scope="session")
def random_instances():
    return [random_instance(seed=2024, index=i) for i in range(1000)]
