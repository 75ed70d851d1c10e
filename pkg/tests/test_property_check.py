from types import SimpleNamespace
import numpy as np
import app.services.scheduler as scheduler
from app.services.property_check import TOLERANCES, check_instance, check_properties, random_instance


def test_random_instances_are_reproducible():
    a, b = random_instance(5, 17), random_instance(5, 17)
    assert all((a[key] == b[key]).all() if hasattr(a[key], "all") else a[key] == b[key] for key in a)
    assert 1 <= len(a["impedances"]) <= 10
    assert a["betas"].max() == 1.0


def test_check_instance_reports_every_property():
    residuals = check_instance(seed=0, index=0)
    assert set(residuals) == set(TOLERANCES)


def test_all_properties_hold():
    report = check_properties(instances=1000, seed=0)
    assert report.passed, report.failures
    assert report.instances == 1000
    assert all(count == 0 for count in report.failures.values())


def test_threaded_check_matches_serial():
    serial = check_properties(instances=50, seed=9, workers=1)
    threaded = check_properties(instances=50, seed=9, workers=4)
    assert serial == threaded


def test_solver_agreement_uses_the_raw_lp_value(monkeypatch):
    monkeypatch.setattr(scheduler, "linprog", lambda *a, **k: SimpleNamespace(
        x=np.array([0.0]), status=0, success=True, message="fake",
    ))
    residuals = check_instance(seed=0, index=0)
    assert residuals["solver_agreement"] == 1.0
    assert residuals["solver_agreement"] > TOLERANCES["solver_agreement"]
