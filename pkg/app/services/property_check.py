"""
Randomized property suite for the circuit math and the scheduling LP.

Each instance draws a pack (1-10 modules, Z in [0.1, 100] ohm, OCV in
[1, 60] V), a load in [0.5, 500] ohm and a scaling vector with max 1, then
measures how far every property is from holding.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict
import numpy as np
from app.models.schemas import CheckReport, ScalingVector
from app.services.circuit import (
    currents_from_voltages,
    impedance_matrix,
    inverse_closed_form,
    nodal_solve,
    voltages_from_currents,
)
from app.services.scheduler import linprog_beta, optimal_voltages, solve_beta

logger = logging.getLogger(__name__)

TOLERANCES: Dict[str, float] = {
    "symmetry": 0.0,
    "positive_definite": 0.0,
    "circuit_oracle": 1e-9,
    "kcl": 1e-9,
    "kvl": 1e-9,
    "round_trip": 1e-9,
    "closed_form_inverse": 1e-9,
    "solver_agreement": 1e-9,
    "balance": 1e-9,
    "constraint": 1e-12,
    "active_constraint": 1e-9,
}


def random_instance(seed: int, index: int) -> dict:
    rng = np.random.default_rng([seed, index])
    n = int(rng.integers(1, 11))
    betas = rng.uniform(0.0, 1.0, n)
    betas[rng.integers(n)] = 1.0
    return {
        "impedances": rng.uniform(0.1, 100.0, n),
        "load": float(rng.uniform(0.5, 500.0)),
        "ocvs": rng.uniform(1.0, 60.0, n),
        "betas": betas,
        "voltages": rng.uniform(0.0, 60.0, n),
        "currents": rng.uniform(-5.0, 5.0, n),
    }


def check_instance(seed: int, index: int) -> Dict[str, float]:
    """Residual of every property for one random instance (0 means exact)."""
    inst = random_instance(seed, index)
    z, load, ocvs = inst["impedances"], inst["load"], inst["ocvs"]
    v, i = inst["voltages"], inst["currents"]
    scaling = ScalingVector(betas=tuple(inst["betas"].tolist()))

    dm = impedance_matrix(z, load)
    residuals = {"symmetry": float(np.abs(dm.d - dm.d.T).max())}
    try:
        np.linalg.cholesky(dm.d)
        residuals["positive_definite"] = 0.0
    except np.linalg.LinAlgError:
        residuals["positive_definite"] = 1.0

    current_scale = max(np.abs(v).max() / z.min(), 1e-300)
    v_bus, nodal = nodal_solve(v, z, load)
    via_d = currents_from_voltages(dm, v)
    residuals["circuit_oracle"] = float(np.abs(via_d - nodal).max() / current_scale)
    residuals["kcl"] = float(abs(via_d.sum() - v_bus / load) / current_scale)
    residuals["kvl"] = float(np.abs(v_bus - (v - z * via_d)).max() / max(np.abs(v).max(), 1e-300))

    back = currents_from_voltages(dm, voltages_from_currents(dm, i))
    residuals["round_trip"] = float(np.abs(back - i).max() / np.abs(i).max())
    closed = inverse_closed_form(z, load)
    residuals["closed_form_inverse"] = float(np.abs(dm.d_inv - closed).max() / np.abs(closed).max())

    beta_lp, _ = linprog_beta(dm, scaling, ocvs)
    beta_an, _ = solve_beta(dm, scaling, ocvs, "analytic")
    residuals["solver_agreement"] = abs(beta_lp - beta_an) / beta_an

    v_opt = optimal_voltages(dm, scaling, beta_lp)
    predicted = currents_from_voltages(dm, v_opt)
    residuals["balance"] = float(np.abs(predicted - beta_lp * inst["betas"]).max() / beta_lp)
    ratios = v_opt / ocvs
    residuals["constraint"] = float(max(ratios.max() - 1.0, 0.0))
    residuals["active_constraint"] = float(abs(ratios.max() - 1.0))
    return residuals


def check_properties(instances: int = 1000, seed: int = 0, workers: int = 1) -> CheckReport:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda index: check_instance(seed, index), range(instances)))
    else:
        results = [check_instance(seed, index) for index in range(instances)]

    failures = {name: 0 for name in TOLERANCES}
    worst = {name: 0.0 for name in TOLERANCES}
    for residuals in results:
        for name, value in residuals.items():
            worst[name] = max(worst[name], value)
            if value > TOLERANCES[name]:
                failures[name] += 1

    report = CheckReport(instances=instances, seed=seed, failures=failures, worst=worst)
    if report.passed:
        logger.info("All properties held over %d instances (seed %d)", instances, seed)
    else:
        logger.warning("Property failures over %d instances: %s", instances, {k: v for k, v in failures.items() if v})
    return report
