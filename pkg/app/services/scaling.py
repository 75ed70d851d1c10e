"""
Relative current scaling beta_k from per-module state of charge.

Discharge: modules with less charge deliver proportionally less current.
Charge: modules with less charge take proportionally more.
"""
from typing import Optional, Sequence
import numpy as np
from pydantic import ValidationError
from app.errors import DomainError
from app.models.schemas import PackModel, ScalingVector


def _socs(socs: Sequence[float]) -> np.ndarray:
    array = np.asarray(socs, dtype=float)
    if array.ndim != 1 or array.size == 0:
        raise DomainError("at least one SOC value is required")
    for k, soc in enumerate(array, start=1):
        if not 0.0 < soc <= 1.0:
            raise DomainError(f"SOC of module {k} must lie in (0, 1], got {soc}")
    return array


def discharge_scaling(socs: Sequence[float]) -> ScalingVector:
    """beta_k = SOC_k / max_m SOC_m"""
    array = _socs(socs)
    return ScalingVector(betas=tuple((array / array.max()).tolist()))


def charge_scaling(socs: Sequence[float]) -> ScalingVector:
    """beta_k = min_m SOC_m / SOC_k"""
    array = _socs(socs)
    return ScalingVector(betas=tuple((array.min() / array).tolist()))


def equal_scaling(n: int) -> ScalingVector:
    if n < 1:
        raise DomainError(f"equal scaling needs at least one module, got n={n}")
    return ScalingVector(betas=(1.0,) * n)


def explicit_scaling(betas: Sequence[float]) -> ScalingVector:
    try:
        return ScalingVector(betas=tuple(float(b) for b in betas))
    except ValidationError as e:
        raise DomainError(f"invalid scaling vector: {e.errors()[0]['msg']}") from e


def scaling_for_pack(pack: PackModel, mode: str, betas: Optional[Sequence[float]] = None) -> ScalingVector:
    if mode == "equal":
        return equal_scaling(pack.n)
    if mode == "discharge_soc":
        return discharge_scaling(pack.socs)
    if mode == "charge_soc":
        return charge_scaling(pack.socs)
    if mode == "explicit":
        if betas is None or len(betas) != pack.n:
            raise DomainError(f"explicit scaling needs {pack.n} betas")
        return explicit_scaling(betas)
    raise DomainError(f"unknown scaling mode: {mode}")
