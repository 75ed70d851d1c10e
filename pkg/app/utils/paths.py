import os
from pathlib import Path


BASE_DIR = Path(__file__).resolve().parents[2]


def experiments_path(*parts: str) -> Path:
    return BASE_DIR / "experiments" / Path(*parts)


def results_path(*parts: str) -> Path:
    results_dir = os.getenv("BALANCER_RESULTS_DIR")
    root = Path(results_dir) if results_dir else BASE_DIR / "results"
    return root / Path(*parts)
