import csv
import json
from pathlib import Path
from typing import List, Optional, Sequence, Union
from app.errors import TelemetryFileError
from app.models.schemas import SummaryReport, TelemetryRecord

SHARED_HEAD = ["time_s", "load_true_ohm", "load_est_ohm", "beta_opt_a"]
SHARED_TAIL = ["v_bus_v", "i_bus_a", "spread_a"]


def telemetry_columns(n_modules: int) -> List[str]:
    per_module = []
    for k in range(1, n_modules + 1):
        per_module += [f"duty_{k}", f"v_cmd_{k}_v", f"i_{k}_a"]
    return SHARED_HEAD + per_module + SHARED_TAIL


def _row(record: TelemetryRecord) -> dict:
    row = {
        "time_s": record.time,
        "load_true_ohm": record.load_true,
        "load_est_ohm": record.load_estimate,
        "beta_opt_a": record.beta_opt,
    }
    for k, (duty, v_cmd, current) in enumerate(zip(record.duties, record.v_cmd, record.currents), start=1):
        row[f"duty_{k}"] = duty
        row[f"v_cmd_{k}_v"] = v_cmd
        row[f"i_{k}_a"] = current
    row["v_bus_v"] = record.v_bus
    row["i_bus_a"] = record.i_bus
    row["spread_a"] = record.current_spread
    return row


class TelemetryStorage:
    """CSV telemetry plus a JSON summary written beside it."""

    def __init__(self, csv_path: Union[str, Path]):
        self.csv_path = Path(csv_path)
        self.summary_path = self.csv_path.with_suffix(".summary.json")

    def _ensure_parent(self):
        try:
            self.csv_path.parent.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise TelemetryFileError(self.csv_path.parent, str(e)) from e

    def write_records(self, records: Sequence[TelemetryRecord], n_modules: Optional[int] = None):
        """Floats are written with repr, so parsing the file gives back the exact values."""
        if n_modules is None:
            n_modules = len(records[0].duties) if records else 0
        self._ensure_parent()
        try:
            with open(self.csv_path, "w", newline="", encoding="utf-8") as f:
                writer = csv.DictWriter(f, fieldnames=telemetry_columns(n_modules))
                writer.writeheader()
                for record in records:
                    writer.writerow(_row(record))
        except OSError as e:
            raise TelemetryFileError(self.csv_path, str(e)) from e

    def read_rows(self) -> List[dict]:
        try:
            with open(self.csv_path, "r", newline="", encoding="utf-8") as f:
                return [{key: float(value) for key, value in row.items()} for row in csv.DictReader(f)]
        except OSError as e:
            raise TelemetryFileError(self.csv_path, str(e)) from e

    def write_summary(self, report: SummaryReport):
        write_summary_json(report, self.summary_path)

    def read_summary(self) -> SummaryReport:
        try:
            with open(self.summary_path, "r", encoding="utf-8") as f:
                return SummaryReport(**json.load(f))
        except OSError as e:
            raise TelemetryFileError(self.summary_path, str(e)) from e


def write_telemetry_csv(records: Sequence[TelemetryRecord], path: Union[str, Path], n_modules: Optional[int] = None):
    TelemetryStorage(path).write_records(records, n_modules)


def write_summary_json(report: SummaryReport, path: Union[str, Path]):
    """Write a summary to an explicit path instead of beside a CSV."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(report.model_dump(), f, indent=2)
    except OSError as e:
        raise TelemetryFileError(path, str(e)) from e
