"""Result tables and their CSV/JSON serialization."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..metrics import BatchRecord

COLUMNS = [
    "model", "batch_index", "cumulative_n", "m_pseudo", "rmse", "nlpd", "train_seconds",
    "predict_seconds", "onboard_points", "sigma_f2", "ell_1", "ell_2", "sigma_y2", "failed",
]
TIMING_COLUMNS = ("train_seconds", "predict_seconds")
_INT_COLUMNS = {"batch_index", "cumulative_n", "m_pseudo", "onboard_points"}


@dataclass
class ResultTable:
    rows: list[BatchRecord] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def for_model(self, model: str) -> list[BatchRecord]:
        return sorted((r for r in self.rows if r.model == model), key=lambda r: r.batch_index)

    @property
    def models(self) -> list[str]:
        seen = []
        for r in self.rows:
            if r.model not in seen:
                seen.append(r.model)
        return seen

    def final(self, model: str) -> BatchRecord:
        return self.for_model(model)[-1]


def _format(name, value) -> str:
    if name == "failed":
        return "1" if value else "0"
    if name in _INT_COLUMNS or name == "model":
        return str(value)
    return repr(float(value))


def table_to_csv(table: ResultTable, drop_timing: bool = False) -> str:
    columns = [c for c in COLUMNS if not (drop_timing and c in TIMING_COLUMNS)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in table.rows:
        writer.writerow([_format(c, getattr(row, c)) for c in columns])
    return buf.getvalue()


def emit_results(table: ResultTable, path) -> tuple[Path, Path]:
    """Write the CSV to ``path`` and the metadata to ``path`` with a ``.json`` suffix."""
    path = Path(path)
    sidecar = path.with_suffix(".json")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(table_to_csv(table), encoding="utf-8", newline="")
        sidecar.write_text(json.dumps(table.metadata, indent=2, sort_keys=True, default=str) + "\n",
                           encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path, sidecar


def load_results(path) -> ResultTable:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        rows = []
        for rec in reader:
            kwargs = {}
            for f in dataclasses.fields(BatchRecord):
                raw = rec[f.name]
                if f.name == "model":
                    kwargs[f.name] = raw
                elif f.name == "failed":
                    kwargs[f.name] = raw == "1"
                elif f.name in _INT_COLUMNS:
                    kwargs[f.name] = int(raw)
                else:
                    kwargs[f.name] = float(raw)
            rows.append(BatchRecord(**kwargs))
    sidecar = path.with_suffix(".json")
    metadata = json.loads(sidecar.read_text(encoding="utf-8")) if sidecar.exists() else {}
    return ResultTable(rows, metadata)
