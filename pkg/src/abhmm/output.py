"""CSV and JSON writers for metrics, bounds and run manifests.

Floats are written with ``repr`` so files round-trip exactly and re-running
a configuration reproduces byte-identical output.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import __version__

SCHEMA_VERSION = 1
METRICS_COLUMNS = ("step", "accuracy", "p_e", "mean_belief_true", "mean_gap")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_rows(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_metrics_csv(series, path) -> Path:
    rows = zip(series.steps, series.accuracy, series.p_e, series.mean_belief_true, series.mean_gap)
    return write_rows(path, METRICS_COLUMNS, rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        # JSON has no inf/nan
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def metrics_summary(series) -> dict:
    return {
        "label": series.label,
        "overall_accuracy": series.overall_accuracy,
        "adaptation_time": series.adaptation_time,
        "n_runs": series.n_runs,
        "config": series.config,
        "seed": series.config.get("master_seed"),
    }


def manifest(config: dict, files: list, extra: dict | None = None) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "library_version": __version__,
        "config": config,
        "seed": config.get("seed"),
        "files": sorted(str(f) for f in files),
    }
    if extra:
        out.update(extra)
    return out
