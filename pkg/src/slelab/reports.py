"""Deterministic report emission: canonical JSON and CSV streams.

Reports never contain wall-clock data; identical configs must produce
byte-identical files.  Every report carries the artifact version and the
config hash so calibrated constants can be regression-pinned against the
exact run that produced them.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .estimates import EstimateRecord


def _sanitize(obj):
    """Make numpy scalars and non-finite floats JSON-stable."""
    import numpy as np
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def canonical_json(payload: dict) -> str:
    return json.dumps(_sanitize(payload), sort_keys=True, indent=1,
                      separators=(",", ": ")) + "\n"


def write_report(path: Path, payload: dict, config_hash: str) -> None:
    payload = dict(payload)
    payload["artifact_version"] = __version__
    payload["config_hash"] = config_hash
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(payload))


def write_estimate_csv(path: Path, records: Iterable[EstimateRecord]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EstimateRecord.CSV_HEADER)
    for rec in records:
        writer.writerow(rec.csv_row())
    path.write_text(buf.getvalue())


def read_report(path: Path) -> dict:
    return json.loads(Path(path).read_text())
