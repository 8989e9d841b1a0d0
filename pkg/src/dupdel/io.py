"""Output writers: versioned CSV/JSON, written atomically."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

SCHEMA_LINE = "# dupdel-schema v1"
OUTPUT_DIR_ENV = "DUPDEL_OUTPUT_DIR"

HISTOGRAM_COLUMNS = ["version", "theta", "seed", "step_or_time", "N", "max_degree", "k", "count"]
SUMMARY_COLUMNS = ["version", "theta", "seed", "step_or_time", "N", "max_degree",
                   "scaling_estimate", "S1", "S2", "S3"]
OVERFLOW = "overflow"


def fmt(value) -> str:
    """Full round-trip formatting for floats; plain ``str`` otherwise."""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    if value is None:
        return ""
    return str(value)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    buf.write(SCHEMA_LINE + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if isinstance(row, dict):
            row = [row.get(c) for c in columns]
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def json_text(doc) -> str:
    return json.dumps(doc, indent=2, default=_json_default) + "\n"


def _json_default(obj):
    try:
        import numpy as np

        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
    except ImportError:  # pragma: no cover
        pass
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def resolve_output(path) -> Path:
    """Relative paths land under ``$DUPDEL_OUTPUT_DIR`` when it is set."""
    path = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def atomic_write(path, text: str) -> Path:
    """Write ``text`` via a temporary file in the target directory and rename."""
    path = resolve_output(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def histogram_rows(snap, theta, seed, k_max=200):
    """One row per degree bucket up to ``k_max`` plus an overflow bucket."""
    head = [snap.version, theta, seed, snap.step_or_time, snap.N, snap.max_degree]
    over = 0
    for k in sorted(snap.degree_histogram):
        count = snap.degree_histogram[k]
        if k <= k_max:
            yield head + [k, count]
        else:
            over += count
    if over:
        yield head + [OVERFLOW, over]


def summary_row(snap, theta, seed):
    s = snap.s_r_values
    return [snap.version, theta, seed, snap.step_or_time, snap.N, snap.max_degree,
            snap.scaling_estimate, s.get(1), s.get(2), s.get(3)]


def result_csv_rows(result):
    """Flat rows ``kind,snapshot,metric,mean,stderr,count`` for a RunResult."""
    kind = result.spec["kind"]
    for row in result.aggregates:
        yield [kind, row["snapshot"], row["metric"], row["mean"], row["stderr"], row["count"]]


RESULT_COLUMNS = ["kind", "snapshot", "metric", "mean", "stderr", "count"]
VERDICT_COLUMNS = ["metric", "observed", "reference", "tolerance", "passed"]
