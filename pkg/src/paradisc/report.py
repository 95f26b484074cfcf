"""Machine-readable run outputs: metrics JSON, run report JSON, bucket CSV."""
from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import ParadiscError
from .metrics import BUCKETS, Metrics
from .train import RunReport

BUCKET_HEADER = ("bucket", "macro_f1", "accuracy", "count")


class ReportIOError(ParadiscError, OSError):
    exit_code = 1


def bucket_rows(metrics):
    """One row per DU-count bucket, scored on implicit slots."""
    if metrics.buckets is None:
        return []
    rows = []
    for b in BUCKETS:
        m = metrics.buckets[b]["implicit"]
        rows.append((b, m.macro_f1, m.accuracy, m.count))
    return rows


def emit_report(obj, out_dir):
    """Write ``metrics.json`` and ``buckets.csv`` (plus ``report.json`` for a run).

    Returns a dict of the written paths.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = {}
        if isinstance(obj, RunReport):
            path = out / "report.json"
            path.write_text(json.dumps(obj.to_dict(), indent=2))
            written["report"] = path
            metrics = obj.test
        else:
            metrics = obj
        if metrics is not None:
            path = out / "metrics.json"
            path.write_text(json.dumps(metrics.to_dict(), indent=2))
            written["metrics"] = path
            path = out / "buckets.csv"
            with path.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(BUCKET_HEADER)
                for row in bucket_rows(metrics):
                    w.writerow(row)
            written["buckets"] = path
    except OSError as exc:
        raise ReportIOError(f"cannot write report to {out}: {exc}") from None
    return written


def load_metrics(path):
    return Metrics.from_dict(json.loads(Path(path).read_text()))


def load_report(path):
    return RunReport.from_dict(json.loads(Path(path).read_text()))
