"""Trace serialization: one JSON document per run plus a flat CSV.

JSON schema (``noisyncg-trace/1``)::

    {
      "schema": "noisyncg-trace/1",
      "variant": "bounded" | "dynamic" | "finite_sum",
      "seed": int,
      "params": { ... full run configuration echo, incl. theory block },
      "stop_reason": "hit_epsilon" | "max_iters" | "numerical_failure",
      "stop_detail": str,
      "gap0": float,
      "final_gap": float,
      "final_dist": float | null,
      "final_x": [float, ...],
      "records": [ {per-iteration fields, see IterationRecord}, ... ]
    }

Serialization is canonical (sorted keys, fixed indentation, repr-exact
floats), so identical (config, seed) pairs produce byte-identical
files.  Non-finite floats are encoded as the strings "inf", "-inf" and
"nan".  The CSV holds one row per iteration with a fixed column order;
optional fields are empty when absent.
"""

import csv
import dataclasses
import json
import math

import numpy as np

from .solvers import IterationRecord, Trace

SCHEMA = "noisyncg-trace/1"

CSV_COLUMNS = [f.name for f in dataclasses.fields(IterationRecord)]


def sanitize_json(obj):
    """Recursively make obj strict-JSON safe (non-finite floats -> strings)."""
    return _sanitize(obj)


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        if math.isnan(obj):
            return "nan"
        return "inf" if obj > 0 else "-inf"
    return obj


def _restore_float(v):
    if v in ("inf", "-inf", "nan"):
        return float(v)
    return v


def trace_to_dict(trace: Trace) -> dict:
    return _sanitize({
        "schema": SCHEMA,
        "variant": trace.variant,
        "seed": trace.seed,
        "params": trace.params,
        "stop_reason": trace.stop_reason,
        "stop_detail": trace.stop_detail,
        "gap0": trace.gap0,
        "final_gap": trace.final_gap,
        "final_dist": trace.final_dist,
        "final_x": trace.final_x,
        "records": [dataclasses.asdict(r) for r in trace.records],
    })


def trace_to_json(trace: Trace) -> str:
    return json.dumps(trace_to_dict(trace), sort_keys=True, indent=1)


def save_trace_json(trace: Trace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(trace_to_json(trace))
        fh.write("\n")


def load_trace_json(path) -> Trace:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema") != SCHEMA:
        raise ValueError(f"{path}: unknown trace schema {doc.get('schema')!r}")
    records = []
    for rd in doc["records"]:
        rd = {k: _restore_float(v) for k, v in rd.items()}
        records.append(IterationRecord(**rd))
    return Trace(
        variant=doc["variant"],
        seed=doc["seed"],
        params=doc["params"],
        records=records,
        final_x=np.array(doc["final_x"], dtype=float),
        final_gap=_restore_float(doc["final_gap"]),
        gap0=_restore_float(doc["gap0"]),
        stop_reason=doc["stop_reason"],
        stop_detail=doc.get("stop_detail", ""),
        final_dist=_restore_float(doc["final_dist"]),
    )


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def save_trace_csv(trace: Trace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in trace.records:
            writer.writerow(
                [_csv_cell(getattr(rec, c)) for c in CSV_COLUMNS])
