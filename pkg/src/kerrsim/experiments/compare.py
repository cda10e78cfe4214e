"""Regression comparison of two run directories."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .runner import read_series_csv


class IncompatibleRuns(ValueError):
    """The two runs cannot be meaningfully compared."""


def _json_numbers(obj, prefix=""):
    """Flatten all numbers in a JSON document to path -> value."""
    out = {}
    if isinstance(obj, dict):
        for k, v in obj.items():
            out.update(_json_numbers(v, f"{prefix}/{k}"))
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            out.update(_json_numbers(v, f"{prefix}[{i}]"))
    elif isinstance(obj, (int, float)) and not isinstance(obj, bool):
        out[prefix] = float(obj)
    return out


def compare(dir_a, dir_b, tol: float = 1e-10) -> dict:
    """Per-series error report between two run directories.

    Series errors are ``max|a-b|`` and the same normalized by ``max|b|``;
    the report's ``ok`` is true when every relative error is within ``tol``.
    Runs of different kinds are rejected.
    """
    dir_a, dir_b = Path(dir_a), Path(dir_b)
    man_a = json.loads((dir_a / "run.json").read_text())
    man_b = json.loads((dir_b / "run.json").read_text())
    if man_a["kind"] != man_b["kind"]:
        raise IncompatibleRuns(
            f"kind mismatch: {man_a['kind']} vs {man_b['kind']}"
        )
    report: dict = {"kind": man_a["kind"], "tol": tol, "series": {}, "ok": True}
    worst = 0.0
    common_csv = sorted(
        set(a for a in man_a["artifacts"] if a.endswith(".csv"))
        & set(b for b in man_b["artifacts"] if b.endswith(".csv"))
    )
    if not common_csv and man_a["artifacts"]:
        # nothing shared to compare is a config mistake, not a pass
        json_common = set(a for a in man_a["artifacts"] if a.endswith(".json")) & set(
            man_b["artifacts"])
        if not json_common:
            raise IncompatibleRuns("runs share no comparable artifacts")
    for name in common_csv:
        _, cols_a = read_series_csv(dir_a / name)
        _, cols_b = read_series_csv(dir_b / name)
        shared = [c for c in cols_a if c in cols_b]
        for col in shared:
            a, b = cols_a[col], cols_b[col]
            if len(a) != len(b):
                raise IncompatibleRuns(f"{name}:{col} lengths differ")
            max_abs = float(np.max(np.abs(a - b))) if len(a) else 0.0
            scale = float(np.max(np.abs(b))) if len(b) else 0.0
            rel = max_abs / scale if scale > 0 else (0.0 if max_abs == 0 else math.inf)
            report["series"][f"{name}:{col}"] = {"max_abs": max_abs, "rel": rel}
            worst = max(worst, rel)
    for name in sorted(set(man_a["artifacts"]) & set(man_b["artifacts"])):
        if not name.endswith(".json"):
            continue
        nums_a = _json_numbers(json.loads((dir_a / name).read_text()))
        nums_b = _json_numbers(json.loads((dir_b / name).read_text()))
        for key in sorted(set(nums_a) & set(nums_b)):
            a, b = nums_a[key], nums_b[key]
            scale = max(abs(a), abs(b))
            rel = abs(a - b) / scale if scale > 0 else 0.0
            report["series"][f"{name}:{key}"] = {"max_abs": abs(a - b), "rel": rel}
            worst = max(worst, rel)
    report["worst_rel"] = worst
    report["ok"] = bool(worst <= tol)
    return report
