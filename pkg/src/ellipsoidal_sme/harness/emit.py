"""Write run records as CSV or JSON, with a manifest describing the run."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, fields, is_dataclass
from enum import Enum
from importlib import metadata
from pathlib import Path

import numpy as np

from .runner import StepRecord

__all__ = ["emit", "csv_header", "write_csv", "write_json", "read_json", "write_manifest",
           "write_diagnostics", "tool_version"]


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _num(x) -> str:
    # repr of a float is the shortest string that round-trips
    return repr(float(x))


def csv_header(n: int) -> list:
    return ["k"] + [f"xhat{i}" for i in range(n)] + ["sigma", "rank", "pvol", "ssal", "err",
                                                      "contained", "cases", "ms"]


def write_csv(records, path) -> None:
    if not records:
        raise ValueError("no records to write")
    n = len(records[0].xhat)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(n))
        for r in records:
            w.writerow([r.k] + [_num(v) for v in r.xhat]
                       + [_num(r.sigma), r.rank, _num(r.pvol), _num(r.ssal), _num(r.err),
                          "1" if r.contained else "0", r.cases,
                          "" if r.ms is None else f"{r.ms:.3f}"])


def _json_value(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def write_json(records, path) -> None:
    if not records:
        raise ValueError("no records to write")
    rows = []
    for r in records:
        d = asdict(r)
        d["xhat"] = list(d["xhat"])
        rows.append({k: _json_value(v) for k, v in d.items()})
    Path(path).write_text(json.dumps(rows, indent=1) + "\n")


def read_json(path) -> list:
    """Records written by :func:`write_json`."""
    names = {f.name for f in fields(StepRecord)}
    out = []
    for d in json.loads(Path(path).read_text()):
        d = {k: (float(v) if v in ("inf", "-inf") else v) for k, v in d.items() if k in names}
        d["xhat"] = tuple(d["xhat"])
        out.append(StepRecord(**d))
    return out


def _plain(x):
    if is_dataclass(x):
        return {f.name: _plain(getattr(x, f.name)) for f in fields(x)}
    if isinstance(x, Enum):
        return x.value
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, float):
        return _json_value(x)
    return x


def write_manifest(path, seed: int, config, scenario: str = None, extra: dict = None) -> None:
    """Seed, estimator configuration and tool version of a run."""
    d = {"tool": "artifact", "version": tool_version(), "seed": int(seed),
         "scenario": scenario, "config": _plain(config)}
    if extra:
        d.update(_plain(extra))
    Path(path).write_text(json.dumps(d, indent=1, sort_keys=True) + "\n")


def write_diagnostics(diags, path) -> None:
    """Bound factors and gramian eigenvalue extremes per step, as CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "v", "s", "window", "obs_min", "obs_max", "ctrl_min", "ctrl_max"])
        for k, d in enumerate(diags):
            if d is None:
                continue
            oe = d.obs_eig or ("", "")
            ce = d.ctrl_eig or ("", "")
            w.writerow([k, _num(d.v), _num(d.s), "" if d.window is None else d.window,
                        *(v if v == "" else _num(v) for v in (*oe, *ce))])


def emit(records, fmt: str, path) -> None:
    """Write records in ``fmt`` (``"csv"`` or ``"json"``) to ``path``."""
    if fmt == "csv":
        write_csv(records, path)
    elif fmt == "json":
        write_json(records, path)
    else:
        raise ValueError(f"unknown format {fmt!r}")
