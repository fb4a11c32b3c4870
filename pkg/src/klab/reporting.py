"""Deterministic CSV/JSON emission.

Every artifact embeds the package version and an echo of the producing
config, and identical (config, seed) pairs serialize byte-identically:
keys are sorted, floats use repr round-tripping, and no timestamps or
environment-dependent values are written.
"""

from __future__ import annotations

import csv
import io
import json
import math

from . import __version__
from .errors import IoError


def artifact_version() -> str:
    return __version__


def _cell(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    if isinstance(v, complex):
        return f"{v.real!r}{'+' if v.imag >= 0 else '-'}{abs(v.imag)!r}j"
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            fh.write(csv_text(header, rows))
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def envelope(config: dict, payload: dict) -> dict:
    return {"version": artifact_version(),
            "config": {str(k): config[k] for k in sorted(config)},
            **payload}


def json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> None:
    try:
        with open(path, "w") as fh:
            fh.write(json_text(obj))
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
