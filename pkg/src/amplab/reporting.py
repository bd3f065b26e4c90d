"""CSV tables and the JSON run manifest written beside them."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import platform
import subprocess
import sys
from pathlib import Path

import numpy as np
import scipy


def format_value(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".10g")
    return str(v)


def write_csv(rows, columns, out):
    """RFC-4180 CSV with a header row; ``out`` is a path or a text stream."""
    def emit(fh):
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(columns)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(c) for c in columns]
            w.writerow([format_value(v) for v in row])

    if hasattr(out, "write"):
        emit(out)
        return None
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        emit(fh)
    return path


def csv_string(rows, columns):
    buf = io.StringIO()
    write_csv(rows, columns, buf)
    return buf.getvalue()


def git_revision():
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() or None


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else format_value(v)
    return obj


def build_manifest(config=None, seeds=None, extra=None):
    from . import __version__
    from ._kernels import BACKEND

    man = {
        "config": _jsonable(config) if config is not None else None,
        "git_revision": git_revision(),
        "seeds": _jsonable(seeds),
        "versions": {
            "amplab": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "kernel_backend": BACKEND,
        "argv": sys.argv[1:],
        "env": {k: os.environ[k] for k in ("AMPLAB_SEED", "AMPLAB_WORKERS") if k in os.environ},
    }
    if extra:
        man.update(_jsonable(extra))
    return man


def manifest_path(csv_path):
    p = Path(csv_path)
    return p.with_name(p.name + ".manifest.json")


def write_table(rows, columns, path, config=None, seeds=None, extra=None):
    """CSV at ``path`` plus ``<path>.manifest.json``."""
    path = write_csv(rows, columns, path)
    man = build_manifest(config, seeds, extra)
    manifest_path(path).write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")
    return path
