"""Dataset files and result CSVs."""
from __future__ import annotations

import csv
import json
import os

import numpy as np

from .datasets import LabeledDataset
from .errors import ConfigError

_HEADER_KEYS = ("D", "N", "generator", "seed")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_dataset(path, dataset: LabeledDataset):
    """Header lines ``#key=value`` then ``coords..., gt_lid, component_id`` rows.

    Floats are written with 17 significant digits so a round trip is exact.
    """
    meta = dataset.meta
    n, dim = dataset.points.shape
    lines = [f"#D={dim}", f"#N={n}", f"#generator={meta.get('generator', 'unknown')}",
             f"#seed={meta.get('seed', 0)}"]
    if meta.get("params") is not None:
        lines.append("#params=" + json.dumps(_jsonable(meta["params"]), sort_keys=True))
    fmt = ",".join(["%.17g"] * dim + ["%.17g", "%d"])
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
        for row, lid, comp in zip(dataset.points, dataset.gt_lid, dataset.component_id):
            fh.write(fmt % (*row, lid, comp) + "\n")


def read_dataset(path) -> LabeledDataset:
    if not os.path.exists(path):
        raise ConfigError(f"dataset file not found: {path}")
    header = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            header[key] = value
    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise ConfigError(f"{path}: missing header fields {missing}")
    dim, n = int(header["D"]), int(header["N"])
    rows = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if rows.shape != (n, dim + 2):
        raise ConfigError(f"{path}: expected {n} rows of {dim + 2} columns, got {rows.shape}")
    meta = {"generator": header["generator"], "seed": int(header["seed"]),
            "params": json.loads(header["params"]) if "params" in header else None,
            "path": str(path)}
    return LabeledDataset(rows[:, :dim], rows[:, dim], rows[:, dim + 1].astype(int), meta)


def fmt_value(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns, rows, config_hash=None):
    """Comment line with the config hash, a header row, then the data rows."""
    with open(path, "w", newline="") as fh:
        if config_hash is not None:
            fh.write(f"# config_sha256={config_hash}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt_value(v) for v in row])


def read_csv(path):
    """Rows of a file written by :func:`write_csv` as dicts of strings."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))
