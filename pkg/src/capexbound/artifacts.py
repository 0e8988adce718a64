"""Deterministic artifact emission: CSV files with 17-significant-digit
rendering and a JSON run manifest.  Output bytes depend only on the config,
seeds and flags, never on timing or worker count.
"""

from __future__ import annotations

import json
import os
from typing import Optional

import numpy as np

from .boundary import BoundaryCurve
from .model import TimeGrid


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_boundary_csv(path: str, curve: BoundaryCurve, model_hash: str, seed: int) -> None:
    lines = [f"# model_hash={model_hash}", f"# seed={seed}",
             "t,yhat,residual,residual_se,iters"]
    t = curve.grid.nodes[:-1]
    for i in range(t.size):
        lines.append(",".join([fmt(t[i]), fmt(curve.values[i]), fmt(curve.residual[i]),
                               fmt(curve.residual_se[i]), str(int(curve.iters[i]))]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


class BoundaryFile:
    def __init__(self, t, yhat, residual, residual_se, iters, model_hash, seed):
        self.t = t
        self.yhat = yhat
        self.residual = residual
        self.residual_se = residual_se
        self.iters = iters
        self.model_hash = model_hash
        self.seed = seed


def read_boundary_csv(path: str) -> BoundaryFile:
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
            elif line.startswith("t,"):
                continue
            else:
                rows.append(line.split(","))
    data = np.asarray(rows, dtype=float)
    return BoundaryFile(data[:, 0], data[:, 1], data[:, 2], data[:, 3],
                        data[:, 4].astype(int), meta.get("model_hash", ""),
                        int(meta.get("seed", 0)))


def write_controls_csv(path: str, grid: TimeGrid, plans, capacity: np.ndarray,
                       limit: int = 100) -> None:
    n_dump = min(limit, plans.nubar.shape[0])
    t = grid.nodes[plans.s_idx:]
    lines = ["path_id,t,nubar,nu,capacity"]
    for p in range(n_dump):
        for k in range(t.size):
            lines.append(",".join([str(p), fmt(t[k]), fmt(plans.nubar[p, k]),
                                   fmt(plans.nu[p, k]), fmt(capacity[p, k])]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_paths_csv(path: str, grid: TimeGrid, batch, limit: int = 100) -> None:
    n_dump = min(limit, batch.values.shape[0])
    t = grid.nodes[batch.s_idx:]
    lines = ["path_id,t,value,measure"]
    for p in range(n_dump):
        for k in range(t.size):
            lines.append(",".join([str(p), fmt(t[k]), fmt(batch.values[p, k]), batch.measure]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_manifest(path: str, manifest: dict) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def ensure_dir(path: str) -> None:
    os.makedirs(path, exist_ok=True)
