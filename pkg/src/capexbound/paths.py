"""Exact simulation of the uncontrolled capacity decay factor and running
supremum utilities.

Transitions are sampled from the exact lognormal step law, so there is no
Euler bias: under the physical measure the log increment over a step has mean
-int mu_C - 0.5 int sigma^2 and variance int sigma^2; under the changed
measure used by the boundary equation the mean is int (sigma^2 - mu_C)
- 0.5 int sigma^2.

Randomness comes from counter-based Philox streams keyed by (seed, purpose,
node), with one matrix row per path, so results are reproducible and
independent of how work is split across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import CoefficientSet, TimeGrid, _freeze

MEASURE_P = "P"
MEASURE_Q = "Q"

_PURPOSE_TAGS = {"simulate": 1, "solve": 2, "audit": 3}


def log_increment_moments(coeffs: CoefficientSet, measure: str, start: int = 0):
    """Per-step (mean, variance) of the log decay factor from node ``start``."""
    var = coeffs.variance_steps(start)
    drift = coeffs.drift_steps(start)
    if measure == MEASURE_P:
        mean = -drift - 0.5 * var
    elif measure == MEASURE_Q:
        mean = var - drift - 0.5 * var
    else:
        raise ValueError(f"unknown measure {measure!r}")
    return mean, var


def gaussian_matrix(seed: int, purpose: str, node: int, shape: tuple) -> np.ndarray:
    """Standard normals from a Philox stream keyed by (seed, purpose, node)."""
    tag = _PURPOSE_TAGS.get(purpose)
    if tag is None:
        raise ValueError(f"unknown purpose {purpose!r}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(tag, int(node)))
    gen = np.random.Generator(np.random.Philox(ss))
    return gen.standard_normal(shape)


@dataclass(frozen=True)
class CapacityPath:
    """One trajectory of the decay factor from node ``s_idx`` (value 1 there)."""

    grid: TimeGrid
    s_idx: int
    values: np.ndarray
    measure: str
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))

    def node_value(self, node: int) -> float:
        return float(self.values[node - self.s_idx])


@dataclass(frozen=True)
class PathBatch:
    """Paths sharing grid, start node, measure and generator stream.

    ``values`` has one row per path and one column per node from ``s_idx``
    to the horizon.  With ``antithetic`` the second half of the rows mirrors
    the Gaussian draws of the first half.
    """

    grid: TimeGrid
    s_idx: int
    values: np.ndarray
    measure: str
    seed: int
    antithetic: bool = True

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def path(self, p: int) -> CapacityPath:
        return CapacityPath(self.grid, self.s_idx, self.values[p], self.measure, p)

    def pair_means(self, per_path: np.ndarray) -> np.ndarray:
        """Antithetic-pair averages of a per-path statistic."""
        if not self.antithetic:
            return per_path
        h = self.n_paths // 2
        return 0.5 * (per_path[:h] + per_path[h:])


def mean_and_se(batch: PathBatch, per_path: np.ndarray) -> tuple[float, float]:
    vals = batch.pair_means(per_path)
    n = vals.size
    if n < 2:
        return float(np.mean(vals)), 0.0
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / np.sqrt(n))


def values_from_normals(coeffs: CoefficientSet, s_idx: int, normals: np.ndarray,
                        measure: str) -> np.ndarray:
    """Decay-factor matrix from standard normal step draws (exact stepping)."""
    mean, var = log_increment_moments(coeffs, measure, s_idx)
    log_steps = mean[None, :] + np.sqrt(var)[None, :] * normals
    logs = np.concatenate([np.zeros((normals.shape[0], 1)), np.cumsum(log_steps, axis=1)], axis=1)
    return np.exp(logs)


def simulate(coeffs: CoefficientSet, grid: TimeGrid, s_idx: int, n: int,
             measure: str = MEASURE_P, seed: int = 0, antithetic: bool = True) -> PathBatch:
    """Simulate ``n`` decay-factor paths from node ``s_idx``.

    With ``antithetic`` the count is rounded up to an even number and draws
    come in +/- pairs.  A fixed seed reproduces the batch bit for bit.
    """
    if n < 1:
        raise ValueError("need at least one path")
    if not 0 <= s_idx < grid.n_steps:
        raise ValueError("start node must lie strictly before the horizon")
    if grid.nodes.shape != coeffs.grid.nodes.shape or np.any(grid.nodes != coeffs.grid.nodes):
        raise ValueError("grid mismatch between coefficients and request")
    m = grid.n_steps - s_idx
    if antithetic:
        half = (n + 1) // 2
        z = gaussian_matrix(seed, "simulate", s_idx, (half, m))
        normals = np.concatenate([z, -z], axis=0)
    else:
        normals = gaussian_matrix(seed, "simulate", s_idx, (n, m))
    vals = values_from_normals(coeffs, s_idx, normals, measure)
    return PathBatch(grid, s_idx, vals, measure, seed, antithetic)


def running_sup_ratio(path: CapacityPath, curve: np.ndarray, start: Optional[int] = None) -> np.ndarray:
    """Running supremum S[k] = max_{j <= i < k} curve[i] / C[i] for k > j.

    The window is open on the right: the value at k only sees nodes strictly
    before k, matching the left-continuous control convention.  Returns one
    entry per k = j+1 .. N.
    """
    j = path.s_idx if start is None else int(start)
    n_steps = path.grid.n_steps
    if j < path.s_idx or j >= n_steps:
        raise ValueError("empty index range for the running supremum")
    curve = np.asarray(curve, dtype=float)
    if curve.size < n_steps:
        raise ValueError("curve must be defined at all nodes before the horizon")
    c = path.values[j - path.s_idx:n_steps - path.s_idx]
    ratios = curve[j:n_steps] / c
    return np.maximum.accumulate(ratios)


def running_sup_matrix(values: np.ndarray, curve_tail: np.ndarray) -> np.ndarray:
    """Batch running supremum: row-wise cummax of curve_tail / values.

    ``values`` holds decay factors at nodes j..N (columns), ``curve_tail`` the
    boundary at nodes j..N-1.  Output column k is the supremum over nodes
    strictly before node j+1+k, one column per k = 0..N-j-1.
    """
    ratios = curve_tail[None, :] / values[:, :curve_tail.size]
    return np.maximum.accumulate(ratios, axis=1)
