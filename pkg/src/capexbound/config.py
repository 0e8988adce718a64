"""Config file ingestion: JSON sections for grid, coefficients, production,
scrap, tolerances and Monte-Carlo settings.  Unknown keys are rejected so a
typo cannot silently fall back to a default.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .boundary import McConfig, SolverConfig
from .model import (
    AssumptionError,
    CobbDouglas,
    CoefficientSet,
    SaturatingExponential,
    TimeGrid,
    ZeroScrap,
    power_marginal,
)


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


_SECTIONS = {"grid", "coefficients", "production", "scrap", "tolerances", "mc", "lattice"}
_COEFF_KEYS = {"mu_C", "sigma", "f_C", "mu_F", "w", "r", "f_C_prime", "eps_o", "bounds"}
_BOUND_KEYS = {"k_f", "kappa_f", "k_w", "kappa_w", "k_r", "kappa_r"}
_TOL_KEYS = {"tol_y", "tol_y_det", "max_iter", "cross_gap"}
_MC_KEYS = {"paths", "seed", "antithetic"}
_LATTICE_KEYS = {"y_min", "y_max", "nodes"}


def _require_keys(section: str, data: dict, allowed: set, required: set = frozenset()):
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"section '{section}': unknown keys {sorted(unknown)}")
    missing = required - set(data)
    if missing:
        raise ConfigError(f"section '{section}': missing keys {sorted(missing)}")


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    grid: TimeGrid
    coeffs: CoefficientSet
    production: object
    scrap: object
    solver: SolverConfig
    mc: McConfig
    lattice: Optional[dict]
    cross_gap: float

    @property
    def config_hash(self) -> str:
        return _digest(self.raw)

    @property
    def model_hash(self) -> str:
        model_part = {k: self.raw[k] for k in ("grid", "coefficients", "production", "scrap")
                      if k in self.raw}
        return _digest(model_part)


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: line {exc.lineno}, column {exc.colno}") from exc
    return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    _require_keys("(root)", raw, _SECTIONS, {"grid", "coefficients", "production", "scrap"})

    gsec = raw["grid"]
    _require_keys("grid", gsec, {"T", "N"}, {"T", "N"})
    try:
        grid = TimeGrid.uniform(float(gsec["T"]), int(gsec["N"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"grid: {exc}") from exc

    csec = dict(raw["coefficients"])
    _require_keys("coefficients", csec, _COEFF_KEYS, {"mu_C", "sigma", "f_C", "mu_F", "w", "r"})
    bounds = csec.pop("bounds", None)
    if bounds is not None:
        _require_keys("coefficients.bounds", bounds, _BOUND_KEYS)
    eps_o = float(csec.pop("eps_o", 1e-6))
    f_C_prime = csec.pop("f_C_prime", None)
    arrays = {}
    for name in ("mu_C", "sigma", "f_C", "mu_F", "w", "r"):
        arrays[name] = _coerce_function(name, csec[name], grid)
    if f_C_prime is not None:
        f_C_prime = _coerce_function("f_C_prime", f_C_prime, grid)
    try:
        coeffs = CoefficientSet.build(grid, f_C_prime=f_C_prime, eps_o=eps_o,
                                      bounds=bounds, **arrays)
    except ValueError as exc:
        raise ConfigError(f"coefficients: {exc}") from exc

    production = _parse_production(raw["production"])
    scrap = _parse_scrap(raw["scrap"])

    tsec = raw.get("tolerances", {})
    _require_keys("tolerances", tsec, _TOL_KEYS)
    defaults = SolverConfig()
    solver = SolverConfig(tol_rel=float(tsec.get("tol_y", defaults.tol_rel)),
                          tol_rel_det=float(tsec.get("tol_y_det", defaults.tol_rel_det)),
                          max_iter=int(tsec.get("max_iter", defaults.max_iter)))
    cross_gap = float(tsec.get("cross_gap", 0.10))

    msec = raw.get("mc", {})
    _require_keys("mc", msec, _MC_KEYS)
    mc = McConfig(n_paths=int(msec.get("paths", 20000)),
                  seed=int(msec.get("seed", 0)),
                  antithetic=bool(msec.get("antithetic", True)))

    lsec = raw.get("lattice")
    if lsec is not None:
        _require_keys("lattice", lsec, _LATTICE_KEYS, {"y_min", "y_max"})
        lsec = {"y_min": float(lsec["y_min"]), "y_max": float(lsec["y_max"]),
                "nodes": int(lsec.get("nodes", 200))}

    return RunConfig(raw=raw, grid=grid, coeffs=coeffs, production=production,
                     scrap=scrap, solver=solver, mc=mc, lattice=lsec, cross_gap=cross_gap)


def _coerce_function(name: str, spec, grid: TimeGrid):
    if isinstance(spec, (int, float)):
        return float(spec)
    if isinstance(spec, list):
        arr = np.asarray(spec, dtype=float)
        if arr.size != grid.nodes.size:
            raise ConfigError(f"coefficients.{name}: expected {grid.nodes.size} node values, "
                              f"got {arr.size}")
        return arr
    raise ConfigError(f"coefficients.{name}: expected a number or node array")


def _parse_production(psec: dict):
    if "variant" not in psec:
        raise ConfigError("production: missing 'variant'")
    variant = psec["variant"]
    if variant == "cobb_douglas":
        _require_keys("production", psec,
                      {"variant", "alpha", "beta", "gamma", "kappa_L", "kappa_K"},
                      {"alpha", "beta", "gamma"})
        try:
            return CobbDouglas(alpha=float(psec["alpha"]), beta=float(psec["beta"]),
                               gamma=float(psec["gamma"]),
                               kappa_L=float(psec.get("kappa_L", 1e6)),
                               kappa_K=float(psec.get("kappa_K", 1e6)))
        except AssumptionError:
            raise
        except ValueError as exc:
            raise AssumptionError(f"production: {exc}") from exc
    if variant == "power_marginal":
        _require_keys("production", psec, {"variant", "scale", "exponent"},
                      {"scale", "exponent"})
        try:
            return power_marginal(float(psec["scale"]), float(psec["exponent"]))
        except ValueError as exc:
            raise AssumptionError(f"production: {exc}") from exc
    raise ConfigError(f"production: unknown variant {variant!r} "
                      "(tabulated technologies are library-only)")


def _parse_scrap(ssec: dict):
    if "variant" not in ssec:
        raise ConfigError("scrap: missing 'variant'")
    variant = ssec["variant"]
    if variant == "saturating_exponential":
        _require_keys("scrap", ssec, {"variant", "a", "b"}, {"a", "b"})
        try:
            return SaturatingExponential(a=float(ssec["a"]), b=float(ssec["b"]))
        except ValueError as exc:
            raise AssumptionError(f"scrap: {exc}") from exc
    if variant == "zero":
        _require_keys("scrap", ssec, {"variant"})
        return ZeroScrap()
    raise ConfigError(f"scrap: unknown variant {variant!r}")
