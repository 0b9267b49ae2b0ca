"""Run configuration: strict JSON parsing with materialized defaults and a
canonical content hash for artifact provenance."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

from .exceptions import ConfigError
from .kerr import RcHyperParams
from .qsim import QuantumSystemSpec, SimParams
from .training import TrainConfig

SCHEMA_VERSION = 1

# Nested defaults double as the schema: unknown keys anywhere are rejected,
# known ones are type-checked against the default's type.
DEFAULTS = {
    "master_seed": 0,
    "system": {
        "model": "dispersive",
        "kappa": 1.0,
        "delta_c": 0.0,
        "epsilon0": 2.0,
        "delta_q": [180.0, 130.0],
        "g": [18.0, 13.0],
        "gamma_h": 1e-2,
        "n_fock": 30,
        "include_correlated_decay": False,
    },
    "sim": {
        "dt_int": None,  # null -> per-model default
        "dt_record": 1e-2,
        "tau_m": 10.0,
        "store_conditional": True,
    },
    "dataset": {
        "m_per_class": 10,
        "role": "train",  # train | test: selects the seed domain
    },
    "reservoir": {
        "k_nodes": 5,
        "gamma": 0.35,
        "alpha": 1.9,
        "lambda_bar": 5e-2,
        "mu": 5.0,
        "substeps": 4,
        "network_index": 0,  # index into the network seed domain
    },
    "train": {
        "reg_l2": 1e-3,
        "step_size": 0.2,
        "momentum": 0.9,
        "max_iters": 5000,
        "tol_rel": 1e-9,
        "time_mask": 0,
        "restarts": 3,
    },
    "baseline": {
        "kind": "matched",  # boxcar | matched | matched-analytic
    },
    "sweep": {
        "mu": [0.5, 2.0, 5.0, 12.0],
        "lambda_bar": [5e-3, 2e-2, 5e-2, 2e-1],
        "n_seeds": 5,
        "lambda_fixed": True,
        "restarts": 1,
    },
}

_NUMERIC = (int, float)


def _merge(defaults: dict, given: dict, path: str) -> dict:
    out = {}
    for key, value in given.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key '{path}{key}'")
        base = defaults[key]
        here = f"{path}{key}"
        if isinstance(base, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"'{here}' must be an object")
            out[key] = _merge(base, value, here + ".")
        else:
            out[key] = _check_type(base, value, here)
    for key, base in defaults.items():
        if key not in out:
            out[key] = copy.deepcopy(base)
    return out


def _check_type(base, value, where):
    if base is None or value is None:
        if value is None or isinstance(value, _NUMERIC):
            return value
        raise ConfigError(f"'{where}' must be a number or null")
    if isinstance(base, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"'{where}' must be a boolean")
        return value
    if isinstance(base, _NUMERIC):
        if isinstance(value, bool) or not isinstance(value, _NUMERIC):
            raise ConfigError(f"'{where}' must be a number")
        return value
    if isinstance(base, str):
        if not isinstance(value, str):
            raise ConfigError(f"'{where}' must be a string")
        return value
    if isinstance(base, list):
        if not isinstance(value, list):
            raise ConfigError(f"'{where}' must be an array")
        for i, item in enumerate(value):
            if isinstance(item, bool) or not isinstance(item, _NUMERIC):
                raise ConfigError(f"'{where}[{i}]' must be a number")
        return list(value)
    raise ConfigError(f"'{where}' has unsupported schema type")  # pragma: no cover


def resolve_config(raw: dict) -> dict:
    """Validate a parsed config document and materialize all defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a JSON object")
    return _merge(DEFAULTS, raw, "")


def load_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return resolve_config(raw)


def config_hash(cfg: dict) -> str:
    """sha256 over the canonical (sorted, compact) JSON encoding."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# typed views


def system_spec(cfg: dict) -> QuantumSystemSpec:
    s = cfg["system"]
    return QuantumSystemSpec(
        model=s["model"],
        kappa=float(s["kappa"]),
        delta_c=float(s["delta_c"]),
        epsilon0=float(s["epsilon0"]),
        delta_q=tuple(float(v) for v in s["delta_q"]),
        g=tuple(float(v) for v in s["g"]),
        gamma_h=float(s["gamma_h"]),
        n_fock=int(s["n_fock"]),
        include_correlated_decay=bool(s["include_correlated_decay"]),
    )


def sim_params(cfg: dict) -> SimParams:
    s = cfg["sim"]
    return SimParams(
        dt_int=None if s["dt_int"] is None else float(s["dt_int"]),
        dt_record=float(s["dt_record"]),
        tau_m=float(s["tau_m"]),
        store_conditional=bool(s["store_conditional"]),
    )


def rc_hyperparams(cfg: dict) -> RcHyperParams:
    r = cfg["reservoir"]
    return RcHyperParams(
        k_nodes=int(r["k_nodes"]),
        gamma=float(r["gamma"]),
        alpha=float(r["alpha"]),
        lambda_bar=float(r["lambda_bar"]),
        mu=float(r["mu"]),
    )


def train_config(cfg: dict) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        reg_l2=float(t["reg_l2"]),
        step_size=float(t["step_size"]),
        momentum=float(t["momentum"]),
        max_iters=int(t["max_iters"]),
        tol_rel=float(t["tol_rel"]),
        time_mask=int(t["time_mask"]),
    )
