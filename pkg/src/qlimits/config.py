"""Experiment configuration: strict schema, defaults, canonical hashing.

Configs are TOML (primary) or JSON.  Unknown keys are rejected anywhere in
the tree; every range constraint of the owning module is re-validated at
load and reported with the offending field name.  The canonical form is a
sorted-key compact JSON encoding with shortest round-trip floats, so the
SHA-256 config hash is stable under key reordering and formatting; the
output directory is deployment plumbing and stays out of the hash.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, Optional

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

import numpy as np

KINDS = (
    "truncate-sweep",
    "readout",
    "fidelity",
    "peres-condition",
    "peres-echo",
    "speed-limit",
)

TAILS = ("inverse-square", "uniform", "aligned")
BASES = ("energy", "computational")
SOURCES = ("sampled", "explicit")


class ConfigError(ValueError):
    """Configuration file is malformed or violates a constraint."""


_SECTION_KEYS = {
    "dimensions": {"D", "N", "N1", "n"},
    "grid": {"t_max", "steps"},
    "model": {
        "source", "v_scale", "tail", "channels", "energy_scale",
        "h_scale", "a_scale", "basis",
        "c", "d", "E", "V", "weights", "H", "A0", "psi",
    },
    "tolerances": {"epsilon", "peres_threshold", "bound_ceiling"},
    "constants": {"K", "hbar"},
    "ensemble": {"size", "delta"},
}
_TOP_KEYS = {"kind", "seed", "out_dir"} | set(_SECTION_KEYS)

_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "grid": {"steps": 101},
    "model": {
        "source": "sampled", "v_scale": 1.0, "tail": "inverse-square",
        "channels": 3, "energy_scale": 1.0, "h_scale": 1.0, "a_scale": 1.0,
        "basis": "energy",
    },
    "tolerances": {"epsilon": 1e-3, "peres_threshold": 1e-3, "bound_ceiling": 1e3},
    "constants": {"K": 1.0, "hbar": 1.0},
    "ensemble": {"size": 1, "delta": 0.0},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration with all defaults materialized."""

    kind: str
    seed: int
    out_dir: Optional[str]
    dimensions: Dict[str, int]
    grid: Dict[str, Any]
    model: Dict[str, Any]
    tolerances: Dict[str, float]
    constants: Dict[str, float]
    ensemble: Dict[str, Any]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))

    def canonical_payload(self) -> Dict[str, Any]:
        """Hash-defining content: everything but the output directory."""
        return {
            "kind": self.kind,
            "seed": self.seed,
            "dimensions": dict(sorted(self.dimensions.items())),
            "grid": dict(sorted(self.grid.items())),
            "model": dict(sorted(self.model.items())),
            "tolerances": dict(sorted(self.tolerances.items())),
            "constants": dict(sorted(self.constants.items())),
            "ensemble": dict(sorted(self.ensemble.items())),
        }


def canonical_json(payload: Any) -> str:
    """Compact, sorted-keys, LF-free JSON with shortest round-trip floats."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_json(config.canonical_payload()).encode("utf-8")).hexdigest()


def _fail(field: str, message: str) -> None:
    raise ConfigError(f"{field}: {message}")


def _require_int(section: dict, sec_name: str, key: str, lo=None, hi=None, required=False):
    field = f"{sec_name}.{key}" if sec_name else key
    if key not in section:
        if required:
            _fail(field, "required key is missing")
        return None
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(field, f"must be an integer, got {value!r}")
    if lo is not None and value < lo:
        _fail(field, f"must be >= {lo}, got {value}")
    if hi is not None and value > hi:
        _fail(field, f"must be <= {hi}, got {value}")
    return int(value)


def _require_number(section: dict, sec_name: str, key: str, positive=False, nonnegative=False):
    field = f"{sec_name}.{key}"
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(field, f"must be a number, got {value!r}")
    value = float(value)
    if not np.isfinite(value):
        _fail(field, "must be finite")
    if positive and not value > 0:
        _fail(field, f"must be > 0, got {value}")
    if nonnegative and value < 0:
        _fail(field, f"must be >= 0, got {value}")
    return value


def _require_choice(section: dict, sec_name: str, key: str, choices):
    field = f"{sec_name}.{key}"
    value = section[key]
    if value not in choices:
        _fail(field, f"must be one of {list(choices)}, got {value!r}")
    return value


def complex_array(data: Any, field: str, ndim: int) -> np.ndarray:
    """Parse nested [re, im] pairs into a complex array of rank ``ndim``."""
    try:
        arr = np.asarray(data, dtype=np.float64)
    except (TypeError, ValueError):
        _fail(field, "must be nested [re, im] number pairs")
    if arr.ndim != ndim + 1 or arr.shape[-1] != 2:
        _fail(field, f"must have shape (...x{ndim} dims..., 2) of [re, im] pairs, got {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def parse_config_file(path) -> Dict[str, Any]:
    """Raw mapping from a TOML or JSON file, with located parse errors."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_bytes()
    if p.suffix.lower() == ".json":
        try:
            raw = json.loads(text.decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{p}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc
    else:
        try:
            raw = tomllib.loads(text.decode("utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{p}: TOML parse error: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{p}: top level must be a table/object")
    return raw


def validate_config(raw: Dict[str, Any]) -> ExperimentConfig:
    """Validate a raw mapping and materialize defaults."""
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        _fail(sorted(unknown)[0], "unknown key (no keys are ignored silently)")
    for name, keys in _SECTION_KEYS.items():
        section = raw.get(name, {})
        if not isinstance(section, dict):
            _fail(name, "must be a table/object")
        bad = set(section) - keys
        if bad:
            _fail(f"{name}.{sorted(bad)[0]}", "unknown key (no keys are ignored silently)")

    kind = raw.get("kind")
    if kind not in KINDS:
        _fail("kind", f"must be one of {list(KINDS)}, got {kind!r}")
    seed = _require_int(raw, "", "seed", lo=0, required=True)
    if seed >= 2**64:
        _fail("seed", "must fit in 64 bits")
    out_dir = raw.get("out_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        _fail("out_dir", "must be a string path")

    sections = {}
    for name in _SECTION_KEYS:
        merged = dict(_DEFAULTS.get(name, {}))
        merged.update(raw.get(name, {}))
        sections[name] = merged

    dims = sections["dimensions"]
    d = _require_int(dims, "dimensions", "D", lo=2, required=True)
    n = _require_int(dims, "dimensions", "N", lo=1)
    n1 = _require_int(dims, "dimensions", "N1", lo=1)
    rank = _require_int(dims, "dimensions", "n", lo=0)
    if n is not None and n >= d:
        _fail("dimensions.N", f"must satisfy 1 <= N < D = {d}, got {n}")
    if n1 is not None:
        if n is None:
            _fail("dimensions.N1", "requires dimensions.N")
        if not (n < n1 <= d):
            _fail("dimensions.N1", f"must satisfy N < N1 <= D ({n} < N1 <= {d}), got {n1}")
    if rank is not None and rank > d:
        _fail("dimensions.n", f"must satisfy 0 <= n <= D = {d}, got {rank}")

    grid = sections["grid"]
    if "t_max" not in grid:
        _fail("grid.t_max", "required key is missing")
    _require_number(grid, "grid", "t_max", positive=True)
    _require_int(grid, "grid", "steps", lo=2, required=True)

    model = sections["model"]
    _require_choice(model, "model", "source", SOURCES)
    _require_choice(model, "model", "tail", TAILS)
    _require_choice(model, "model", "basis", BASES)
    for key in ("v_scale", "energy_scale", "h_scale", "a_scale"):
        _require_number(model, "model", key, nonnegative=True)
    _require_int(model, "model", "channels", lo=1, required=True)

    tolerances = sections["tolerances"]
    for key in ("epsilon", "peres_threshold", "bound_ceiling"):
        _require_number(tolerances, "tolerances", key, positive=True)

    constants = sections["constants"]
    for key in ("K", "hbar"):
        _require_number(constants, "constants", key, positive=True)

    ensemble = sections["ensemble"]
    _require_int(ensemble, "ensemble", "size", lo=1, required=True)
    _require_number(ensemble, "ensemble", "delta", nonnegative=True)

    needs = {
        "readout": ("N",),
        "fidelity": ("N", "N1"),
        "peres-condition": ("N",),
    }
    for key in needs.get(kind, ()):
        if dims.get(key) is None:
            _fail(f"dimensions.{key}", f"required for kind {kind!r}")

    return ExperimentConfig(
        kind=kind,
        seed=seed,
        out_dir=out_dir,
        dimensions={k: v for k, v in dims.items() if v is not None},
        grid=grid,
        model=model,
        tolerances=tolerances,
        constants=constants,
        ensemble=ensemble,
    )


def load_config(path) -> ExperimentConfig:
    """Parse and validate a config file."""
    return validate_config(parse_config_file(path))
