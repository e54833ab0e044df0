"""Experiment configuration: JSON parsing, validation and defaults.

A config names a model (flat keys or a nested ``"model"`` block), a noise
law, the horizon and replicate count, and optionally an excitation
certification block and a set of expectations that decide the run's exit
status. Unknown keys are rejected with the offending field named.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError, NlarError
from .models import MODEL_KEYS, default_c_phi, model_from_description, noise_from_description
from .simulator import DEFAULT_DIVERGENCE_THRESHOLD, DEFAULT_OMEGA_MIN_FRACTION, log_checkpoints

TOP_KEYS = {
    "model", "noise", "T", "replicates", "seed", "M", "C_phi", "truncate", "divergence_threshold",
    "omega_min_fraction", "checkpoints", "theta_0", "y0", "workers", "excitation", "expect", "output",
}
CHECKPOINT_KEYS = {"count", "start", "extra"}
EXPECT_DEFAULTS: dict[str, Any] = {
    "consistency": False,
    "ratio_floor": False,
    "lambda_t_floor": False,
    "recurrence": None,
    "bound_factor": 10.0,
    "decrease_fraction": 0.9,
    "decrease_after": 1000,
    "ratio_ref_time": 10_000,
    "ratio_factor": 0.5,
    "lambda_t_tolerance": 0.2,
    "replicate_fraction": 0.9,
}
EXCITATION_DEFAULTS: dict[str, Any] = {
    "E": None,
    "delta_grid": None,
    "min_measure": 0.05,
    "samples": 20_000,
    "coarse_samples": 512,
    "polish_iters": 200,
    "box": None,
    "box_r": [8, 16, 32, 64],
    "jordan_r": [8, 16, 32, 64],
    "probes_per_box": None,
    "seed": None,
    "expect_certified": True,
}
MAX_SEED = 2**64 - 1


@dataclass
class ExperimentConfig:
    model: dict
    T: int
    replicates: int
    seed: int
    noise: dict = field(default_factory=lambda: {"family": "standard_normal"})
    M: float = 10.0
    C_phi: float = 10.0
    truncate: bool = True
    divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD
    omega_min_fraction: float = DEFAULT_OMEGA_MIN_FRACTION
    checkpoints: dict = field(default_factory=lambda: {"count": 40, "start": 10, "extra": []})
    theta_0: list | None = None
    y0: float = 0.0
    workers: int | None = None
    excitation: dict | None = None
    expect: dict = field(default_factory=lambda: dict(EXPECT_DEFAULTS))
    output: str = "runs/out"

    def build_model(self):
        return model_from_description(self.model)

    def build_noise(self):
        return noise_from_description(self.noise)

    def checkpoint_times(self) -> list[int]:
        cp = self.checkpoints
        extra = list(cp["extra"])
        if self.expect.get("ratio_floor"):
            extra.append(self.expect["ratio_ref_time"])
        return log_checkpoints(self.T, cp["count"], cp["start"], extra)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        """SHA-256 of the canonical config, ignoring where outputs go."""
        d = self.to_dict()
        d.pop("output")
        canon = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def with_overrides(self, seed: int | None = None, replicates: int | None = None,
                       output: str | None = None) -> "ExperimentConfig":
        d = self.to_dict()
        if seed is not None:
            d["seed"] = seed
        if replicates is not None:
            d["replicates"] = replicates
        if output is not None:
            d["output"] = str(output)
        return config_from_dict(d)


# --------------------------------------------------------------------------
# validation helpers
# --------------------------------------------------------------------------


def _bad(message: str, field: str) -> ConfigError:
    return ConfigError(field, message)


def _int(d, key, lo=None, hi=None):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (isinstance(v, float) and not v.is_integer()):
        raise _bad(f"{key} must be an integer, got {v!r}", field=key)
    v = int(v)
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise _bad(f"{key}={v} outside [{lo}, {hi}]", field=key)
    return v


def _real(d, key, positive=False, lo=None, hi=None, allow_inf=False):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise _bad(f"{key} must be a number, got {v!r}", field=key)
    v = float(v)
    if math.isnan(v) or (math.isinf(v) and not allow_inf):
        raise _bad(f"{key} must be finite", field=key)
    if positive and not v > 0:
        raise _bad(f"{key} must be positive, got {v}", field=key)
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise _bad(f"{key}={v} outside [{lo}, {hi}]", field=key)
    return v


def _bool(d, key):
    v = d[key]
    if not isinstance(v, bool):
        raise _bad(f"{key} must be true or false", field=key)
    return v


def _reject_unknown(d: dict, allowed, where: str):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise _bad(f"unknown key {extra[0]!r}" + (f" in {where}" if where else ""),
                   field=f"{where}.{extra[0]}" if where else extra[0])


def _split_model(d: dict) -> tuple[dict, dict]:
    """Separate a flat model description from the remaining top-level keys."""
    if "model" in d:
        if "family" in d:
            raise _bad("give the model either flat or as a 'model' block, not both", field="family")
        if not isinstance(d["model"], dict):
            raise _bad("model must be an object", field="model")
        return dict(d["model"]), {k: v for k, v in d.items() if k != "model"}
    if "family" not in d:
        raise _bad("missing model family", field="family")
    fam = d["family"]
    if fam not in MODEL_KEYS:
        raise _bad(f"unknown model family {fam!r}", field="family")
    keys = MODEL_KEYS[fam]
    return {k: v for k, v in d.items() if k in keys}, {k: v for k, v in d.items() if k not in keys}


def _excitation(block, n: int) -> dict:
    if not isinstance(block, dict):
        raise _bad("excitation must be an object", field="excitation")
    _reject_unknown(block, EXCITATION_DEFAULTS, "excitation")
    ex = dict(EXCITATION_DEFAULTS, **block)
    E = ex["E"]
    if not (isinstance(E, list) and len(E) == n and all(isinstance(s, list) and len(s) == 2 for s in E)):
        raise _bad(f"excitation.E must be {n} [lo, hi] pairs", field="excitation.E")
    ex["E"] = [[float(a), float(b)] for a, b in E]
    if any(not a < b for a, b in ex["E"]):
        raise _bad("excitation.E sides need lo < hi", field="excitation.E")
    grid = ex["delta_grid"]
    if not (isinstance(grid, list) and grid and all(isinstance(g, (int, float)) and g > 0 for g in grid)):
        raise _bad("excitation.delta_grid must be a non-empty list of positive numbers",
                   field="excitation.delta_grid")
    ex["delta_grid"] = sorted(float(g) for g in grid)
    ex["min_measure"] = _real(ex, "min_measure", positive=True)
    ex["samples"] = _int(ex, "samples", 100)
    ex["coarse_samples"] = _int(ex, "coarse_samples", 1)
    ex["polish_iters"] = _int(ex, "polish_iters", 0)
    if ex["box"] is None:
        ex["box"] = [list(s) for s in ex["E"]]
    elif not (isinstance(ex["box"], list) and len(ex["box"]) == n):
        raise _bad(f"excitation.box must be {n} [lo, hi] pairs", field="excitation.box")
    else:
        ex["box"] = [[float(a), float(b)] for a, b in ex["box"]]
    for key in ("box_r", "jordan_r"):
        rs = ex[key]
        if not (isinstance(rs, list) and all(isinstance(r, int) and not isinstance(r, bool) and r >= 2 for r in rs)):
            raise _bad(f"excitation.{key} must be a list of integers >= 2", field=f"excitation.{key}")
    if ex["probes_per_box"] is not None:
        ex["probes_per_box"] = _int(ex, "probes_per_box", 2)
    if ex["seed"] is not None:
        ex["seed"] = _int(ex, "seed", 0, MAX_SEED)
    ex["expect_certified"] = _bool(ex, "expect_certified")
    return ex


def _expect(block) -> dict:
    if not isinstance(block, dict):
        raise _bad("expect must be an object", field="expect")
    _reject_unknown(block, EXPECT_DEFAULTS, "expect")
    ex = dict(EXPECT_DEFAULTS, **block)
    for key in ("consistency", "ratio_floor", "lambda_t_floor"):
        ex[key] = _bool(ex, key)
    if ex["recurrence"] not in (None, "Recurrent", "Divergent", "Indeterminate"):
        raise _bad("expect.recurrence must be Recurrent, Divergent or Indeterminate",
                   field="expect.recurrence")
    for key in ("bound_factor", "ratio_factor", "lambda_t_tolerance"):
        ex[key] = _real(ex, key, positive=True)
    for key in ("decrease_fraction", "replicate_fraction"):
        ex[key] = _real(ex, key, lo=0.0, hi=1.0)
    ex["decrease_after"] = _int(ex, "decrease_after", 0)
    ex["ratio_ref_time"] = _int(ex, "ratio_ref_time", 1)
    return ex


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a decoded config object and fill defaults."""
    if not isinstance(raw, dict):
        raise _bad("config must be a JSON object", field="<root>")
    model_desc, rest = _split_model(raw)
    _reject_unknown(rest, TOP_KEYS - {"model"}, "")
    for key in ("T", "replicates", "seed"):
        if key not in rest:
            raise _bad(f"missing required key {key!r}", field=key)
    try:
        model = model_from_description(model_desc)
    except NlarError as exc:
        raise _bad(f"invalid model: {exc}", field="model") from None
    try:
        noise = noise_from_description(rest.get("noise", {"family": "standard_normal"}))
    except NlarError as exc:
        raise _bad(f"invalid noise: {exc}", field="noise") from None
    cfg: dict[str, Any] = {
        "model": _normalize(model_desc),
        "noise": noise.to_dict(),
        "T": _int(rest, "T", 1),
        "replicates": _int(rest, "replicates", 1),
        "seed": _int(rest, "seed", 0, MAX_SEED),
    }
    d = dict(rest)
    d.setdefault("M", 10.0)
    cfg["M"] = _real(d, "M", positive=True)
    d.setdefault("C_phi", default_c_phi(model))
    cfg["C_phi"] = _real(d, "C_phi", positive=True, allow_inf=True)
    d.setdefault("truncate", True)
    cfg["truncate"] = _bool(d, "truncate")
    d.setdefault("divergence_threshold", DEFAULT_DIVERGENCE_THRESHOLD)
    cfg["divergence_threshold"] = _real(d, "divergence_threshold", positive=True)
    d.setdefault("omega_min_fraction", DEFAULT_OMEGA_MIN_FRACTION)
    cfg["omega_min_fraction"] = _real(d, "omega_min_fraction", lo=0.0, hi=1.0)
    cp = d.get("checkpoints", {})
    if not isinstance(cp, dict):
        raise _bad("checkpoints must be an object", field="checkpoints")
    _reject_unknown(cp, CHECKPOINT_KEYS, "checkpoints")
    cp = {"count": 40, "start": 10, "extra": [], **cp}
    if not isinstance(cp["extra"], list):
        raise _bad("checkpoints.extra must be a list", field="checkpoints.extra")
    cfg["checkpoints"] = {
        "count": _int(cp, "count", 2), "start": _int(cp, "start", 1),
        "extra": sorted({_int({"checkpoints.extra": e}, "checkpoints.extra", 1) for e in cp["extra"]}),
    }
    th0 = d.get("theta_0")
    if th0 is not None:
        if not (isinstance(th0, list) and len(th0) == model.regressor.dim
                and all(isinstance(v, (int, float)) and math.isfinite(v) for v in th0)):
            raise _bad(f"theta_0 must be {model.regressor.dim} finite numbers", field="theta_0")
        th0 = [float(v) for v in th0]
    cfg["theta_0"] = th0
    d.setdefault("y0", 0.0)
    cfg["y0"] = _real(d, "y0")
    cfg["workers"] = None if d.get("workers") is None else _int(d, "workers", 1)
    cfg["excitation"] = None if d.get("excitation") is None else _excitation(d["excitation"], model.regressor.arity)
    cfg["expect"] = _expect(d.get("expect", {}))
    out = d.get("output", "runs/out")
    if not isinstance(out, str) or not out:
        raise _bad("output must be a non-empty path string", field="output")
    cfg["output"] = out
    return ExperimentConfig(**cfg)


def _normalize(desc: dict) -> dict:
    """Canonical JSON form of a model description (ints stay ints, tuples become lists)."""
    return json.loads(json.dumps(desc))


def parse_config(path) -> ExperimentConfig:
    """Read and validate a JSON config file. A missing file raises ``FileNotFoundError``."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _bad(f"{path}: invalid JSON ({exc})", field="<root>") from None
    return config_from_dict(raw)


def dump_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(cfg.to_json())
    return path
