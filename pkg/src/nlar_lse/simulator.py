"""Trajectory generation, state windows and compact-set visit counts."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import InvalidArgument, NumericError, OutOfRange
from .models import ModelSpec, NoiseSpec
from .rng import make_generator

DEFAULT_DIVERGENCE_THRESHOLD = 1e12
DEFAULT_OMEGA_MIN_FRACTION = 0.5


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Realized path ``y[0..last]`` of a model run for ``T`` requested steps.

    ``values`` stops early at ``divergence_time`` when the path escaped;
    ``y[t] = 0`` for ``t < 0`` is implicit.
    """

    values: np.ndarray
    T: int
    arity: int
    model_name: str
    seed: int
    noise_family: str
    diverged: bool = False
    divergence_time: int | None = None
    threshold: float = DEFAULT_DIVERGENCE_THRESHOLD
    model_description: dict | None = field(default=None, repr=False)

    @property
    def last(self) -> int:
        return self.values.size - 1

    def metadata(self) -> dict:
        return {
            "model": self.model_name,
            "model_description": self.model_description,
            "seed": self.seed,
            "T": self.T,
            "arity": self.arity,
            "noise": self.noise_family,
            "diverged": self.diverged,
            "divergence_time": self.divergence_time,
            "divergence_threshold": self.threshold,
        }


@dataclass(frozen=True)
class RecurrenceCounter:
    M: float
    checkpoints: tuple[int, ...]
    counts: tuple[int, ...]
    omega_proxy: bool


def simulate(model: ModelSpec, noise: NoiseSpec, T: int, seed: int,
             divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD,
             y0: float = 0.0) -> Trajectory:
    """Iterate the model for ``T`` steps from ``y[0] = y0``.

    Noise ``w[1..T]`` is the first ``T`` draws of the stream seeded by
    ``seed``. The run stops as soon as ``|y| > divergence_threshold``.
    """
    T = int(T)
    if T < 1:
        raise InvalidArgument(f"T must be >= 1, got {T}")
    if not divergence_threshold > 0:
        raise InvalidArgument("divergence_threshold must be positive")
    w = np.ascontiguousarray(noise.sample(make_generator(seed), T), dtype=np.float64)
    y = np.zeros(T + 1)
    y0 = float(y0)
    thr = float(divergence_threshold)
    desc = model.description
    fam = model.family
    if fam == "linear_ar":
        last, status = kernels.simulate_linear(np.ascontiguousarray(model.theta), w, y, y0, thr)
    elif fam == "exar":
        last, status = kernels.simulate_exar(
            np.ascontiguousarray(model.theta[0::2]), np.ascontiguousarray(model.theta[1::2]),
            float(desc["gamma"]), w, y, y0, thr)
    elif fam == "tar" and desc.get("g") in kernels.G_CODES:
        lo = np.array([r[0] for r in model.regions])
        hi = np.array([r[1] for r in model.regions])
        last, status = kernels.simulate_tar(np.ascontiguousarray(model.theta), lo, hi,
                                            kernels.G_CODES[desc["g"]], w, y, y0, thr)
    else:
        last, status = _simulate_generic(model, w, y, y0, thr)
    if status == 2:
        raise NumericError(f"{model.name}: non-finite output at step {last}", step=last)
    diverged = status == 1
    return Trajectory(
        values=y[: last + 1].copy(), T=T, arity=model.regressor.arity, model_name=model.name,
        seed=int(seed), noise_family=noise.family, diverged=diverged,
        divergence_time=last if diverged else None, threshold=thr, model_description=desc,
    )


def _simulate_generic(model, w, y, y0, thr):
    n = model.regressor.arity
    theta = model.theta.tolist()
    y[0] = y0
    for t in range(w.size):
        win = np.array([y[t - j] if t - j >= 0 else 0.0 for j in range(n)])
        phi = model.regressor.evaluate_many(win[None, :])[0].tolist()
        acc = 0.0
        for th, f in zip(theta, phi):
            acc = acc + th * f
        if model.offset is not None:
            acc = acc + float(model.offset(win[0]))
        v = acc + w[t]
        y[t + 1] = v
        if v != v:
            return t + 1, 2
        if abs(v) > thr:
            return t + 1, 1
    return w.size, 0


def window(trajectory: Trajectory, t: int, n: int | None = None) -> np.ndarray:
    """``(y[t], y[t-1], ..., y[t-n+1])`` with zeros for negative indices."""
    n = trajectory.arity if n is None else int(n)
    if t < 0 or t > trajectory.last:
        raise OutOfRange(f"t={t} outside recorded range [0, {trajectory.last}]")
    y = trajectory.values
    return np.array([y[t - j] if t - j >= 0 else 0.0 for j in range(n)])


def windows_matrix(values: np.ndarray, n: int, count: int) -> np.ndarray:
    """Rows ``t = 0..count-1`` of newest-first windows, zero padded."""
    W = np.zeros((count, n))
    for j in range(n):
        if count > j:
            W[j:, j] = values[: count - j]
    return W


def visit_indicator(values: np.ndarray, n: int, M: float) -> np.ndarray:
    """``ind[i-1] = 1{||(y[i+n-1], ..., y[i])|| <= M}`` for every fully recorded ``i >= 1``."""
    L = values.size - n  # number of i in [1, last-n+1]
    if L <= 0:
        return np.zeros(0, dtype=np.int64)
    sq = np.zeros(L)
    for k in range(n):
        sq += values[1 + k: 1 + k + L] ** 2
    return (np.sqrt(sq) <= M).astype(np.int64)


def visit_counts(trajectory: Trajectory, M: float, times) -> np.ndarray:
    """``N_t(M)`` at each of ``times``; counts saturate once data run out."""
    ind = visit_indicator(trajectory.values, trajectory.arity, float(M))
    cum = np.concatenate([[0], np.cumsum(ind)])
    t = np.minimum(np.asarray(times, dtype=np.int64), ind.size)
    return cum[t]


def count_recurrence(trajectory: Trajectory, M: float, checkpoints,
                     omega_min_fraction: float = DEFAULT_OMEGA_MIN_FRACTION) -> RecurrenceCounter:
    if not M > 0:
        raise InvalidArgument(f"M must be positive, got {M}")
    cps = [int(c) for c in checkpoints]
    if any(b <= a for a, b in zip(cps, cps[1:])):
        raise InvalidArgument("checkpoints must be strictly increasing")
    if cps and (cps[0] < 1 or cps[-1] > trajectory.T):
        raise InvalidArgument(f"checkpoints must lie in [1, {trajectory.T}]")
    counts = visit_counts(trajectory, M, cps)
    n_final = int(visit_counts(trajectory, M, [trajectory.T])[0])
    return RecurrenceCounter(
        M=float(M), checkpoints=tuple(cps), counts=tuple(int(c) for c in counts),
        omega_proxy=n_final >= omega_min_fraction * trajectory.T,
    )


def write_trajectory(trajectory: Trajectory, path) -> Path:
    """Write ``t,y`` CSV plus a sidecar ``.json`` with seed and model metadata."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "y"])
        for t, v in enumerate(trajectory.values.tolist()):
            wr.writerow([t, repr(v)])
    path.with_suffix(".json").write_text(json.dumps(trajectory.metadata(), indent=2, sort_keys=True) + "\n")
    return path


def read_trajectory(path) -> Trajectory:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    values = np.array([float(r["y"]) for r in rows])
    return Trajectory(
        values=values, T=int(meta["T"]), arity=int(meta["arity"]), model_name=meta["model"],
        seed=int(meta["seed"]), noise_family=meta["noise"], diverged=bool(meta["diverged"]),
        divergence_time=meta["divergence_time"],
        threshold=float(meta.get("divergence_threshold", DEFAULT_DIVERGENCE_THRESHOLD)),
        model_description=meta.get("model_description"),
    )


def log_checkpoints(T: int, count: int = 40, start: int = 10, extra=()) -> list[int]:
    """``count`` log-spaced integer times in ``[start, T]`` merged with ``extra``, T/2 and T."""
    T = int(T)
    start = max(1, min(int(start), T))
    grid = np.unique(np.round(np.geomspace(start, T, num=max(count, 2))).astype(np.int64))
    pts = set(grid.tolist()) | {T, max(1, T // 2)} | {int(e) for e in extra if 1 <= int(e) <= T}
    return sorted(pts)

