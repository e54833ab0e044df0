"""Per-replicate traces and the statistics the experiments are judged on.

Every verdict here is a pure function of the recorded checkpoint series, so
a report rebuilt from exported CSVs reproduces the original one exactly.
"liminf"-type quantities use the minimum over the final five checkpoints.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import InvalidArgument

FINAL_WINDOW = 5


class Recurrence(str, Enum):
    RECURRENT = "Recurrent"
    DIVERGENT = "Divergent"
    INDETERMINATE = "Indeterminate"


@dataclass(eq=False)
class ReplicateTrace:
    replicate: int
    seed: int
    times: np.ndarray
    err2: np.ndarray
    lambda_min: np.ndarray
    lambda_max: np.ndarray
    N_t: np.ndarray
    diverged: bool
    T: int
    M: float
    theta_hat: np.ndarray | None = None
    r_t: np.ndarray | None = None
    divergence_time: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.int64)
        for name in ("err2", "lambda_min", "lambda_max"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        self.N_t = np.asarray(self.N_t, dtype=np.int64)
        k = self.times.size
        if not all(a.size == k for a in (self.err2, self.lambda_min, self.lambda_max, self.N_t)):
            raise InvalidArgument("trace series must share the checkpoint grid")

    def at(self, series: str, t: int):
        idx = np.flatnonzero(self.times == t)
        if idx.size == 0:
            raise InvalidArgument(f"t={t} is not a checkpoint of replicate {self.replicate}")
        return getattr(self, series)[idx[0]]


def ratio_series(trace: ReplicateTrace) -> tuple[np.ndarray, np.ndarray]:
    """``lambda_min / max(N_t, 1)`` and a mask of points where ``N_t = 0`` was clamped."""
    clamped = trace.N_t == 0
    return trace.lambda_min / np.maximum(trace.N_t, 1), clamped


def ratio_floor(trace: ReplicateTrace, last: int = FINAL_WINDOW) -> float:
    return float(ratio_series(trace)[0][-last:].min())


def rate_fit(trace: ReplicateTrace) -> float:
    """Smallest ``c`` with ``err2 <= c log(N_t) / N_t`` at every checkpoint with ``N_t >= 3``.

    NaN when no checkpoint qualifies.
    """
    use = trace.N_t >= 3
    if not use.any():
        return math.nan
    N = trace.N_t[use].astype(np.float64)
    return float(np.max(trace.err2[use] * N / np.log(N)))


def classify_recurrence(trace: ReplicateTrace, M: float | None = None,
                        omega_min_fraction: float = 0.5) -> Recurrence:
    """Finite-sample proxy for whether ``liminf ||Y_t||`` is finite.

    Divergent: the path escaped, or it made no visit to the ``M``-ball
    during ``(T/2, T]``. Recurrent: at least ``omega_min_fraction`` of the
    horizon was spent inside the ball. Otherwise indeterminate.
    """
    if M is not None and float(M) != trace.M:
        raise InvalidArgument(f"trace counted visits with M={trace.M}, not {M}")
    n_T = int(trace.at("N_t", trace.T))
    n_half = int(trace.at("N_t", max(1, trace.T // 2)))
    if trace.diverged or n_T - n_half == 0:
        return Recurrence.DIVERGENT
    if n_T >= omega_min_fraction * trace.T:
        return Recurrence.RECURRENT
    return Recurrence.INDETERMINATE


# --------------------------------------------------------------------------
# criteria
# --------------------------------------------------------------------------


@dataclass
class CriterionResult:
    name: str
    passed: bool
    detail: dict[str, Any] = field(default_factory=dict)


def _need(fraction: float, total: int) -> int:
    return math.ceil(fraction * total - 1e-9)


def consistency_criterion(traces: Sequence[ReplicateTrace], bound_factor: float = 10.0,
                          decrease_fraction: float = 0.9, after: int = 1000) -> CriterionResult:
    """Median final err2 under ``bound_factor * log N_T / N_T`` and a mostly decreasing median curve."""
    times = traces[0].times
    med = np.median(np.stack([tr.err2 for tr in traces]), axis=0)
    n_T = float(np.median([tr.N_t[-1] for tr in traces]))
    bound = bound_factor * math.log(n_T) / n_T if n_T > 1 else math.inf
    idx = np.flatnonzero(times >= after)
    steps = [bool(med[i + 1] < med[i]) for i in idx[:-1]]
    frac = float(np.mean(steps)) if steps else math.nan
    ok_final = bool(med[-1] <= bound)
    ok_dec = bool(steps) and frac >= decrease_fraction
    return CriterionResult("consistency", ok_final and ok_dec, {
        "median_final_err2": float(med[-1]), "median_N_T": n_T, "bound": bound,
        "final_within_bound": ok_final, "decreasing_fraction": frac, "decreasing_pairs": len(steps),
        "required_fraction": decrease_fraction,
    })


def ratio_floor_criterion(traces: Sequence[ReplicateTrace], ref_time: int = 10_000, factor: float = 0.5,
                          min_fraction: float = 0.9, positive_after: int = 1000) -> CriterionResult:
    good = []
    for tr in traces:
        ratios, _ = ratio_series(tr)
        ref = float(ratios[np.flatnonzero(tr.times == ref_time)[0]]) if ref_time in tr.times else math.nan
        floor = float(ratios[-FINAL_WINDOW:].min())
        positive = bool(np.all(ratios[tr.times > positive_after] > 0))
        good.append(bool(floor >= factor * ref) and positive)
    need = _need(min_fraction, len(traces))
    return CriterionResult("ratio_floor", sum(good) >= need,
                           {"passing_replicates": int(sum(good)), "required": need, "ref_time": ref_time})


def lambda_t_criterion(traces: Sequence[ReplicateTrace], tolerance: float = 0.2,
                       min_fraction: float = 0.9) -> CriterionResult:
    good = []
    for tr in traces:
        half = max(1, tr.T // 2)
        full_rate = tr.at("lambda_min", tr.T) / tr.T
        half_rate = tr.at("lambda_min", half) / half
        good.append(bool(abs(full_rate - half_rate) <= tolerance * half_rate))
    need = _need(min_fraction, len(traces))
    return CriterionResult("lambda_t_floor", sum(good) >= need,
                           {"passing_replicates": int(sum(good)), "required": need})


def recurrence_criterion(traces: Sequence[ReplicateTrace], expected: str, min_fraction: float = 0.9,
                         omega_min_fraction: float = 0.5) -> CriterionResult:
    expected = Recurrence(expected)
    good = 0
    for tr in traces:
        cls = classify_recurrence(tr, omega_min_fraction=omega_min_fraction)
        ok = cls is expected
        if ok and expected is Recurrence.DIVERGENT:
            ok = int(tr.at("N_t", tr.T)) == int(tr.at("N_t", max(1, tr.T // 2)))
        good += ok
    need = _need(min_fraction, len(traces))
    return CriterionResult("recurrence", good >= need,
                           {"expected": expected.value, "matching_replicates": good, "required": need})


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------


@dataclass
class DiagnosticsReport:
    config_digest: str
    replicates: list[dict]
    aggregate: dict
    criteria: list[CriterionResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def to_dict(self) -> dict:
        return _clean({
            "config_digest": self.config_digest,
            "replicates": self.replicates,
            "aggregate": self.aggregate,
            "criteria": [asdict(c) for c in self.criteria],
            "passed": self.passed,
        })

    def write(self, out_dir) -> None:
        out_dir = Path(out_dir)
        (out_dir / "report.json").write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        with (out_dir / "summary.csv").open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["replicate", "final_err2", "ratio_floor", "rate_c", "recurrence"])
            for row in self.replicates:
                wr.writerow([row["replicate"], repr(row["final_err2"]), repr(row["ratio_floor"]),
                             repr(row["rate_c"]), row["recurrence"]])


def _clean(obj):
    """JSON-safe copy: non-finite floats become None, numpy scalars become Python ones."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Enum):
        return obj.value
    return obj


def aggregate(traces: Sequence[ReplicateTrace], config) -> DiagnosticsReport:
    """Summaries and criterion verdicts for a replicate set.

    ``config`` provides ``expect`` (criterion switches and thresholds),
    ``omega_min_fraction`` and ``digest()``.
    """
    if not traces:
        raise InvalidArgument("need at least one replicate trace")
    omega = getattr(config, "omega_min_fraction", 0.5)
    expect = dict(getattr(config, "expect", {}) or {})
    rows = []
    for tr in traces:
        rows.append({
            "replicate": tr.replicate,
            "seed": tr.seed,
            "final_err2": float(tr.err2[-1]),
            "ratio_floor": ratio_floor(tr),
            "rate_c": rate_fit(tr),
            "recurrence": classify_recurrence(tr, omega_min_fraction=omega).value,
            "N_T": int(tr.N_t[-1]),
            "diverged": tr.diverged,
        })
    rate_cs = np.array([r["rate_c"] for r in rows])
    counts = {c.value: sum(r["recurrence"] == c.value for r in rows) for c in Recurrence}
    agg = {
        "replicates": len(traces),
        "median_final_err2": float(np.median([r["final_err2"] for r in rows])),
        "median_N_T": float(np.median([r["N_T"] for r in rows])),
        "median_ratio_floor": float(np.median([r["ratio_floor"] for r in rows])),
        "median_rate_c": float(np.nanmedian(rate_cs)) if np.isfinite(rate_cs).any() else math.nan,
        "max_rate_c": float(np.nanmax(rate_cs)) if np.isfinite(rate_cs).any() else math.nan,
        "recurrence_counts": counts,
    }
    frac = expect.get("replicate_fraction", 0.9)
    criteria = []
    if expect.get("consistency"):
        criteria.append(consistency_criterion(
            traces, expect.get("bound_factor", 10.0), expect.get("decrease_fraction", 0.9),
            expect.get("decrease_after", 1000)))
    if expect.get("ratio_floor"):
        criteria.append(ratio_floor_criterion(
            traces, expect.get("ratio_ref_time", 10_000), expect.get("ratio_factor", 0.5), frac,
            expect.get("decrease_after", 1000)))
    if expect.get("lambda_t_floor"):
        criteria.append(lambda_t_criterion(traces, expect.get("lambda_t_tolerance", 0.2), frac))
    if expect.get("recurrence"):
        criteria.append(recurrence_criterion(traces, expect["recurrence"], frac, omega))
    digest = config.digest() if hasattr(config, "digest") else ""
    return DiagnosticsReport(digest, rows, agg, criteria)


# --------------------------------------------------------------------------
# CSV round trip
# --------------------------------------------------------------------------


def write_trace(trace: ReplicateTrace, path) -> Path:
    """``t,theta_hat_0..,err2,lambda_min,lambda_max,r_t,N_t`` plus a sidecar JSON."""
    path = Path(path)
    m = 0 if trace.theta_hat is None else trace.theta_hat.shape[1]
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t"] + [f"theta_hat_{i}" for i in range(m)] + ["err2", "lambda_min", "lambda_max", "r_t", "N_t"])
        for k, t in enumerate(trace.times.tolist()):
            th = [] if m == 0 else [repr(v) for v in trace.theta_hat[k].tolist()]
            rt = repr(float(trace.r_t[k])) if trace.r_t is not None else ""
            wr.writerow([t] + th + [repr(float(trace.err2[k])), repr(float(trace.lambda_min[k])),
                                    repr(float(trace.lambda_max[k])), rt, int(trace.N_t[k])])
    meta = dict(trace.meta)
    meta.update({"replicate": trace.replicate, "seed": trace.seed, "diverged": trace.diverged,
                 "divergence_time": trace.divergence_time, "T": trace.T, "M": trace.M})
    path.with_suffix(".json").write_text(json.dumps(_clean(meta), indent=2, sort_keys=True) + "\n")
    return path


def read_trace(path) -> ReplicateTrace:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        cols = reader.fieldnames or []
    th_cols = [c for c in cols if c.startswith("theta_hat_")]
    theta = np.array([[float(r[c]) for c in th_cols] for r in rows]) if th_cols else None
    r_t = np.array([float(r["r_t"]) for r in rows]) if rows and rows[0]["r_t"] != "" else None
    extra = {k: v for k, v in meta.items()
             if k not in {"replicate", "seed", "diverged", "divergence_time", "T", "M"}}
    return ReplicateTrace(
        replicate=int(meta["replicate"]), seed=int(meta["seed"]),
        times=[int(r["t"]) for r in rows], err2=[float(r["err2"]) for r in rows],
        lambda_min=[float(r["lambda_min"]) for r in rows], lambda_max=[float(r["lambda_max"]) for r in rows],
        N_t=[int(r["N_t"]) for r in rows], diverged=bool(meta["diverged"]), T=int(meta["T"]),
        M=float(meta["M"]), theta_hat=theta, r_t=r_t, divergence_time=meta.get("divergence_time"), meta=extra,
    )
