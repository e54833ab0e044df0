"""Replicate orchestration: simulate, estimate and summarise each seed.

Replicate ``r`` uses seed ``mix_seed(base, r)``. Replicates run on a bounded
thread pool (the compiled kernels release the GIL); results are collected
in replicate order so outputs never depend on scheduling.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .diagnostics import ReplicateTrace
from .errors import CertificationFailure
from .estimator import run_estimator
from .excitation import Domain, box_count, certify_delta_star, jordan_boundary_check
from .rng import mix_seed
from .simulator import Trajectory, simulate, visit_counts


@dataclass
class ReplicateResult:
    trajectory: Trajectory
    trace: ReplicateTrace


def worker_count(cfg: ExperimentConfig) -> int:
    n = cfg.workers or os.cpu_count() or 1
    cap = os.environ.get("NLAR_LSE_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, min(n, cfg.replicates))


def simulate_replicate(cfg: ExperimentConfig, r: int, model=None, noise=None) -> Trajectory:
    model = model or cfg.build_model()
    noise = noise or cfg.build_noise()
    return simulate(model, noise, cfg.T, mix_seed(cfg.seed, r), cfg.divergence_threshold, cfg.y0)


def estimate_replicate(cfg: ExperimentConfig, r: int, traj: Trajectory, model=None) -> ReplicateTrace:
    model = model or cfg.build_model()
    times = cfg.checkpoint_times()
    c_phi = cfg.C_phi if cfg.truncate else None
    run = run_estimator(model.regressor, traj, times, C_phi=c_phi, theta_0=cfg.theta_0, noise=cfg.noise["family"])
    diff = run.theta_hat - model.theta
    return ReplicateTrace(
        replicate=r, seed=traj.seed, times=times, err2=np.sum(diff * diff, axis=1),
        lambda_min=run.eigs.lambda_min, lambda_max=run.eigs.lambda_max,
        N_t=visit_counts(traj, cfg.M, times), diverged=traj.diverged, T=cfg.T, M=cfg.M,
        theta_hat=run.theta_hat, r_t=run.r_t, divergence_time=traj.divergence_time,
        meta={"model": model.name, "C_phi": c_phi, "noise": cfg.noise["family"]},
    )


def run_replicate(cfg: ExperimentConfig, r: int, model=None, noise=None) -> ReplicateResult:
    model = model or cfg.build_model()
    traj = simulate_replicate(cfg, r, model, noise)
    return ReplicateResult(traj, estimate_replicate(cfg, r, traj, model))


def run_replicates(cfg: ExperimentConfig, estimate: bool = True) -> list:
    """All replicates in order; each entry is a ReplicateResult or, without ``estimate``, a Trajectory."""
    model = cfg.build_model()
    noise = cfg.build_noise()
    job = run_replicate if estimate else simulate_replicate
    workers = worker_count(cfg)
    if workers == 1:
        return [job(cfg, r, model, noise) for r in range(cfg.replicates)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(job, cfg, r, model, noise) for r in range(cfg.replicates)]
        return [f.result() for f in futures]


def certify(cfg: ExperimentConfig) -> dict:
    """Excitation certificate for the configured model.

    On failure ``delta_star`` is None and the remaining fields describe the
    smallest grid level, which gave the largest infimum.
    """
    ex = cfg.excitation
    if ex is None:
        raise ValueError("config has no excitation block")
    model = cfg.build_model()
    rmap = model.regressor
    E = Domain.box(ex["E"])
    seed = cfg.seed if ex["seed"] is None else ex["seed"]
    budget = {k: ex[k] for k in ("samples", "coarse_samples", "polish_iters")}
    try:
        ds = certify_delta_star(rmap, E, ex["delta_grid"], ex["min_measure"], budget, seed)
        certified = True
    except CertificationFailure as exc:
        ds = exc.best
        certified = False
    x = np.asarray(ds.infimum_direction)
    n = rmap.arity
    boxes = []
    for r in ex["box_r"]:
        res = box_count(rmap, x, ds.delta_star, ex["box"], r, ex["probes_per_box"])
        boxes.append({"r": r, "K": res.count, "ratio": res.ratio})
    jordan = jordan_boundary_check(rmap, E, x, ds.delta_star, ex["jordan_r"], ex["probes_per_box"])
    return {
        "model": cfg.model,
        "E": ex["E"],
        "delta_star": ds.delta_star if certified else None,
        "certified": certified,
        "min_measure": ex["min_measure"],
        "evaluated_delta": ds.delta_star,
        "infimum_value": ds.infimum_value,
        "infimum_direction": x.tolist(),
        "scanned": [{"delta": d, "infimum": v} for d, v in ds.scanned],
        "box_ratios": boxes,
        "box_exponent": n - 1,
        "jordan_series": [None if math.isnan(v) else v for v in jordan.tolist()],
        "seeds": {"base": seed, "points": mix_seed(seed, 0), "directions": mix_seed(seed, 1)},
    }
