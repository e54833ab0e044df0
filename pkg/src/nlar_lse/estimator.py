"""Recursive least squares with Gram-matrix and eigenvalue tracking.

The recursion starts from ``P = I`` and, for each regressor ``phi`` and next
output ``y``::

    P'     = P - P phi phi' P / (1 + phi' P phi)
    theta' = theta + P' phi (y - phi' theta)

``P' phi`` is formed as ``P phi / (1 + phi' P phi)``, the same vector by the
matrix inversion lemma. The information matrix ``gram = I + sum phi phi'``
is accumulated alongside ``P`` and all eigenvalues are taken from it.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import kernels
from .errors import ContractViolation, InvalidArgument, NumericError
from .models import RegressorMap
from .simulator import Trajectory, window, windows_matrix

log = logging.getLogger(__name__)

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
INVERSE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class EstimatorState:
    theta_hat: np.ndarray
    P: np.ndarray
    gram: np.ndarray
    t: int
    r_t: float
    theta_0: np.ndarray
    C_phi: float | None = None
    noise_family: str | None = None

    @property
    def m(self) -> int:
        return self.theta_hat.size

    def copy(self) -> "EstimatorState":
        return replace(self, theta_hat=self.theta_hat.copy(), P=self.P.copy(), gram=self.gram.copy())


@dataclass
class EigenTrack:
    times: list[int] = field(default_factory=list)
    lambda_min: list[float] = field(default_factory=list)
    lambda_max: list[float] = field(default_factory=list)


def rls_init(theta_0, C_phi: float | None = None, noise=None) -> EstimatorState:
    """Fresh state: ``theta_hat = theta_0``, ``P = gram = I``, ``r_t = 1``.

    ``noise`` (a NoiseSpec or family name) declares the noise law the data
    come from; :func:`posterior` requires it to be standard normal.
    """
    theta_0 = np.array(theta_0, dtype=np.float64).reshape(-1)
    if theta_0.size == 0 or not np.all(np.isfinite(theta_0)):
        raise InvalidArgument("theta_0 must be a non-empty finite vector")
    if C_phi is not None and not C_phi > 0:
        raise InvalidArgument(f"C_phi must be positive, got {C_phi}")
    m = theta_0.size
    fam = getattr(noise, "family", noise)
    return EstimatorState(theta_0.copy(), np.eye(m), np.eye(m), 0, 1.0, theta_0.copy(),
                          None if C_phi is None else float(C_phi), fam)


def rls_run(state: EstimatorState, phis, ys, in_place: bool = False) -> EstimatorState:
    """Apply the recursion to every ``(phis[k], ys[k])`` pair in order."""
    phis = np.ascontiguousarray(phis, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64).reshape(-1)
    if phis.ndim != 2 or phis.shape[1] != state.m or phis.shape[0] != ys.size:
        raise InvalidArgument(f"need phis of shape (k, {state.m}) and k targets")
    if not in_place:
        state = state.copy()
    if ys.size == 0:
        return state
    sumsq, bad = kernels.rls_update(phis, ys, state.theta_hat, state.P, state.gram, np.empty(state.m))
    if bad >= 0:
        raise NumericError(f"non-finite estimator state at step {state.t + bad}", step=state.t + bad)
    return replace(state, t=state.t + ys.size, r_t=state.r_t + sumsq)


def rls_step(state: EstimatorState, phi_t, y_next: float) -> EstimatorState:
    phi_t = np.asarray(phi_t, dtype=np.float64).reshape(1, -1)
    if not (np.all(np.isfinite(phi_t)) and math.isfinite(y_next)):
        raise NumericError(f"non-finite input at step {state.t}", step=state.t)
    return rls_run(state, phi_t, [y_next])


def truncated_regressor(rmap: RegressorMap, traj: Trajectory, t: int, C_phi: float) -> np.ndarray:
    """``phi(y[t], ..., y[t-n+1])`` if that window has norm <= C_phi, else zeros."""
    if not C_phi > 0:
        raise InvalidArgument(f"C_phi must be positive, got {C_phi}")
    w = window(traj, t, rmap.arity)
    if np.linalg.norm(w) <= C_phi:
        return rmap(w)
    return np.zeros(rmap.dim)


def regressor_matrix(rmap: RegressorMap, values: np.ndarray, count: int, C_phi: float | None = None) -> np.ndarray:
    """Regressors for ``t = 0..count-1``; rows whose window norm exceeds ``C_phi`` are zero."""
    W = windows_matrix(values, rmap.arity, count)
    if C_phi is None or math.isinf(C_phi):
        keep = np.ones(count, dtype=bool)
    else:
        keep = np.sqrt(np.sum(W * W, axis=1)) <= C_phi
    Phi = np.zeros((count, rmap.dim))
    if keep.any():
        Phi[keep] = rmap.evaluate_many(W[keep])
    bad = ~np.isfinite(Phi).all(axis=1)
    if bad.any():
        t = int(np.flatnonzero(bad)[0])
        raise NumericError(f"{rmap.name}: non-finite regressor at t={t}", step=t)
    return Phi


def batch_ls(regressors, targets, theta_0) -> np.ndarray:
    """Solve ``(I + sum phi phi') theta = theta_0 + sum phi y`` directly (Cholesky)."""
    theta_0 = np.asarray(theta_0, dtype=np.float64).reshape(-1)
    m = theta_0.size
    Phi = np.asarray(regressors, dtype=np.float64).reshape(-1, m) if len(regressors) else np.zeros((0, m))
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if Phi.shape[0] != y.size:
        raise InvalidArgument(f"{Phi.shape[0]} regressors but {y.size} targets")
    A = np.eye(m) + Phi.T @ Phi
    b = theta_0 + Phi.T @ y
    return cho_solve(cho_factor(A), b)


def symmetric_eigenvalues(A) -> np.ndarray:
    """All eigenvalues of symmetric ``A`` by cyclic Jacobi rotations, ascending."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgument("matrix must be square")
    eig, sweeps = kernels.jacobi_eigenvalues(A, JACOBI_TOL, JACOBI_MAX_SWEEPS)
    if sweeps < 0:
        raise NumericError(f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps")
    return np.sort(eig)


def gram_eigs(state: EstimatorState) -> tuple[float, float]:
    eig = symmetric_eigenvalues(state.gram)
    lmin, lmax = float(eig[0]), float(eig[-1])
    if lmin < 1.0 - 1e-9:
        raise NumericError(f"lambda_min(gram) = {lmin} < 1 at t={state.t}", step=state.t)
    return lmin, lmax


def inverse_residual(state: EstimatorState) -> float:
    """``||P gram - I||_inf / ||gram||_inf``."""
    R = state.P @ state.gram - np.eye(state.m)
    return float(np.abs(R).sum(axis=1).max() / np.abs(state.gram).sum(axis=1).max())


def posterior(state: EstimatorState) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian posterior ``N(theta_hat, P)`` under prior ``N(theta_0, I)`` and N(0,1) noise."""
    if state.noise_family != "standard_normal":
        raise ContractViolation(
            f"posterior needs standard normal noise, state declares {state.noise_family!r}")
    return state.theta_hat.copy(), state.P.copy()


@dataclass(frozen=True)
class ErrorMetrics:
    err2: float
    bound_ratio: float


def error_metrics(theta_hat, theta_true, lambda_min: float, lambda_max: float) -> ErrorMetrics:
    """Squared error and its ratio to ``log(lambda_max) / lambda_min`` (log clamped at 1)."""
    if lambda_min < 1.0 - 1e-9:
        raise InvalidArgument(f"lambda_min must be >= 1, got {lambda_min}")
    d = np.asarray(theta_hat, dtype=np.float64) - np.asarray(theta_true, dtype=np.float64)
    err2 = float(d @ d)
    return ErrorMetrics(err2, err2 * lambda_min / math.log(max(lambda_max, math.e)))


@dataclass
class EstimationRun:
    """Checkpoint snapshots of one estimator pass over a trajectory."""

    state: EstimatorState
    eigs: EigenTrack
    theta_hat: np.ndarray
    r_t: np.ndarray
    trace_gram: np.ndarray
    inverse_residual: np.ndarray


def run_estimator(rmap: RegressorMap, traj: Trajectory, checkpoints, C_phi: float | None = None,
                  theta_0=None, noise=None) -> EstimationRun:
    """Run the (optionally truncated) recursion along ``traj`` and snapshot at ``checkpoints``.

    A checkpoint ``t`` records the state after ``min(t, available)`` updates,
    so snapshots freeze once a diverged path runs out of data.
    """
    steps = traj.last
    if theta_0 is None:
        theta_0 = np.zeros(rmap.dim)
    state = rls_init(theta_0, C_phi, noise)
    Phi = regressor_matrix(rmap, traj.values, steps, C_phi)
    ys = traj.values[1: steps + 1]
    eigs = EigenTrack()
    thetas, rts, traces, resid = [], [], [], []
    done = 0
    for c in checkpoints:
        s = min(int(c), steps)
        if s > done:
            state = rls_run(state, Phi[done:s], ys[done:s], in_place=True)
            done = s
        lmin, lmax = gram_eigs(state)
        eigs.times.append(int(c))
        eigs.lambda_min.append(lmin)
        eigs.lambda_max.append(lmax)
        thetas.append(state.theta_hat.copy())
        rts.append(state.r_t)
        traces.append(float(np.trace(state.gram)))
        res = inverse_residual(state)
        if res > INVERSE_TOL:
            log.warning("P*gram deviates from I by %.3g (relative) at t=%d", res, c)
        resid.append(res)
    return EstimationRun(state, eigs, np.array(thetas).reshape(-1, rmap.dim), np.array(rts),
                         np.array(traces), np.array(resid))
