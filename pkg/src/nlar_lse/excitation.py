"""Numerical certificates for the excitation geometry of a regressor map.

All measures are plain Monte Carlo over uniform samples with binomial error
bars. Box counts probe each cell of an ``r**n`` grid on a shared lattice
(``k`` sub-intervals per cell edge, corners included) and call a cell
*touched* when the probed values of ``h`` straddle zero, ``min h <= 0 <= max h``.
Equality counts as touching, so a level point on a cell face marks both
neighbours.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import CertificationFailure, InvalidArgument, ResourceError
from .models import RegressorMap
from .rng import make_generator, mix_seed

Z95 = 1.959963984540054
MAX_LATTICE_POINTS = 1 << 23
DEFAULT_SUBDIVISIONS = 4


@dataclass(frozen=True)
class Domain:
    """Finite union of axis-aligned boxes with disjoint interiors."""

    boxes: tuple[tuple[tuple[float, float], ...], ...]
    label: str = "E"

    def __post_init__(self):
        if not self.boxes:
            raise InvalidArgument("domain needs at least one box")
        n = len(self.boxes[0])
        for box in self.boxes:
            if len(box) != n:
                raise InvalidArgument("all boxes must share a dimension")
            for a, b in box:
                if not (math.isfinite(a) and math.isfinite(b) and a < b):
                    raise InvalidArgument(f"box side [{a}, {b}] must satisfy a < b")

    @classmethod
    def box(cls, sides: Sequence[Sequence[float]], label: str = "E") -> "Domain":
        return cls((tuple((float(a), float(b)) for a, b in sides),), label)

    @classmethod
    def from_json(cls, obj) -> "Domain":
        """Accepts ``[[a1, b1], ...]`` (one box) or ``[[[a1, b1], ...], ...]`` (union)."""
        arr = obj
        if arr and isinstance(arr[0][0], (int, float)):
            return cls.box(arr)
        return cls(tuple(tuple((float(a), float(b)) for a, b in box) for box in arr))

    def to_json(self):
        if len(self.boxes) == 1:
            return [list(s) for s in self.boxes[0]]
        return [[list(s) for s in box] for box in self.boxes]

    @property
    def dim(self) -> int:
        return len(self.boxes[0])

    @property
    def box_volumes(self) -> np.ndarray:
        return np.array([math.prod(b - a for a, b in box) for box in self.boxes])

    @property
    def volume(self) -> float:
        return float(self.box_volumes.sum())

    @property
    def bounding_box(self) -> tuple[tuple[float, float], ...]:
        return tuple((min(box[i][0] for box in self.boxes), max(box[i][1] for box in self.boxes))
                     for i in range(self.dim))

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        vols = self.box_volumes
        if len(self.boxes) == 1:
            which = np.zeros(size, dtype=np.int64)
        else:
            which = np.minimum(np.searchsorted(np.cumsum(vols) / vols.sum(), gen.random(size), side="right"),
                               len(vols) - 1)
        lo = np.array([[a for a, _ in box] for box in self.boxes])
        hi = np.array([[b for _, b in box] for box in self.boxes])
        u = gen.random((size, self.dim))
        return lo[which] + (hi[which] - lo[which]) * u

    def contains_closed(self, pts: np.ndarray) -> np.ndarray:
        inside = np.zeros(pts.shape[0], dtype=bool)
        for box in self.boxes:
            lo = np.array([a for a, _ in box])
            hi = np.array([b for _, b in box])
            inside |= np.all((pts >= lo) & (pts <= hi), axis=1)
        return inside


@dataclass(frozen=True)
class ExcitationEstimate:
    direction: np.ndarray
    delta: float
    samples: int
    hits: int
    measure: float
    half_width: float


@dataclass(frozen=True)
class BoxCountResult:
    box: tuple[tuple[float, float], ...]
    r: int
    direction: np.ndarray
    delta: float
    count: int
    ratio: float
    probes_per_box: int


@dataclass(frozen=True)
class ShearVolumeResult:
    estimate: float
    exact: float
    std: float
    samples: int
    hits: int
    bounding_box: tuple[tuple[float, float], ...] = field(repr=False)

    @property
    def z_score(self) -> float:
        if self.std > 0:
            return (self.estimate - self.exact) / self.std
        # all or no samples hit: the estimate is exact up to rounding of vol(B)
        return 0.0 if math.isclose(self.estimate, self.exact, rel_tol=1e-12, abs_tol=1e-300) else math.inf

    @property
    def within_3sd(self) -> bool:
        return abs(self.z_score) <= 3.0


def _unit(x, m, tol=1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != m:
        raise InvalidArgument(f"direction has length {x.size}, map dim is {m}")
    if abs(np.linalg.norm(x) - 1.0) > tol:
        raise InvalidArgument(f"direction must be a unit vector, |x| = {np.linalg.norm(x)}")
    return x


def _rmap(obj) -> RegressorMap:
    return getattr(obj, "regressor", obj)


def _as_box(O) -> tuple[tuple[float, float], ...]:
    if isinstance(O, Domain):
        if len(O.boxes) != 1:
            raise InvalidArgument("expected a single box")
        return O.boxes[0]
    box = tuple((float(a), float(b)) for a, b in O)
    for a, b in box:
        if not a < b:
            raise InvalidArgument(f"box side [{a}, {b}] must satisfy a < b")
    return box


class _PairedSample:
    """Uniform points in ``E`` with their regressors, reused across directions."""

    def __init__(self, rmap: RegressorMap, E: Domain, samples: int, seed: int):
        if E.dim != rmap.arity:
            raise InvalidArgument(f"domain dimension {E.dim} != map arity {rmap.arity}")
        self.volume = E.volume
        self.samples = int(samples)
        self.phi = rmap.evaluate_many(E.sample(make_generator(seed), self.samples))

    def hits(self, X: np.ndarray, delta: float, chunk: int = 256) -> np.ndarray:
        """Hit counts of ``|phi . x| > delta`` for every row ``x`` of ``X``."""
        X = np.atleast_2d(X)
        out = np.empty(X.shape[0], dtype=np.int64)
        for s in range(0, X.shape[0], chunk):
            out[s:s + chunk] = np.count_nonzero(np.abs(self.phi @ X[s:s + chunk].T) > delta, axis=0)
        return out

    def measure(self, X, delta) -> np.ndarray:
        return self.volume * self.hits(X, delta) / self.samples


def measure_excitation(rmap: RegressorMap, E: Domain, x, delta: float, samples: int = 100_000,
                       seed: int = 0) -> ExcitationEstimate:
    """Monte Carlo estimate of the volume of ``{y in E : |phi(y) . x| > delta}``."""
    rmap = _rmap(rmap)
    if samples < 1000:
        raise InvalidArgument(f"need at least 1000 samples, got {samples}")
    x = _unit(x, rmap.dim)
    ps = _PairedSample(rmap, E, samples, seed)
    hits = int(ps.hits(x[None, :], delta)[0])
    p = hits / ps.samples
    return ExcitationEstimate(x, float(delta), ps.samples, hits, ps.volume * p,
                              Z95 * ps.volume * math.sqrt(p * (1.0 - p) / ps.samples))


def _sphere_infimum(ps: _PairedSample, m: int, delta: float, coarse_samples: int, polish_iters: int,
                    seed: int, candidates: int = 5):
    gen = make_generator(seed)
    D = gen.standard_normal((coarse_samples, m))
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    vals = ps.measure(D, delta)
    order = np.argsort(vals, kind="stable")[:min(candidates, coarse_samples)]
    best_x, best_v = D[order[0]].copy(), float(vals[order[0]])
    evals = coarse_samples
    for idx in order:
        x, v = D[idx].copy(), float(vals[idx])
        radius, stale = 0.5, 0
        for _ in range(polish_iters):
            if v == 0.0 or m == 1:
                break
            cand = x.copy()
            cand[gen.integers(m)] += radius * gen.standard_normal()
            nrm = np.linalg.norm(cand)
            if nrm == 0.0:
                continue
            cand /= nrm
            cv = float(ps.measure(cand[None, :], delta)[0])
            evals += 1
            if cv < v:
                x, v, stale = cand, cv, 0
            else:
                stale += 1
                if stale >= 25:
                    radius, stale = radius / 2.0, 0
        if v < best_v:
            best_x, best_v = x, v
    return best_x, best_v, evals


def sphere_infimum(rmap: RegressorMap, E: Domain, delta: float, coarse_samples: int = 512,
                   polish_iters: int = 200, seed: int = 0, samples: int = 20_000):
    """Approximate ``min over unit x`` of the excitation measure at ``delta``.

    Random directions (normalised Gaussians) are scored on one shared point
    sample; the five best are refined by random single-coordinate moves whose
    radius halves after 25 consecutive non-improving trials.
    Returns ``(direction, value)``.
    """
    rmap = _rmap(rmap)
    if coarse_samples < 100:
        raise InvalidArgument(f"coarse_samples must be >= 100, got {coarse_samples}")
    ps = _PairedSample(rmap, E, samples, mix_seed(seed, 0))
    x, v, _ = _sphere_infimum(ps, rmap.dim, delta, coarse_samples, polish_iters, mix_seed(seed, 1))
    return x, v


@dataclass(frozen=True)
class DeltaStar:
    delta_star: float
    infimum_value: float
    infimum_direction: np.ndarray
    scanned: tuple[tuple[float, float], ...]


DEFAULT_BUDGET = {"samples": 20_000, "coarse_samples": 512, "polish_iters": 200}


def certify_delta_star(rmap: RegressorMap, E: Domain, delta_grid, min_measure: float,
                       budget: dict | None = None, seed: int = 0) -> DeltaStar:
    """Like :func:`choose_delta_star` but also reports the worst direction found."""
    rmap = _rmap(rmap)
    grid = [float(d) for d in delta_grid]
    if not grid:
        raise InvalidArgument("delta_grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidArgument("delta_grid must be sorted ascending")
    if any(d <= 0 for d in grid):
        raise InvalidArgument("delta_grid must be positive")
    b = dict(DEFAULT_BUDGET, **(budget or {}))
    if min_measure > E.volume:
        raise CertificationFailure(f"min_measure {min_measure} exceeds vol(E) = {E.volume}")
    ps = _PairedSample(rmap, E, b["samples"], mix_seed(seed, 0))
    scanned = []
    for delta in reversed(grid):
        x, v, _ = _sphere_infimum(ps, rmap.dim, delta, b["coarse_samples"], b["polish_iters"], mix_seed(seed, 1))
        scanned.append((delta, v))
        if v >= min_measure:
            return DeltaStar(delta, v, x, tuple(scanned))
    exc = CertificationFailure(
        f"no delta in {grid} reaches infimum measure {min_measure}; best was {max(v for _, v in scanned)}")
    # the smallest delta gives the largest infimum; keep it for reporting
    exc.best = DeltaStar(grid[0], scanned[-1][1], x, tuple(scanned))
    raise exc


def choose_delta_star(rmap: RegressorMap, E: Domain, delta_grid, min_measure: float,
                      budget: dict | None = None, seed: int = 0) -> float:
    """Largest grid ``delta`` whose sphere infimum reaches ``min_measure``."""
    return certify_delta_star(rmap, E, delta_grid, min_measure, budget, seed).delta_star


# --------------------------------------------------------------------------
# box counting
# --------------------------------------------------------------------------


def _subdivisions(probes_per_box, n) -> int:
    if probes_per_box is None:
        return DEFAULT_SUBDIVISIONS
    if probes_per_box < 2 ** n:
        raise InvalidArgument(f"probes_per_box must be >= 2**n = {2 ** n}")
    return max(1, math.ceil(probes_per_box ** (1.0 / n) - 1e-9) - 1)


def _lattice(box, r, k, max_points):
    n = len(box)
    N = k * r + 1
    if N ** n > max_points:
        raise ResourceError(f"{N ** n} lattice points exceed the cap of {max_points}")
    frac = np.arange(N) / (k * r)
    axes = [a + (b - a) * frac for a, b in box]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n), (N,) * n


def _touched(h: np.ndarray, k: int, r: int) -> np.ndarray:
    """Boolean ``(r,)*n`` array of cells whose probe values straddle zero.

    ``h`` holds lattice values; NaN marks probes to ignore.
    """
    lo = np.where(np.isnan(h), np.inf, h)
    hi = np.where(np.isnan(h), -np.inf, h)
    for axis in range(h.ndim):
        lo = sliding_window_view(lo, k + 1, axis=axis)[(slice(None),) * axis + (slice(None, None, k),)].min(axis=-1)
        hi = sliding_window_view(hi, k + 1, axis=axis)[(slice(None),) * axis + (slice(None, None, k),)].max(axis=-1)
    return (lo <= 0.0) & (hi >= 0.0)


def box_count(rmap: RegressorMap, x, delta: float, O, r: int, probes_per_box: int | None = None,
              max_points: int = MAX_LATTICE_POINTS) -> BoxCountResult:
    """Count grid cells of ``O`` meeting the boundary of ``{y : phi(y) . x > delta}``."""
    rmap = _rmap(rmap)
    box = _as_box(O)
    n = rmap.arity
    if len(box) != n:
        raise InvalidArgument(f"box dimension {len(box)} != map arity {n}")
    if r < 2:
        raise InvalidArgument(f"r must be >= 2, got {r}")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != rmap.dim or not np.any(x):
        raise InvalidArgument("direction must be a non-zero vector of the map's dimension")
    k = _subdivisions(probes_per_box, n)
    pts, shape = _lattice(box, r, k, max_points)
    h = (rmap.evaluate_many(pts) @ x - float(delta)).reshape(shape)
    K = int(np.count_nonzero(_touched(h, k, r)))
    return BoxCountResult(box, int(r), x, float(delta), K, K / r ** (n - 1), (k + 1) ** n)


def jordan_boundary_check(rmap: RegressorMap, E: Domain, x, delta: float, r_sequence,
                          probes_per_box: int | None = None,
                          max_points: int = MAX_LATTICE_POINTS) -> np.ndarray:
    """Grid-cover volume of ``{y in closure(E) : |phi(y) . x| = delta}`` for each ``r``.

    The cover is taken on the bounding box ``O`` of ``E``: each touched cell
    contributes ``vol(O) / r**n``. A Jordan-null level set gives a series
    tending to zero.
    """
    rmap = _rmap(rmap)
    rs = [int(r) for r in r_sequence]
    if any(b <= a for a, b in zip(rs, rs[1:])):
        raise InvalidArgument("r_sequence must be increasing")
    x = _unit(x, rmap.dim)
    box = E.bounding_box
    n = E.dim
    vol = math.prod(b - a for a, b in box)
    k = _subdivisions(probes_per_box, n)
    out = []
    for r in rs:
        if r < 2:
            raise InvalidArgument(f"r must be >= 2, got {r}")
        pts, shape = _lattice(box, r, k, max_points)
        h = np.abs(rmap.evaluate_many(pts) @ x) - float(delta)
        h[~E.contains_closed(pts)] = np.nan
        K = int(np.count_nonzero(_touched(h.reshape(shape), k, r)))
        out.append(K * vol / r ** n)
    return np.array(out)


# --------------------------------------------------------------------------
# shear map
# --------------------------------------------------------------------------


def _dot_range(x, lo, hi):
    a, b = x * lo, x * hi
    return float(np.minimum(a, b).sum()), float(np.maximum(a, b).sum())


def shear_preimage_bounds(rmap: RegressorMap, x, y, O) -> tuple[tuple[float, float], ...]:
    """Interval enclosure of ``{s : g(s, y, x) in O}``, newest coordinate first.

    ``g`` runs ``d[k] = s[k] + x . phi(d[k-1], ..., d[k-n])`` for
    ``k = n+1..2n`` from the known history ``y = (d[n], ..., d[1])``.
    """
    rmap = _rmap(rmap)
    n = rmap.arity
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    box = _as_box(O)
    if y.size != n or len(box) != n or x.size != rmap.dim:
        raise InvalidArgument("y and O must have the map's arity and x its dimension")
    # chronological intervals for d[1..2n]; index 0 unused
    d_lo = [0.0] + y[::-1].tolist() + [box[2 * n - j][0] for j in range(n + 1, 2 * n + 1)]
    d_hi = [0.0] + y[::-1].tolist() + [box[2 * n - j][1] for j in range(n + 1, 2 * n + 1)]
    s_bounds = {}
    for k in range(n + 1, 2 * n + 1):
        wlo = np.array([d_lo[k - i] for i in range(1, n + 1)])
        whi = np.array([d_hi[k - i] for i in range(1, n + 1)])
        plo, phi_hi = rmap.bounds(wlo, whi)
        slo, shi = _dot_range(x, plo, phi_hi)
        s_bounds[k] = (d_lo[k] - shi, d_hi[k] - slo)
    return tuple(s_bounds[k] for k in range(2 * n, n, -1))


def shear_volume_test(rmap: RegressorMap, x, y, O, B=None, samples: int = 1_000_000,
                      seed: int = 0, chunk: int = 250_000) -> ShearVolumeResult:
    """Monte Carlo volume of ``{s in B : g(s, y, x) in O}`` against the exact ``vol(O)``.

    ``B`` defaults to :func:`shear_preimage_bounds`; a user box must contain it.
    """
    rmap = _rmap(rmap)
    if samples < 100_000:
        raise InvalidArgument(f"need at least 1e5 samples, got {samples}")
    n = rmap.arity
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    box = _as_box(O)
    need = shear_preimage_bounds(rmap, x, y, box)
    if B is None:
        B = need
    else:
        B = _as_box(B)
        if len(B) != n or any(b[0] > q[0] + 1e-12 or b[1] < q[1] - 1e-12 for b, q in zip(B, need)):
            raise InvalidArgument(f"invalid bounding box: {B} does not contain the preimage enclosure {need}")
    blo = np.array([a for a, _ in B])
    bhi = np.array([b for _, b in B])
    olo = np.array([a for a, _ in box])
    ohi = np.array([b for _, b in box])
    gen = make_generator(seed)
    hits = 0
    done = 0
    while done < samples:
        c = min(chunk, samples - done)
        s = blo + (bhi - blo) * gen.random((c, n))  # newest first
        d = [np.full(c, v) for v in y[::-1]]  # chronological d[1..n]
        for j in range(n):
            win = np.stack([d[-1 - i] for i in range(n)], axis=1)
            d.append(s[:, n - 1 - j] + rmap.evaluate_many(win) @ x)
        out = np.stack(d[n:][::-1], axis=1)  # newest first
        hits += int(np.count_nonzero(np.all((out >= olo) & (out <= ohi), axis=1)))
        done += c
    vol_b = float(np.prod(bhi - blo))
    p = hits / samples
    return ShearVolumeResult(vol_b * p, float(np.prod(ohi - olo)), vol_b * math.sqrt(p * (1 - p) / samples),
                             samples, hits, B)
