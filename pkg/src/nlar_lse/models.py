"""Regressor maps, model specifications and noise laws.

A model is ``y[t+1] = theta . phi(y[t], ..., y[t-n+1]) + offset(y[t]) + w[t+1]``
where ``phi`` is a :class:`RegressorMap`. Windows are always ordered newest
first. Every map evaluates batches: an ``(N, n)`` array of windows maps to an
``(N, m)`` array of regressors, and the single-window path goes through the
same code.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import InvalidArgument, NumericError

# --------------------------------------------------------------------------
# scalar bases
# --------------------------------------------------------------------------


def _square_bound(lo, hi):
    if lo <= 0.0 <= hi:
        return 0.0, max(lo * lo, hi * hi)
    return min(lo * lo, hi * hi), max(lo * lo, hi * hi)


def _abs_bound(lo, hi):
    if lo <= 0.0 <= hi:
        return 0.0, max(-lo, hi)
    return min(abs(lo), abs(hi)), max(abs(lo), abs(hi))


def _gauss_bound(lo, hi):
    smin, smax = _square_bound(lo, hi)
    return math.exp(-smax), math.exp(-smin)


@dataclass(frozen=True, eq=False)
class Basis:
    """A scalar function ``R -> R`` that accepts numpy arrays.

    ``bound(lo, hi)`` returns an enclosure of the range over ``[lo, hi]``;
    when absent, ranges are estimated by dense sampling.
    """

    name: str
    fn: Callable[[np.ndarray], Any]
    bound: Callable[[float, float], tuple[float, float]] | None = None

    def __call__(self, z):
        z = np.asarray(z, dtype=np.float64)
        return np.broadcast_to(np.asarray(self.fn(z), dtype=np.float64), z.shape)

    def range_on(self, lo: float, hi: float) -> tuple[float, float]:
        if self.bound is not None:
            return self.bound(lo, hi)
        return _sampled_range(self, lo, hi)


def _sampled_range(f, lo, hi, points=2001, pad=0.05):
    z = np.linspace(lo, hi, points)
    v = f(z)
    vlo, vhi = float(v.min()), float(v.max())
    margin = pad * (vhi - vlo) + 1e-9
    return vlo - margin, vhi + margin


BASES: dict[str, Basis] = {
    "identity": Basis("identity", lambda z: z, lambda lo, hi: (lo, hi)),
    "one": Basis("one", lambda z: np.ones_like(z), lambda lo, hi: (1.0, 1.0)),
    "square": Basis("square", lambda z: z * z, _square_bound),
    "cube": Basis("cube", lambda z: z * z * z, lambda lo, hi: (lo ** 3, hi ** 3)),
    "abs": Basis("abs", np.abs, _abs_bound),
    "sin": Basis("sin", np.sin, lambda lo, hi: (-1.0, 1.0)),
    "cos": Basis("cos", np.cos, lambda lo, hi: (-1.0, 1.0)),
    "tanh": Basis("tanh", np.tanh, lambda lo, hi: (math.tanh(lo), math.tanh(hi))),
    "gauss": Basis("gauss", lambda z: np.exp(-z * z), _gauss_bound),
}


def as_basis(f) -> Basis:
    """Coerce a name, :class:`Basis` or plain callable into a :class:`Basis`."""
    if isinstance(f, Basis):
        return f
    if isinstance(f, str):
        try:
            return BASES[f]
        except KeyError:
            raise InvalidArgument(f"unknown basis {f!r}; known: {sorted(BASES)}") from None
    if not callable(f):
        raise InvalidArgument(f"basis must be callable, got {type(f).__name__}")
    probe = np.array([0.0, 1.0])
    try:
        out = np.asarray(f(probe), dtype=np.float64)
        vectorized = out.shape in ((), probe.shape)
    except Exception:
        vectorized = False
    fn = f if vectorized else np.vectorize(f, otypes=[np.float64])
    return Basis(getattr(f, "__name__", "user"), fn)


# --------------------------------------------------------------------------
# regressor maps
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RegressorMap:
    arity: int
    dim: int
    kind: str
    name: str
    batch: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    lag_bases: tuple[tuple[Basis, ...], ...] | None = field(default=None, repr=False)
    interval: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]] | None = field(
        default=None, repr=False
    )

    def __post_init__(self):
        if self.arity < 1 or self.dim < 1:
            raise InvalidArgument(f"arity and dim must be >= 1, got {self.arity}, {self.dim}")
        if self.kind not in ("separable", "general"):
            raise InvalidArgument(f"unknown regressor kind {self.kind!r}")
        if self.kind == "separable":
            if self.lag_bases is None or len(self.lag_bases) != self.arity:
                raise InvalidArgument("separable map needs one basis list per lag")
            if sum(len(b) for b in self.lag_bases) != self.dim:
                raise InvalidArgument("per-lag dimensions must sum to dim")

    @property
    def lag_dims(self) -> tuple[int, ...] | None:
        if self.lag_bases is None:
            return None
        return tuple(len(b) for b in self.lag_bases)

    def evaluate_many(self, windows) -> np.ndarray:
        w = np.asarray(windows, dtype=np.float64)
        if w.ndim != 2 or w.shape[1] != self.arity:
            raise InvalidArgument(f"windows must have shape (N, {self.arity}), got {w.shape}")
        out = np.asarray(self.batch(w), dtype=np.float64)
        if out.shape != (w.shape[0], self.dim):
            raise NumericError(f"{self.name}: evaluator returned shape {out.shape}")
        return out

    def __call__(self, window) -> np.ndarray:
        return eval_regressor(self, window)

    def bounds(self, lo, hi) -> tuple[np.ndarray, np.ndarray]:
        """Componentwise enclosure of ``phi`` over the box ``[lo, hi]`` in window space."""
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        if self.interval is not None:
            return self.interval(lo, hi)
        return _sampled_box_range(self, lo, hi)


def _sampled_box_range(rmap, lo, hi, per_axis=None, pad=0.1):
    n = rmap.arity
    per_axis = per_axis or max(3, int(round(40000 ** (1.0 / n))))
    axes = [np.linspace(a, b, per_axis) if b > a else np.array([a]) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    v = rmap.evaluate_many(grid)
    vlo, vhi = v.min(axis=0), v.max(axis=0)
    margin = pad * (vhi - vlo) + 1e-9
    return vlo - margin, vhi + margin


def eval_regressor(rmap: RegressorMap, window) -> np.ndarray:
    """Evaluate ``phi`` on a single newest-first window of length ``arity``."""
    w = np.asarray(window, dtype=np.float64).reshape(-1)
    if w.size != rmap.arity:
        raise InvalidArgument(f"{rmap.name}: window length {w.size} != arity {rmap.arity}")
    out = rmap.evaluate_many(w[None, :])[0]
    if not np.all(np.isfinite(out)):
        raise NumericError(f"{rmap.name}: non-finite regressor at window {w.tolist()}")
    return out


def make_separable(bases: Sequence[Sequence], name: str | None = None) -> RegressorMap:
    """Stack per-lag bases: ``phi(z) = col{phi1(z1), ..., phin(zn)}``."""
    if len(bases) == 0:
        raise InvalidArgument("need at least one lag")
    lag_bases = []
    for i, lag in enumerate(bases):
        if isinstance(lag, (str, Basis)) or callable(lag):
            lag = [lag]
        if len(lag) == 0:
            raise InvalidArgument(f"lag {i} has an empty basis list")
        lag_bases.append(tuple(as_basis(f) for f in lag))
    lag_bases = tuple(lag_bases)
    m = sum(len(b) for b in lag_bases)

    def batch(w):
        cols = []
        for i, lag in enumerate(lag_bases):
            z = w[:, i]
            cols.extend(f(z) for f in lag)
        return np.stack(cols, axis=1)

    def interval(lo, hi):
        los, his = [], []
        for i, lag in enumerate(lag_bases):
            for f in lag:
                a, b = f.range_on(float(lo[i]), float(hi[i]))
                los.append(a)
                his.append(b)
        return np.array(los), np.array(his)

    if name is None:
        name = "separable[" + "; ".join(",".join(f.name for f in lag) for lag in lag_bases) + "]"
    return RegressorMap(len(lag_bases), m, "separable", name, batch, lag_bases, interval)


def make_general(fn: Callable[[np.ndarray], np.ndarray], arity: int, dim: int, name: str = "general",
                 interval=None) -> RegressorMap:
    """Wrap a batch evaluator ``(N, arity) -> (N, dim)`` as a non-separable map."""
    return RegressorMap(arity, dim, "general", name, fn, None, interval)


# --------------------------------------------------------------------------
# models
# --------------------------------------------------------------------------


def _as_theta(theta, name="theta") -> np.ndarray:
    arr = np.array(theta, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise InvalidArgument(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Regressor map plus true parameter.

    ``offset`` is a known drift added during simulation but never estimated
    (the TAR pass-through term). ``description`` is the tagged dict the model
    was built from, when there is one.
    """

    regressor: RegressorMap
    theta: np.ndarray
    name: str
    offset: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    description: dict | None = field(default=None, repr=False)
    regions: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        theta = _as_theta(self.theta)
        object.__setattr__(self, "theta", theta)
        if theta.size != self.regressor.dim:
            raise InvalidArgument(
                f"theta has length {theta.size} but regressor dim is {self.regressor.dim}"
            )

    @property
    def family(self) -> str | None:
        return None if self.description is None else self.description.get("family")


def make_linear_ar(theta) -> ModelSpec:
    theta = _as_theta(theta)
    rmap = make_separable([["identity"]] * theta.size, name=f"linear_ar(n={theta.size})")
    desc = {"family": "linear_ar", "theta": theta.tolist()}
    return ModelSpec(rmap, theta, rmap.name, description=desc)


def _check_regions(regions) -> tuple[tuple[float, float], ...]:
    out = []
    for lo, hi in regions:
        lo, hi = float(lo), float(hi)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise InvalidArgument(f"region [{lo}, {hi}] must be a finite interval of positive length")
        out.append((lo, hi))
    for i in range(len(out)):
        for j in range(i + 1, len(out)):
            # touching endpoints are allowed; the point goes to the lower index
            if max(out[i][0], out[j][0]) < min(out[i][1], out[j][1]):
                raise InvalidArgument(f"regions {out[i]} and {out[j]} overlap")
    return tuple(out)


def region_index(z: np.ndarray, regions) -> np.ndarray:
    """Index of the first closed region containing each value, -1 for the complement."""
    idx = np.full(np.shape(z), -1, dtype=np.int64)
    for j, (lo, hi) in enumerate(regions):
        idx[(idx == -1) & (z >= lo) & (z <= hi)] = j
    return idx


def make_tar(g, theta, regions) -> ModelSpec:
    """Threshold AR: ``y' = sum_j theta_j g(y) 1{y in D_j} + y 1{y outside all D_j} + w``."""
    theta = _as_theta(theta)
    regions = _check_regions(regions)
    if len(regions) == 0:
        raise InvalidArgument("need at least one region")
    if len(regions) != theta.size:
        raise InvalidArgument(f"{theta.size} coefficients for {len(regions)} regions")
    gb = as_basis(g)
    k = len(regions)

    def batch(w):
        z = w[:, 0]
        idx = region_index(z, regions)
        gz = gb(z)
        out = np.zeros((z.size, k))
        for j in range(k):
            sel = idx == j
            out[sel, j] = gz[sel]
        return out

    def interval(lo, hi):
        a, b = float(lo[0]), float(hi[0])
        los, his = np.zeros(k), np.zeros(k)
        for j, (rlo, rhi) in enumerate(regions):
            c, d = max(a, rlo), min(b, rhi)
            if c > d:
                continue
            glo, ghi = gb.range_on(c, d)
            # 0 is always attainable at shared endpoints or outside D_j
            los[j], his[j] = min(glo, 0.0), max(ghi, 0.0)
        return los, his

    def offset(y):
        y = np.asarray(y, dtype=np.float64)
        return np.where(region_index(y, regions) == -1, y, 0.0)

    name = f"tar(g={gb.name}, k={k})"
    rmap = RegressorMap(1, k, "separable", name, batch,
                        (tuple(Basis(f"{gb.name}*1D{j}", _tar_component(gb, regions, j)) for j in range(k)),),
                        interval)
    desc = None
    if isinstance(g, str) or (isinstance(g, Basis) and g.name in BASES and BASES[g.name] is g):
        desc = {"family": "tar", "g": gb.name, "theta": theta.tolist(),
                "regions": [list(r) for r in regions]}
    return ModelSpec(rmap, theta, name, offset=offset, description=desc, regions=regions)


def _tar_component(gb, regions, j):
    def f(z):
        z = np.asarray(z, dtype=np.float64)
        return np.where(region_index(z, regions) == j, gb(z), 0.0)
    return f


def make_exar(alphas, betas, gamma: float) -> ModelSpec:
    """Exponential AR with ``phi = (z1, z1 e, z2, z2 e, ...)``, ``e = exp(-gamma z1^2)``."""
    alphas = _as_theta(alphas, "alphas")
    betas = _as_theta(betas, "betas")
    if alphas.size != betas.size:
        raise InvalidArgument("alphas and betas must have equal length")
    gamma = float(gamma)
    if not (math.isfinite(gamma) and gamma > 0.0):
        raise InvalidArgument(f"gamma must be positive, got {gamma}")
    n = alphas.size

    def batch(w):
        e = np.exp(-gamma * w[:, 0] * w[:, 0])
        out = np.empty((w.shape[0], 2 * n))
        out[:, 0::2] = w
        out[:, 1::2] = w * e[:, None]
        return out

    def interval(lo, hi):
        elo, ehi = _gauss_bound(math.sqrt(gamma) * lo[0], math.sqrt(gamma) * hi[0])
        los, his = np.empty(2 * n), np.empty(2 * n)
        los[0::2], his[0::2] = lo, hi
        for j in range(n):
            prods = (lo[j] * elo, lo[j] * ehi, hi[j] * elo, hi[j] * ehi)
            los[2 * j + 1], his[2 * j + 1] = min(prods), max(prods)
        return los, his

    theta = np.empty(2 * n)
    theta[0::2], theta[1::2] = alphas, betas
    name = f"exar(n={n}, gamma={gamma:g})"
    rmap = RegressorMap(n, 2 * n, "general", name, batch, None, interval)
    desc = {"family": "exar", "n": n, "alphas": alphas.tolist(), "betas": betas.tolist(), "gamma": gamma}
    return ModelSpec(rmap, theta, name, description=desc)


def make_separable_model(bases, theta) -> ModelSpec:
    rmap = make_separable(bases)
    desc = None
    if all(isinstance(f, str) for lag in bases for f in (lag if not isinstance(lag, str) else [lag])):
        desc = {"family": "separable", "bases": [[lag] if isinstance(lag, str) else list(lag) for lag in bases],
                "theta": _as_theta(theta).tolist()}
    return ModelSpec(rmap, theta, rmap.name, description=desc)


MODEL_KEYS = {
    "linear_ar": {"family", "theta"},
    "tar": {"family", "g", "theta", "regions"},
    "exar": {"family", "n", "alphas", "betas", "gamma"},
    "separable": {"family", "bases", "theta"},
}


def model_from_description(desc: dict) -> ModelSpec:
    """Build a model from its tagged dict, e.g. ``{"family": "exar", "n": 2, ...}``."""
    if not isinstance(desc, dict) or "family" not in desc:
        raise InvalidArgument("model description needs a 'family' key")
    family = desc["family"]
    if family not in MODEL_KEYS:
        raise InvalidArgument(f"unknown model family {family!r}")
    extra = set(desc) - MODEL_KEYS[family]
    if extra:
        raise InvalidArgument(f"unknown keys for family {family!r}: {sorted(extra)}")
    try:
        if family == "linear_ar":
            return make_linear_ar(desc["theta"])
        if family == "tar":
            return make_tar(desc.get("g", "identity"), desc["theta"], desc["regions"])
        if family == "exar":
            model = make_exar(desc["alphas"], desc["betas"], desc["gamma"])
            if "n" in desc and int(desc["n"]) != len(desc["alphas"]):
                raise InvalidArgument(f"n={desc['n']} disagrees with len(alphas)={len(desc['alphas'])}")
            return model
        return make_separable_model(desc["bases"], desc["theta"])
    except KeyError as exc:
        raise InvalidArgument(f"model description missing {exc.args[0]!r}") from None


def default_c_phi(model: ModelSpec) -> float:
    """Truncation radius default: TAR covers its regions plus one, everything else 10."""
    if model.regions:
        return max(max(abs(lo), abs(hi)) for lo, hi in model.regions) + 1.0
    return 10.0


# --------------------------------------------------------------------------
# noise
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    """Zero-mean i.i.d. noise law with the flags the consistency results rely on.

    ``a1`` marks standard Gaussian noise (the Bayesian setting).
    ``a1_prime`` needs a moment of order above 2, a density bounded above,
    and a density positive on every interval. Bounded-support laws fail the
    last flag but still simulate.
    """

    family: str
    params: tuple = ()
    beta: float = math.inf
    positive_density_everywhere: bool = True
    bounded_density: bool = True

    @property
    def a1(self) -> bool:
        return self.family == "standard_normal"

    @property
    def a1_prime(self) -> bool:
        return self.beta > 2 and self.positive_density_everywhere and self.bounded_density

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        from .rng import polar_normals

        if self.family == "standard_normal":
            return polar_normals(gen, size)
        if self.family == "uniform":
            a, b = self.params
            return a + (b - a) * gen.random(size)
        if self.family == "gaussian_mixture":
            weights, means, scales = (np.asarray(p) for p in self.params)
            comp = np.searchsorted(np.cumsum(weights), gen.random(size) * weights.sum(), side="right")
            comp = np.minimum(comp, weights.size - 1)
            return means[comp] + scales[comp] * polar_normals(gen, size)
        if self.family == "zero":
            return np.zeros(size)
        raise InvalidArgument(f"unknown noise family {self.family!r}")

    def density(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.family == "standard_normal":
            return np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
        if self.family == "uniform":
            a, b = self.params
            return np.where((x >= a) & (x <= b), 1.0 / (b - a), 0.0)
        if self.family == "gaussian_mixture":
            weights, means, scales = (np.asarray(p) for p in self.params)
            z = (x[..., None] - means) / scales
            return np.sum(weights * np.exp(-0.5 * z * z) / (scales * math.sqrt(2 * math.pi)), axis=-1)
        raise InvalidArgument(f"noise family {self.family!r} has no density")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"family": self.family}
        if self.family == "uniform":
            d["a"], d["b"] = self.params
        elif self.family == "gaussian_mixture":
            d["weights"], d["means"], d["scales"] = (list(p) for p in self.params)
        return d


def standard_normal() -> NoiseSpec:
    return NoiseSpec("standard_normal")


def uniform(a: float, b: float) -> NoiseSpec:
    a, b = float(a), float(b)
    if not a < 0.0 < b:
        raise InvalidArgument(f"uniform noise needs a < 0 < b, got ({a}, {b})")
    if a != -b:
        raise InvalidArgument("uniform noise must be centred (a == -b) to have mean zero")
    return NoiseSpec("uniform", (a, b), positive_density_everywhere=False)


def gaussian_mixture(weights, means, scales) -> NoiseSpec:
    w = np.asarray(weights, dtype=np.float64)
    mu = np.asarray(means, dtype=np.float64)
    s = np.asarray(scales, dtype=np.float64)
    if not (w.shape == mu.shape == s.shape) or w.ndim != 1 or w.size == 0:
        raise InvalidArgument("weights, means and scales must be equal-length vectors")
    if np.any(w <= 0) or np.any(s <= 0):
        raise InvalidArgument("weights and scales must be positive")
    w = w / w.sum()
    if abs(float(w @ mu)) > 1e-12:
        raise InvalidArgument("mixture mean must be zero")
    return NoiseSpec("gaussian_mixture", (tuple(w), tuple(mu), tuple(s)))


def zero_noise() -> NoiseSpec:
    """Degenerate noise for deterministic checks; has no density."""
    return NoiseSpec("zero", beta=math.inf, positive_density_everywhere=False, bounded_density=False)


def noise_from_description(desc) -> NoiseSpec:
    if isinstance(desc, str):
        desc = {"family": desc}
    if not isinstance(desc, dict) or "family" not in desc:
        raise InvalidArgument("noise description needs a 'family' key")
    fam = desc["family"]
    allowed = {
        "standard_normal": {"family"},
        "zero": {"family"},
        "uniform": {"family", "a", "b"},
        "gaussian_mixture": {"family", "weights", "means", "scales"},
    }
    if fam not in allowed:
        raise InvalidArgument(f"unknown noise family {fam!r}")
    extra = set(desc) - allowed[fam]
    if extra:
        raise InvalidArgument(f"unknown keys for noise {fam!r}: {sorted(extra)}")
    if fam == "standard_normal":
        return standard_normal()
    if fam == "zero":
        return zero_noise()
    if fam == "uniform":
        return uniform(desc["a"], desc["b"])
    return gaussian_mixture(desc["weights"], desc["means"], desc["scales"])
