"""Seeded random streams.

Every stream is a numpy ``Generator`` over the counter-based Philox bit
generator. Normal variates come from the Marsaglia polar method applied to
Philox uniforms in fixed-size batches, so the first ``k`` normals of a stream
never depend on how many were requested in total.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
POLAR_BATCH = 4096


def splitmix64(z: int) -> int:
    """SplitMix64 output function on a 64-bit integer."""
    z &= MASK64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return z ^ (z >> 31)


def mix_seed(base_seed: int, replicate: int) -> int:
    """Stream seed for replicate ``replicate``: splitmix64(base + (r+1)*gamma)."""
    return splitmix64((int(base_seed) + (int(replicate) + 1) * GOLDEN_GAMMA) & MASK64)


def make_generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & MASK64))


def polar_normals(gen: np.random.Generator, size: int) -> np.ndarray:
    out = np.empty(size, dtype=np.float64)
    filled = 0
    while filled < size:
        uv = 2.0 * gen.random((POLAR_BATCH, 2)) - 1.0
        s = uv[:, 0] * uv[:, 0] + uv[:, 1] * uv[:, 1]
        ok = (s > 0.0) & (s < 1.0)
        uv, s = uv[ok], s[ok]
        factor = np.sqrt(-2.0 * np.log(s) / s)
        z = (uv * factor[:, None]).ravel()
        take = min(size - filled, z.size)
        out[filled:filled + take] = z[:take]
        filled += take
    return out
