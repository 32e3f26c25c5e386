"""Counter-based deterministic random streams.

Every stochastic step in the package (RANSAC sampling, synthetic scene
generation) draws from ``(seed, counter) -> value`` so that results are
reproducible bit-for-bit across platforms and independent of call order.
The core is the splitmix64 finalizer, which any language can reproduce
from the integer recipe below.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _splitmix64(z: int) -> int:
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def hash_u64(seed: int, counter: int) -> int:
    """Map (seed, counter) to a uniform 64-bit integer."""
    return _splitmix64(((seed & _MASK64) * _GOLDEN + counter) & _MASK64)


def u01(seed: int, counter: int) -> float:
    """Uniform double in [0, 1) from the 53 high bits of the hash."""
    return (hash_u64(seed, counter) >> 11) * (1.0 / (1 << 53))


def u01_array(seed: int, start: int, n: int) -> np.ndarray:
    """Vector of n uniform doubles for counters start..start+n-1."""
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = u01(seed, start + i)
    return out


def normal_array(seed: int, start: int, n: int) -> np.ndarray:
    """Vector of n standard normals via Box-Muller on counter pairs.

    Draw i consumes counters (start + 2i, start + 2i + 1), so disjoint
    counter ranges give independent streams.
    """
    u1 = u01_array(seed, start, 2 * n)[0::2]
    u2 = u01_array(seed, start + 1, 2 * n - 1)[0::2] if n else u1
    u1 = np.maximum(u1, 1e-300)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def randint_below(seed: int, counter: int, n: int) -> int:
    """Integer in [0, n) by scaling one uniform draw; n must be positive."""
    return min(int(u01(seed, counter) * n), n - 1)


def sample_without_replacement(seed: int, counter: int, n: int, k: int) -> np.ndarray:
    """k distinct indices from [0, n), deterministic in (seed, counter).

    Partial Fisher-Yates over an index table; consumes k counters.
    """
    if k > n:
        raise ValueError(f"cannot sample {k} of {n}")
    idx = np.arange(n)
    for i in range(k):
        j = i + randint_below(seed, counter + i, n - i)
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:k].copy()


class CounterStream:
    """Convenience wrapper advancing a counter through the functions above."""

    def __init__(self, seed: int, start: int = 0):
        self.seed = int(seed)
        self.counter = int(start)

    def _take(self, n: int) -> int:
        c = self.counter
        self.counter += n
        return c

    def uniform(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        u = u01_array(self.seed, self._take(n), n)
        return low + (high - low) * u

    def normal(self, n: int, sigma: float = 1.0) -> np.ndarray:
        return sigma * normal_array(self.seed, self._take(2 * n), n)

    def choice(self, n: int, k: int) -> np.ndarray:
        return sample_without_replacement(self.seed, self._take(k), n, k)

    def split(self, tag: int) -> "CounterStream":
        """Independent child stream; children with distinct tags never collide."""
        return CounterStream(hash_u64(self.seed, tag), 0)
