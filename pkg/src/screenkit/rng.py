"""Portable seeded random numbers.

Every stochastic step in the toolkit draws from SplitMix64 (Steele, Lea &
Flood 2014).  The generator is counter based: output ``i`` of a stream
seeded with ``s`` is ``mix64(s + (i + 1) * GOLDEN_GAMMA)``, so blocks of
draws can be produced with vectorized uint64 arithmetic and streams are
bit-identical on every platform and numpy version.

Derived streams (per tree, per class, per trial) use :func:`derive_seed`,
which hashes the parent seed together with integer labels.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_MUL_1 = 0xBF58476D1CE4E5B9
MIX_MUL_2 = 0x94D049BB133111EB

_U64 = np.uint64
_TWO_POW_M53 = 1.0 / 9007199254740992.0


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int (result in [0, 2**64))."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX_MUL_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_MUL_2) & MASK64
    return z ^ (z >> 31)


def hash_ints(values, seed: int = GOLDEN_GAMMA) -> int:
    """Order-dependent 64-bit hash of a sequence of integers.

    ``h <- mix64(h ^ (v mod 2**64) + GOLDEN_GAMMA)`` folded over ``values``.
    Negative integers are taken modulo 2**64.
    """
    h = seed & MASK64
    for v in values:
        h = mix64((h ^ (v & MASK64)) + GOLDEN_GAMMA)
    return h


def derive_seed(seed: int, *labels: int) -> int:
    """Child seed for a labelled sub-stream, e.g. ``derive_seed(seed, tree_index)``."""
    return hash_ints(labels, seed=mix64(seed))


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U64(30))) * _U64(MIX_MUL_1)
    z = (z ^ (z >> _U64(27))) * _U64(MIX_MUL_2)
    return z ^ (z >> _U64(31))


class SplitMix64:
    """Seeded counter-based generator.

    Parameters
    ----------
    seed : int
        Any integer; reduced modulo 2**64.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self.counter = 0

    def next_u64(self) -> int:
        self.counter += 1
        return mix64(self.seed + self.counter * GOLDEN_GAMMA)

    def u64(self, n: int) -> np.ndarray:
        """The next ``n`` raw 64-bit outputs."""
        if n < 0:
            raise ValueError("n must be non-negative")
        with np.errstate(over="ignore"):
            steps = np.arange(self.counter + 1, self.counter + n + 1, dtype=_U64)
            z = _U64(self.seed) + steps * _U64(GOLDEN_GAMMA)
            out = _mix64_array(z)
        self.counter += n
        return out

    def random(self, n: int) -> np.ndarray:
        """``n`` doubles uniform on [0, 1) with 53 random bits each."""
        return (self.u64(n) >> _U64(11)).astype(np.float64) * _TWO_POW_M53

    def uniform(self, low: float, high: float, n: int) -> np.ndarray:
        return low + (high - low) * self.random(n)

    def integers(self, bound: int, n: int) -> np.ndarray:
        """``n`` integers in [0, bound) as ``floor(u * bound)`` (bias below bound / 2**53)."""
        if bound < 1:
            raise ValueError("bound must be >= 1")
        out = np.floor(self.random(n) * bound).astype(np.int64)
        return np.minimum(out, bound - 1)

    def normal(self, n: int) -> np.ndarray:
        """Standard normal draws by the Box-Muller transform."""
        m = (n + 1) // 2
        u1 = 1.0 - self.random(m)  # (0, 1]
        u2 = self.random(m)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
        return z[:n]

    def permutation(self, n_or_items) -> np.ndarray:
        """Random permutation by stable argsort of fresh 64-bit keys."""
        items = np.arange(n_or_items) if np.isscalar(n_or_items) else np.asarray(n_or_items)
        keys = self.u64(len(items))
        return items[np.argsort(keys, kind="stable")]
