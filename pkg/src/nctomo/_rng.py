"""Counter-based pseudo-random streams.

Every stochastic component of the library derives its randomness from a
(seed, counter...) tuple through a SplitMix64 chain, so draws depend only on
the identifying indices and never on iteration order, thread count, or call
history.  The same indices always yield the same draw, which is what makes
experiment shards mergeable and reruns byte-identical.
"""

from __future__ import annotations

import numpy as np

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(x: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    """One SplitMix64 finalization round (vectorized over uint64 arrays)."""
    with np.errstate(over="ignore"):
        z = (x + _GOLDEN) & _MASK64
        z = ((z ^ (z >> np.uint64(30))) * _MIX1) & _MASK64
        z = ((z ^ (z >> np.uint64(27))) * _MIX2) & _MASK64
        return z ^ (z >> np.uint64(31))


def hash_indices(seed: int, *indices: int) -> int:
    """Collapse (seed, i0, i1, ...) into a single 64-bit value."""
    h = _splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    for ix in indices:
        with np.errstate(over="ignore"):
            h = _splitmix64(h ^ np.uint64(ix & 0xFFFFFFFFFFFFFFFF))
    return int(h)


def uniform_grid(seed: int, experiments: np.ndarray, n_draws: int) -> np.ndarray:
    """Uniform [0,1) draws for a grid of (experiment index, draw index).

    Returns an array of shape ``(len(experiments), n_draws)`` where entry
    ``[t, j]`` depends only on ``(seed, experiments[t], j)``.
    """
    exps = np.asarray(experiments, dtype=np.uint64).reshape(-1, 1)
    draws = np.arange(n_draws, dtype=np.uint64).reshape(1, -1)
    base = _splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    with np.errstate(over="ignore"):
        h = _splitmix64(base ^ _splitmix64(exps))
        h = _splitmix64(h ^ _splitmix64(draws + np.uint64(0x5555555555555555)))
    return (h >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def generator(seed: int, *indices: int) -> np.random.Generator:
    """A numpy Generator keyed purely by (seed, indices)."""
    return np.random.default_rng(hash_indices(seed, *indices))
