"""Seeded index sampling shared by the sequential and federated optimizers."""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgument

# key slot reserved for server-side draws (client sampling, output selection)
SERVER = 2**32 - 1


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``.

    Minibatch draws use ``stream(seed, k, client)``; a sequential run is
    the single-client case ``client = 0``, which is what lets a one-client
    federation replay a sequential run exactly.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def sample_without_replacement(n: int, b: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform b-subset of range(n), returned sorted.

    Partial Fisher-Yates with a sparse swap map, so the cost is O(b)
    regardless of n.
    """
    if not 1 <= b <= n:
        raise InvalidArgument(f"need 1 <= b <= n, got b={b}, n={n}")
    if b == n:
        return np.arange(n)
    swapped: dict[int, int] = {}
    out = np.empty(b, dtype=np.intp)
    draws = rng.integers(np.arange(b), n)
    for i in range(b):
        j = int(draws[i])
        out[i] = swapped.get(j, j)
        swapped[j] = swapped.get(i, i)
    out.sort()
    return out


def sample_clients(n: int, s: int, rng: np.random.Generator) -> np.ndarray:
    return sample_without_replacement(n, s, rng)
