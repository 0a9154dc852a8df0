"""Seeded, counter-based random streams.

Each chain draws from its own Philox generator keyed by ``(seed, *key)``,
so results do not depend on how replicas are scheduled across threads.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

_MASK = (1 << 64) - 1


def stream(seed, *key):
    """Generator for the sub-stream ``(seed, *key)``."""
    entropy = [int(seed) & _MASK] + [int(k) for k in key]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


class ReplicaNormals:
    """Chunked standard normals for a batch of independent replicas.

    ``draw(steps)`` returns an array of shape ``(replicas, steps, n)``.
    Consecutive draws continue each replica's stream, so chunking does not
    change the values.
    """

    def __init__(self, seed, replicas, n, tag=0, threads=1):
        self.n = n
        self.threads = max(1, int(threads))
        self._gens = [stream(seed, i, tag) for i in range(replicas)]

    def draw(self, steps):
        out = np.empty((len(self._gens), steps, self.n))

        def fill(i):
            out[i] = self._gens[i].standard_normal((steps, self.n))

        if self.threads == 1:
            for i in range(len(self._gens)):
                fill(i)
        else:
            with ThreadPoolExecutor(self.threads) as pool:
                list(pool.map(fill, range(len(self._gens))))
        return out

    def uniform(self, steps):
        return np.stack([g.random(steps) for g in self._gens])
