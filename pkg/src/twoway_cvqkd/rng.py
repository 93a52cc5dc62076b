"""Reproducible, shardable random streams.

All stochastic code in the library draws from counter-based Philox
generators keyed by (seed, stream_index). Bulk sampling is chunked with a
fixed chunk size and one stream per chunk, so serial generation and any
parallel dispatch of chunks produce bit-identical results.
"""

from __future__ import annotations

import numpy as np

CHUNK = 8192


def generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator for a (seed, stream) pair."""
    key = np.random.SeedSequence([int(seed), int(stream)]).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def normal_matrix(seed: int, n: int, cols: int) -> np.ndarray:
    """(n, cols) standard normals, chunked deterministically by row blocks."""
    out = np.empty((n, cols))
    for chunk_index, start in enumerate(range(0, n, CHUNK)):
        stop = min(start + CHUNK, n)
        out[start:stop] = generator(seed, chunk_index).standard_normal((stop - start, cols))
    return out
