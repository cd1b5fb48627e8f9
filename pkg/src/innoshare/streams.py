"""Counter-based random streams for reproducible, parallel-safe sampling.

Every interception stream is a Philox generator keyed by (seed, run_index),
so the t-th draw is a pure function of (seed, run_index, t). Runs can be
sampled in any order, in parallel, or regenerated in isolation and always
produce the same bits.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed, run_index):
    """Return the Generator for stream (seed, run_index)."""
    key = np.array([seed & _MASK64, run_index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def uniform_stream(seed, run_index, n):
    """First n uniform(0,1) draws of stream (seed, run_index)."""
    return stream(seed, run_index).random(n)


def bernoulli_stream(seed, run_index, n, p):
    """First n Bernoulli(p) draws of stream (seed, run_index), as booleans."""
    return uniform_stream(seed, run_index, n) < p


def bernoulli_matrix(seed, run_indices, n, p):
    """Stack bernoulli_stream over run_indices into a (len(run_indices), n) array."""
    out = np.empty((len(run_indices), n), dtype=bool)
    for row, r in enumerate(run_indices):
        out[row] = bernoulli_stream(seed, r, n, p)
    return out
