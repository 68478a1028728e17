"""Counter-based random streams.

Every stochastic routine in the package derives its generator from
``substream(seed, *key)`` where the key encodes the purpose and the work-unit
coordinates (block index, matrix cell, ...).  Streams are backed by Philox,
a counter-based generator, so a fixed (seed, key) always yields the same
draws no matter how many worker threads are running or in which order the
work units are scheduled.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Purpose tags. Distinct tags keep estimators on independent streams; the
# bound audits require LHS and RHS estimates never to share a stream.
STREAM_SAMPLE = 1
STREAM_LASTEXIT = 2
STREAM_SERIES = 3
STREAM_LEVY = 4
STREAM_MEDIAN = 5
STREAM_MOMENT = 6
STREAM_SYMCHECK = 7
STREAM_SPRT = 8
STREAM_SPRT_REJECT = 9
STREAM_TAILPROB = 10
STREAM_SYM_TRANSFER = 11
STREAM_CELL = 12


def _seq(seed: int, key: tuple[int, ...]) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        entropy=int(seed) & _MASK64,
        spawn_key=tuple(int(k) & _MASK64 for k in key),
    )


def substream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the (seed, key) work unit, independent of scheduling."""
    return np.random.Generator(np.random.Philox(_seq(seed, key)))


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit child seed for the (seed, key) coordinate, e.g. a matrix cell."""
    return int(_seq(seed, key).generate_state(1, np.uint64)[0])
