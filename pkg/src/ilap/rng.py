"""Named random streams.

Every stream is a ``numpy.random.Generator`` backed by PCG64 and keyed by
``(seed, purpose, *indices)`` through ``SeedSequence.spawn_key``. Two streams
with different keys are statistically independent, and a stream never
depends on how many draws were taken from any other stream, so replications
and compared algorithms can be evaluated in any order.
"""

from __future__ import annotations

import zlib

import numpy as np

INSTANCE = "instance"
CONSTRAINTS = "constraints"
NOISE = "noise"
POLICY = "policy"


def _purpose_code(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def stream(seed: int, purpose: str, *indices: int) -> np.random.Generator:
    """Return the generator for ``(seed, purpose, *indices)``."""
    key = (_purpose_code(purpose),) + tuple(int(i) for i in indices)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def noise_matrix(seed: int, t: int, shape: tuple[int, int]) -> np.ndarray:
    """Standard normal draws for every (user, item) pair of round ``t``.

    Indexing noise by ``(t, u, i)`` means two policies allocating the same
    pair in the same round observe the same realized reward.
    """
    return stream(seed, NOISE, t).standard_normal(shape)
