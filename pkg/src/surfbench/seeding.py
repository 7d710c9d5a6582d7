"""Named random substreams derived from one integer seed.

Every consumer of randomness asks for its own stream by name, so adding a
new consumer never shifts the numbers another one sees.
"""
import zlib

import numpy as np


def substream(seed, name):
    """Independent ``Generator`` for ``name`` under the root ``seed``."""
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(key,)))


def derive_seed(seed, name):
    """A 63-bit integer seed for ``name``, for APIs that take plain ints."""
    return int(substream(seed, name).integers(0, 2 ** 63 - 1))
