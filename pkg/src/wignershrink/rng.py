"""Deterministic random number generation.

All sampling in this package goes through ``generator(seed)``, a
counter-based Philox-4x64 bit generator keyed by a 64-bit integer seed.
numpy guarantees stream stability for a named bit generator, so equal
seeds give bitwise-identical draws.  Philox streams with distinct keys
are independent, which makes seed derivation (``derive_seed``) a safe
way to split one master seed into per-task streams.
"""

import zlib

import numpy as np

_U64 = 0xFFFFFFFFFFFFFFFF


def generator(seed: int) -> np.random.Generator:
    """Return a ``numpy.random.Generator`` backed by Philox keyed by ``seed``."""
    return np.random.Generator(np.random.Philox(key=seed & _U64))


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _U64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return (z ^ (z >> 31)) & _U64


def derive_seed(seed: int, *tags) -> int:
    """Mix ``seed`` with a sequence of integer or string tags.

    The result is a new 64-bit seed; equal (seed, tags) always map to the
    same output, and distinct tag paths give independent Philox streams.
    """
    x = seed & _U64
    for tag in tags:
        if isinstance(tag, str):
            tag = zlib.crc32(tag.encode("utf-8"))
        x = _splitmix64(x ^ (int(tag) & _U64))
    return x
