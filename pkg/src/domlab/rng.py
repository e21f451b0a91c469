"""Counter-based random streams.

One user seed drives every draw.  A stream is addressed by ``(seed, module,
index)`` so that the numbers a sample receives never depend on how work is
split across threads.
"""
import zlib

import numpy as np

GENERATOR_NAME = f"numpy.random.Philox (numpy {np.__version__})"
U64_MAX = 2**64 - 1


def _module_key(module: str) -> int:
    return zlib.crc32(module.encode())


def stream(seed: int, module: str, index: int = 0) -> np.random.Generator:
    if not 0 <= int(seed) <= U64_MAX:
        raise ValueError("seed must be an unsigned 64-bit integer")
    ss = np.random.SeedSequence(int(seed), spawn_key=(_module_key(module), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def uniform_points(seed: int, module: str, n: int, d: int, index: int = 0):
    """``n`` i.i.d. Haar-uniform points of T^d."""
    return stream(seed, module, index).random((n, d))


def dyadic_points(seed: int, module: str, n: int, d: int, bits: int = 40, index: int = 0):
    """Uniform points on the 2^-bits lattice.

    Integer automorphisms act exactly on such points in double precision
    (no rounding while |coordinates| < 2^(52 - bits)), which makes orbit
    round trips reproducible bit for bit.
    """
    k = stream(seed, module, index).integers(0, 2**bits, size=(n, d))
    return k.astype(float) / 2.0**bits
