"""Seeded random streams for the problem generators.

Every matrix or vector drawn by a generator gets its own stream, derived
from ``(seed, stream_id)`` through :class:`numpy.random.SeedSequence`, and
fed to the PCG64 bit generator. Normal deviates are produced with the
Box-Muller transform from uniform doubles so that the recipe is easy to
replicate elsewhere; bit-identical output across implementations is not a
goal, per-seed determinism here is.
"""

import numpy as np

# Stream identifiers. Keep stable: changing one changes every generated problem.
STREAM_U = 1
STREAM_V = 2
STREAM_B = 3
STREAM_A = 4
STREAM_SUPPORT = 5
STREAM_SIGNS = 6
STREAM_NOISE = 7
STREAM_QUAD = 8
STREAM_POWER = 9
STREAM_SAMPLES = 10


def stream(seed, stream_id):
    """Return an independent generator for ``(seed, stream_id)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


def standard_normal(gen, shape):
    """Draw standard normals with the Box-Muller transform.

    Values are filled in C order; pairs ``(r cos t, r sin t)`` occupy
    consecutive slots.
    """
    size = int(np.prod(shape, dtype=np.int64))
    half = (size + 1) // 2
    # 1 - U lies in (0, 1], keeping log finite
    u1 = 1.0 - gen.random(half)
    u2 = gen.random(half)
    r = np.sqrt(-2.0 * np.log(u1))
    t = 2.0 * np.pi * u2
    out = np.empty(2 * half)
    out[0::2] = r * np.cos(t)
    out[1::2] = r * np.sin(t)
    return out[:size].reshape(shape)
