"""Seeded, named random streams and Box-Muller normals.

Every stream is a Philox counter-based generator keyed by the user seed plus
a path of names (``stream(42, "sample", 3)``), so different purposes never
share draws and a given path always replays the same sequence.
"""

from __future__ import annotations

import zlib

import numpy as np

from mvcheb.errors import InvalidInput


def _key(part) -> int:
    if isinstance(part, (int, np.integer)) and not isinstance(part, bool):
        if part < 0:
            raise InvalidInput(f"stream index must be non-negative, got {part}")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def stream(seed: int, *path) -> np.random.Generator:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise InvalidInput(f"seed must be a non-negative integer, got {seed!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def box_muller(gen: np.random.Generator, count: int) -> np.ndarray:
    """``count`` standard normals; both outputs of each pair are used."""
    pairs = (count + 1) // 2
    u1 = 1.0 - gen.random(pairs)  # (0, 1], keeps log finite
    u2 = gen.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:count]


def standard_normal(gen: np.random.Generator, shape) -> np.ndarray:
    shape = (shape,) if isinstance(shape, int) else tuple(shape)
    return box_muller(gen, int(np.prod(shape))).reshape(shape)
