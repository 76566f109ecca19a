"""Counter-based random streams.

Every noise draw in a generation comes from its own Philox stream, keyed by
``(seed, purpose, ids...)``. Toggling a feature therefore never shifts the
draws consumed by unrelated parts of a run, which is what makes the
"all features off equals plain DDIM" identity hold bit-exactly.

Key derivation: fold each id into a running 64-bit state with splitmix64,
then expand to the 128-bit Philox key with one more splitmix step.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def _fold(part: int | str) -> list[int]:
    if isinstance(part, str):
        raw = part.encode("utf-8")
        return [
            int.from_bytes(raw[i : i + 8], "little") for i in range(0, len(raw), 8)
        ]
    return [int(part) & _MASK64]


def derive_key(seed: int, *ids: int | str) -> int:
    """128-bit Philox key for the stream identified by ``(seed, *ids)``."""
    state = splitmix64(seed & _MASK64)
    for part in ids:
        for word in _fold(part):
            state = splitmix64(state ^ word)
    lo = state
    hi = splitmix64(state)
    return lo | (hi << 64)


def stream(seed: int, *ids: int | str) -> np.random.Generator:
    """Independent generator for the stream identified by ``(seed, *ids)``."""
    return np.random.Generator(np.random.Philox(key=derive_key(seed, *ids)))


def derive_seed(seed: int, index: int) -> int:
    """Per-index master seed for seed sweeps."""
    return splitmix64(splitmix64(seed & _MASK64) ^ (index & _MASK64))
