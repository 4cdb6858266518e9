"""Deterministic, order-independent randomness.

Two primitives cover every random decision in the simulator:

* ``derive_seed(*parts)`` hashes an arbitrary key path (master seed,
  feeder id, house index, parameter name, ...) to a stable 64-bit seed.
  Regenerating the same entity always consumes the same key, so results
  never depend on generation order or thread count.

* ``unit_draw(seed, index)`` is a counter-based uniform draw in [0, 1):
  a splitmix64 mix of ``seed + index``.  Appliances own a seed and index
  their draws by simulation step, which makes every draw a pure function
  of (appliance, step) regardless of which executor asks for it.
"""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_TWO64 = float(1 << 64)


def derive_seed(*parts: object) -> int:
    """Stable 64-bit seed from a key path of ints/strings."""
    key = "|".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def unit_draw(seed: int, index: int) -> float:
    """Uniform draw in [0, 1), a pure function of (seed, index)."""
    z = (seed + (index + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z = z ^ (z >> 31)
    return z / _TWO64


def unit_draws(seed: int, start: int, count: int) -> list[float]:
    """``count`` consecutive draws starting at ``index=start``."""
    return [unit_draw(seed, i) for i in range(start, start + count)]
