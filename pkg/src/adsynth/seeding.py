"""Seed derivation: one global seed fans out into per-component sub-seeds."""

from __future__ import annotations

import hashlib

__all__ = ["derive_seed", "MAX_SEED"]

MAX_SEED = 2**64 - 1


def derive_seed(seed, *names):
    """64-bit sub-seed from ``blake2b(seed, name, ...)``.

    Sub-seeds for different names are independent in practice, and the same
    ``(seed, names)`` always maps to the same value.
    """
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    h = hashlib.blake2b(digest_size=8)
    h.update(seed.to_bytes(8, "little"))
    for name in names:
        h.update(b"\x00" + str(name).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")
