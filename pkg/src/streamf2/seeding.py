"""Seed derivation tree: root seed -> module tag -> trial index.

All randomness in the package flows from a 64-bit root seed through
:func:`derive_seed`; no module touches global RNG state.
"""
import zlib

import numpy as np


def tag_id(tag):
    """Stable 32-bit integer for a text tag."""
    return zlib.crc32(tag.encode("utf-8"))


def derive_seed(root, tag, *indices):
    """Child 64-bit seed for ``(root, tag, indices...)``.

    Uses numpy's SeedSequence spawn keys, so siblings are statistically
    independent and the mapping is stable across platforms.
    """
    key = (tag_id(tag),) + tuple(int(i) for i in indices)
    ss = np.random.SeedSequence(entropy=int(root) & (2**64 - 1), spawn_key=key)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rng_for(root, tag, *indices):
    return np.random.default_rng(derive_seed(root, tag, *indices))
