"""Counter-based random substreams.

Every path gets its own Philox generator keyed by ``(seed, stream_id)``.
Streams are independent of how paths are assigned to worker threads, so
ensembles are bit-identical for any worker count.  Experiment-level
sub-seeds are derived with a splitmix64 chain so that distinct purposes
(scan cells, anchors, controls) never share a stream with the base seed.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_seed", "substream"]

_MASK64 = 0xFFFFFFFFFFFFFFFF


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def _tag_to_int(tag: int | str) -> int:
    if isinstance(tag, str):
        digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    return tag & _MASK64


def derive_seed(seed: int, *tags: int | str) -> int:
    """Derive a deterministic child seed from ``seed`` and a tag sequence.

    Mixing is a splitmix64 chain; string tags are hashed first.  Children
    with different tag sequences are decorrelated from each other and from
    the parent.
    """
    x = _splitmix64(seed & _MASK64)
    for tag in tags:
        x = _splitmix64(x ^ _tag_to_int(tag))
    return x


def substream(seed: int, stream_id: int) -> np.random.Generator:
    """Return the generator for one counter-based substream.

    The (seed, stream_id) pair fully determines every draw, regardless of
    how many other streams exist or in which order they are consumed.
    """
    key = np.array([seed & _MASK64, stream_id & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
