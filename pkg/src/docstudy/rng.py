"""Counter-based deterministic random streams.

Every sampling decision in the pipeline flows from a 64-bit stream keyed
by (corpus seed, document id, purpose tag), so regeneration is bit-exact
across platforms and independent of Python's random module internals.
"""

from __future__ import annotations

import hashlib

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def mix_key(seed: int, *tags: str) -> int:
    """Fold a seed and any number of string tags into one 64-bit key."""
    key = seed & _MASK
    for tag in tags:
        digest = hashlib.sha256(tag.encode("utf-8")).digest()
        key = _splitmix64(key ^ int.from_bytes(digest[:8], "big"))
    return key


class Stream:
    """SplitMix64 sequence with unbiased-enough bounded draws."""

    def __init__(self, key: int):
        self.key = key & _MASK
        self._state = self.key

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return (z ^ (z >> 31)) & _MASK

    def below(self, n: int) -> int:
        """Draw an integer in [0, n) via multiply-shift."""
        if n <= 0:
            raise ValueError("below() needs a positive bound")
        return (self.next_u64() * n) >> 64

    def choice(self, items):
        return items[self.below(len(items))]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices out of range(n), returned in ascending order."""
        if k > n:
            raise ValueError(f"cannot sample {k} from {n}")
        pool = list(range(n))
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return sorted(pool[:k])


def stream_for(seed: int, *tags: str) -> Stream:
    """Stream keyed by the corpus seed plus contextual tags."""
    return Stream(mix_key(seed, *tags))
