"""Reproducible counter-based random streams.

A stream is identified by (seed, stream); identical pairs reproduce identical
output bit-exactly, and distinct stream ids give statistically independent
Philox streams.  Replicas and helper substreams (e.g. the holding-time stream
of a trajectory) derive their ids deterministically, so results do not depend
on scheduling or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass
from hashlib import blake2b

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed & _MASK64, self.stream & _MASK64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def derive(self, *tags) -> "RngStream":
        """Child stream keyed by (this stream, tags); stable across runs."""
        payload = repr((self.stream & _MASK64,) + tags).encode()
        h = blake2b(payload, digest_size=8).digest()
        return RngStream(self.seed, int.from_bytes(h, "little"))

    def spawn(self, index: int) -> "RngStream":
        """Replica substream for worker/replica `index`."""
        return self.derive("replica", int(index))
