"""Counter-based random streams.

Every Monte Carlo path owns its own stream, keyed by (seed, stream_id).
Philox is counter-based, so constructing a generator from a key is cheap
and streams with distinct keys are statistically independent, while
identical keys reproduce bit-identical sequences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1

# Stream-id slots per Monte Carlo sample for multi-component noise
# (slot 0: subordinator clock, slots 1..: Brownian coordinates).
# Truncating a spectral model never re-keys surviving coordinates.
MAXK = 4096


@dataclass(frozen=True)
class RandomStream:
    """Key of an independent random stream: (seed, stream_id)."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed & _MASK64, self.stream_id & _MASK64],
                       dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, offset: int) -> "RandomStream":
        """Derived stream at stream_id + offset (for per-sample slots)."""
        return RandomStream(self.seed, self.stream_id + offset)


def sample_stream(seed: int, sample: int, slot: int = 0) -> RandomStream:
    """Stream for noise slot `slot` of Monte Carlo sample `sample`.

    slot 0 drives the subordinator clock of the sample; slots 1..MAXK-1
    drive Brownian coordinates, so spectral truncation levels that share
    a coordinate index share its noise bit-for-bit.
    """
    if not 0 <= slot < MAXK:
        raise ValueError(f"slot must be in [0, {MAXK})")
    return RandomStream(seed, sample * MAXK + slot)
