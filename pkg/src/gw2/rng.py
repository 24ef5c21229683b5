"""Counter-based random streams.

A :class:`Stream` is a splitmix64 sequence; independent streams are derived
from a 64-bit master seed and a stream id by hashing, never by jumping, so
stream ``i`` of a given master seed produces the same draws no matter how many
workers run or in which order streams are consumed.
"""

import numpy as np

from . import _kernels as _k


class Stream:
    """Mutable handle on one splitmix64 stream."""

    __slots__ = ("_state",)

    def __init__(self, state):
        self.state = state

    @property
    def state(self):
        return self._state

    @state.setter
    def state(self, value):
        # kernels hand back plain ints; keep uint64 so re-dispatch never
        # overflows the default int64 typing
        self._state = np.uint64(value)

    @classmethod
    def from_seed(cls, master_seed, stream_id=0):
        return cls(_k.stream_seed(np.uint64(master_seed), np.uint64(stream_id)))

    def next_u64(self):
        value, self.state = _k.next_u64(self.state)
        return int(value)

    def next_uniform(self):
        """Uniform double strictly inside (0, 1)."""
        value, self.state = _k.next_uniform(self.state)
        return float(value)

    def spawn(self, stream_id):
        """Derive an independent child stream keyed by ``stream_id``."""
        return Stream(_k.stream_seed(self.state, np.uint64(stream_id)))
