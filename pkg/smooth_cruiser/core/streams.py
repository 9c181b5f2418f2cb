"""Counter-based random streams.

Every uniform draw is a pure function of ``(seed, stream_id, block_size,
index)``: draws are produced in fixed-size blocks by a Philox generator keyed on
``(seed, stream_id)`` whose counter is positioned at the block number. Two
streams built alike always agree, whatever order or thread the draws are taken
from.
"""

import threading
from typing import Dict

import numpy as np

from smooth_cruiser.core.errors import InvalidArgumentError

_UINT64 = (1 << 64) - 1


class CounterStream:
    def __init__(self, seed: int, stream_id: int = 0, block_size: int = 4096):
        if seed < 0 or stream_id < 0:
            raise InvalidArgumentError(
                f"seed and stream id must be nonnegative, got {seed}, {stream_id}"
            )
        if block_size < 1:
            raise InvalidArgumentError(f"block size must be positive, got {block_size}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.block_size = int(block_size)
        self._key = np.array(
            [self.seed & _UINT64, self.stream_id & _UINT64], dtype=np.uint64
        )
        self._blocks: Dict[int, np.ndarray] = {}
        self._position = 0
        self._lock = threading.Lock()

    def _block(self, number: int) -> np.ndarray:
        block = self._blocks.get(number)
        if block is None:
            # one counter word per block keeps blocks disjoint
            bit_generator = np.random.Philox(key=self._key, counter=number << 64)
            block = np.random.Generator(bit_generator).random(self.block_size)
            if len(self._blocks) >= 8:
                self._blocks.pop(next(iter(self._blocks)))
            self._blocks[number] = block
        return block

    def values(self, start: int, count: int) -> np.ndarray:
        """Draws ``start .. start+count-1`` of the stream, uniform on [0, 1)."""
        out = np.empty(count)
        filled = 0
        with self._lock:
            while filled < count:
                index = start + filled
                number, offset = divmod(index, self.block_size)
                take = min(count - filled, self.block_size - offset)
                block = self._block(number)
                out[filled : filled + take] = block[offset : offset + take]
                filled += take
        return out

    def take(self, count: int = 1) -> np.ndarray:
        """Consume the next ``count`` draws; safe to call from several threads."""
        with self._lock:
            start = self._position
            self._position += count
        return self.values(start, count)

    def uniform(self) -> float:
        return float(self.take(1)[0])

    @property
    def position(self) -> int:
        return self._position

    def spawn(self, stream_id: int, block_size: int = 64) -> "CounterStream":
        """Independent stream sharing this seed, e.g. one per consistency run."""
        return CounterStream(self.seed, stream_id, block_size=block_size)
