"""Counter-based random streams.

Draw ``i`` of a stream with key ``K`` is ``mix64(K + GOLDEN * (i + 1))``, where
``mix64`` is the SplitMix64 finaliser; a uniform double keeps the top 53 bits.
Stream keys are derived from ``(seed, stream id)``, so every sample path owns
an independent stream and any path can be regenerated in isolation. The
compiled and pure-Python kernels implement the same function bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

from smcmdp import kernels

MASK64 = (1 << 64) - 1
# auxiliary streams (completion draws for fragment traversals) use a salted seed
AUX_SALT = 0xA0761D6478BD642F


def path_key(seed: int, path: int) -> int:
    return kernels.stream_key(seed & MASK64, path & MASK64)


def aux_key(seed: int, path: int) -> int:
    return kernels.stream_key((seed ^ AUX_SALT) & MASK64, path & MASK64)


@dataclass
class Stream:
    key: int
    counter: int = 0

    @classmethod
    def for_path(cls, seed: int, path: int, aux: bool = False) -> Stream:
        return cls(aux_key(seed, path) if aux else path_key(seed, path))

    def uniform(self) -> float:
        u = kernels.draw_uniform(self.key, self.counter)
        self.counter += 1
        return u

    def index(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        return int(self.uniform() * n)
