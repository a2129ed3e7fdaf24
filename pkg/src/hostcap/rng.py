"""Deterministic, hierarchically addressed random streams.

All randomness in the package flows through :class:`RngStream` so that
Monte Carlo work units (planning cells, scenarios, purposes) can be
generated in any order, in any number of workers, with identical results.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np


def _as_path_part(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream path parts must be non-negative integers")
        return int(part)
    raise TypeError(f"stream path part must be int or str, got {type(part).__name__}")


@dataclass(frozen=True)
class RngStream:
    """Counter-addressed random stream.

    Identical ``(master_seed, path)`` pairs yield bitwise-identical draw
    sequences; distinct paths yield statistically independent streams.
    Derivation is pure (no hidden state), so streams can be spawned on
    demand inside parallel workers.
    """

    master_seed: int
    path: tuple[int, ...] = ()

    def child(self, *parts: int | str) -> "RngStream":
        """Derive a sub-stream addressed by ``parts`` (ints or string tags)."""
        return RngStream(self.master_seed, self.path + tuple(_as_path_part(p) for p in parts))

    def generator(self) -> np.random.Generator:
        """Fresh PCG64 generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(seq))
