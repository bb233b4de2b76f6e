"""Seeded, substream-keyed random number generation.

Every noise consumer asks for its own stream, keyed by (seed, epoch, purpose
tag). Streams are counter-based (Philox), so adding a new consumer never
perturbs the draws of existing ones, and identical keys reproduce identical
draws bit for bit.
"""

from __future__ import annotations

import zlib

import numpy as np


class SeededRng:
    """Factory for independent, reproducible generator substreams."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF

    def stream(self, purpose: str, epoch: int = 0) -> np.random.Generator:
        """Generator for one (purpose, epoch) substream; same key, same draws."""
        tag = zlib.crc32(purpose.encode("utf-8"))
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(int(epoch), tag))
        return np.random.Generator(np.random.Philox(seed=ss))
