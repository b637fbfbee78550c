import zlib

import numpy as np


class RandomStreams:
    """
    Labelled, independent random streams derived from one run seed.

    Each stochastic site asks for its own generator, e.g.
    streams.generator('weights') or streams.seed('encoding', example, attempt),
    so any one component can be reproduced without replaying the others.
    """

    def __init__(self, seed):
        self.seed_value = int(seed)

    def _entropy(self, label, keys):
        return [self.seed_value, zlib.crc32(label.encode('utf-8')), *[int(k) for k in keys]]

    def generator(self, label, *keys):
        return np.random.default_rng(np.random.SeedSequence(self._entropy(label, keys)))

    def seed(self, label, *keys):
        """A plain integer seed for APIs that take one."""
        state = np.random.SeedSequence(self._entropy(label, keys)).generate_state(2, dtype=np.uint32)
        return int(state[0]) << 32 | int(state[1])
