import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from lattice_snn.exceptions import InputDataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EncoderParams:
    max_rate: float = 63.75
    duration: float = 350.0
    dt: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_rate < 0:
            raise InputDataError('max_rate must be >= 0')
        if self.duration <= 0 or self.dt <= 0:
            raise InputDataError('duration and dt must be positive')
        if self.spike_probability >= 1.0:
            raise InputDataError(
                f"max_rate {self.max_rate} Hz at dt {self.dt} ms gives per-step "
                f"probability {self.spike_probability:.3f} >= 1"
            )

    @property
    def spike_probability(self):
        return self.max_rate * self.dt / 1000.0

    @property
    def timesteps(self):
        return int(math.floor(self.duration / self.dt + 1e-9))


def encode(image, params, rng=None):
    """
    Bernoulli-per-step spike matrix (timesteps x pixels).

    Pixel p fires with probability intensity[p] * max_rate * dt / 1000 each
    step. rng defaults to a generator seeded with params.rng_seed.
    """
    image = np.asarray(image, dtype=np.float64).ravel()
    if image.size and (image.min() < 0.0 or image.max() > 1.0):
        raise InputDataError(
            f"Intensities must lie in [0, 1], got [{image.min()}, {image.max()}]"
        )
    if rng is None:
        rng = np.random.default_rng(params.rng_seed)
    probability = image * params.spike_probability
    return rng.random((params.timesteps, image.size)) < probability[None, :]


def boost_rates(params, boost):
    """Raise max_rate by boost Hz; the caller re-encodes with a fresh seed."""
    if boost < 0:
        raise InputDataError('boost must be >= 0')
    if boost == 0:
        return params
    return replace(params, max_rate=params.max_rate + boost)
