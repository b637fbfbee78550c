import math

import numpy as np
from django.test import SimpleTestCase

from lattice_snn.exceptions import InputDataError

from .poisson import EncoderParams, boost_rates, encode
from .streams import RandomStreams

# 99th percentile of chi-square with 50 degrees of freedom
CHI2_50_P99 = 76.154


class EncodeTests(SimpleTestCase):
    """Bernoulli thinning of a Poisson process"""

    def test_zero_intensity_never_fires(self):
        """Test a black pixel produces no spikes"""
        spikes = encode(np.zeros(10), EncoderParams(rng_seed=1))
        self.assertEqual(spikes.shape, (700, 10))
        self.assertFalse(spikes.any())

    def test_full_intensity_mean_count(self):
        """Test the mean count over 10,000 trials is within 3 sigma of 22.3125"""
        params = EncoderParams(max_rate=63.75, duration=350.0, dt=0.5, rng_seed=2)
        trials = 10_000
        counts = encode(np.ones(trials), params).sum(axis=0)
        n, p = params.timesteps, params.spike_probability
        self.assertAlmostEqual(n * p, 22.3125)
        sigma = math.sqrt(n * p * (1 - p)) / math.sqrt(trials)
        self.assertLess(abs(counts.mean() - n * p), 3 * sigma)

    def test_same_seed_is_deterministic(self):
        """Test identical seeds give identical matrices"""
        image = np.linspace(0, 1, 30)
        params = EncoderParams(rng_seed=42)
        np.testing.assert_array_equal(encode(image, params), encode(image, params))

    def test_rates_fit_intensities(self):
        """Test chi-square goodness of fit on 50 pixels over 10k steps"""
        rng = np.random.default_rng(3)
        image = rng.uniform(0.2, 1.0, size=50)
        params = EncoderParams(duration=5000.0, rng_seed=4)
        counts = encode(image, params).sum(axis=0)
        n = params.timesteps
        p = image * params.spike_probability
        statistic = np.sum((counts - n * p) ** 2 / (n * p * (1 - p)))
        self.assertLess(statistic, CHI2_50_P99)

    def test_disjoint_windows_uncorrelated(self):
        """Test counts in the two halves of a presentation are uncorrelated"""
        params = EncoderParams(rng_seed=5)
        spikes = encode(np.full(20_000, 0.8), params)
        half = params.timesteps // 2
        first = spikes[:half].sum(axis=0)
        second = spikes[half:].sum(axis=0)
        self.assertLess(abs(np.corrcoef(first, second)[0, 1]), 0.05)

    def test_out_of_range_intensity(self):
        """Test intensities above 1 are refused"""
        with self.assertRaises(InputDataError):
            encode(np.array([0.5, 1.2]), EncoderParams())


class BoostTests(SimpleTestCase):
    """Rate boosting for quiet examples"""

    def test_zero_boost_is_identity(self):
        """Test boost 0 returns the same params"""
        params = EncoderParams()
        self.assertEqual(boost_rates(params, 0), params)

    def test_boost_adds(self):
        """Test 63.75 + 32 = 95.75"""
        self.assertEqual(boost_rates(EncoderParams(), 32).max_rate, 95.75)

    def test_repeated_boost_hits_probability_bound(self):
        """Test boosting until p >= 1 raises an input error"""
        params = EncoderParams()
        with self.assertRaises(InputDataError):
            for _ in range(100):
                params = boost_rates(params, 200)


class RandomStreamsTests(SimpleTestCase):
    """Labelled seed streams"""

    def test_streams_are_reproducible_and_distinct(self):
        """Test same label repeats, different labels differ"""
        streams = RandomStreams(7)
        a = streams.generator('weights').random(5)
        b = RandomStreams(7).generator('weights').random(5)
        c = streams.generator('mask').random(5)
        np.testing.assert_array_equal(a, b)
        self.assertFalse(np.array_equal(a, c))
        self.assertNotEqual(streams.seed('encoding', 0, 0), streams.seed('encoding', 0, 1))
