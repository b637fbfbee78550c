import math

import numpy as np
from django.test import SimpleTestCase

from lattice_snn.exceptions import ContractError

from .lattice import Lattice, constant_inhibition, pairwise_inhibition
from .schedules import GROWING, TWO_LEVEL, InhibitionSchedule, effective_level


class LatticeTests(SimpleTestCase):
    """Grid geometry"""

    def test_positions_cover_grid(self):
        """Test positions are exactly {0..side-1}^2"""
        lattice = Lattice(4)
        cells = {tuple(p) for p in lattice.positions}
        self.assertEqual(cells, {(x, y) for x in range(4) for y in range(4)})

    def test_non_square_count_rejected(self):
        """Test 600 neurons cannot form a lattice"""
        with self.assertRaises(ContractError):
            Lattice.for_neurons(600)
        self.assertEqual(Lattice.for_neurons(625).side, 25)


class PairwiseInhibitionTests(SimpleTestCase):
    """Distance-profile inhibition matrix"""

    def test_three_four_five_distance(self):
        """Test (0,0)-(3,4) gives 5.0 below the cap"""
        lattice = Lattice(5)
        matrix = pairwise_inhibition(lattice, 1.0, 17.5)
        i = 0 * 5 + 0
        j = 3 * 5 + 4
        self.assertAlmostEqual(matrix[i, j], 5.0)

    def test_cap_applies(self):
        """Test distance 25 with c_inhib=1 is capped at 17.5"""
        lattice = Lattice(26)
        matrix = pairwise_inhibition(lattice, 1.0, 17.5)
        self.assertEqual(matrix[0, 25], 17.5)

    def test_zero_diagonal(self):
        """Test no self-inhibition"""
        matrix = pairwise_inhibition(Lattice(3), 2.0, 10.0)
        np.testing.assert_array_equal(np.diag(matrix), np.zeros(9))

    def test_matches_pairwise_loop(self):
        """Test a 5x5 lattice against a direct O(n^2) loop, exactly"""
        side = 5
        c_inhib, c_max = 1.3, 4.0
        matrix = pairwise_inhibition(Lattice(side), c_inhib, c_max)
        for i in range(side * side):
            for j in range(side * side):
                if i == j:
                    expected = 0.0
                else:
                    dx = i // side - j // side
                    dy = i % side - j % side
                    expected = min(c_inhib * math.hypot(dx, dy), c_max)
                self.assertEqual(matrix[i, j], expected)
        np.testing.assert_array_equal(matrix, matrix.T)

    def test_monotone_in_distance_and_strength(self):
        """Test entries never decrease with distance or with c_inhib"""
        rng = np.random.default_rng(8)
        lattice = Lattice(8)
        distance = lattice.distances()
        weak = pairwise_inhibition(lattice, 0.5, 6.0)
        strong = pairwise_inhibition(lattice, 0.9, 6.0)
        self.assertTrue(np.all(strong >= weak))
        for _ in range(500):
            i, j, k = rng.integers(0, lattice.n, size=3)
            if i in (j, k):
                continue
            if distance[i, j] <= distance[i, k]:
                self.assertLessEqual(weak[i, j], weak[i, k])

    def test_sqrt_distance_switch(self):
        """Test the square-root reading of the profile"""
        lattice = Lattice(5)
        matrix = pairwise_inhibition(lattice, 1.0, 17.5, sqrt_distance=True)
        self.assertAlmostEqual(matrix[0, 3 * 5 + 4], math.sqrt(5.0))


class ConstantInhibitionTests(SimpleTestCase):
    """Baseline uniform inhibition"""

    def test_off_diagonal_level(self):
        """Test n=3, level=20"""
        matrix = constant_inhibition(3, 20.0)
        expected = np.full((3, 3), 20.0)
        np.fill_diagonal(expected, 0.0)
        np.testing.assert_array_equal(matrix, expected)

    def test_zero_level(self):
        """Test level 0 gives no competition"""
        np.testing.assert_array_equal(constant_inhibition(4, 0.0), np.zeros((4, 4)))

    def test_two_level_high_phase_equals_baseline(self):
        """Test the high phase matrix equals constant c_max on a 10x10 lattice"""
        lattice = Lattice(10)
        schedule = InhibitionSchedule(kind=TWO_LEVEL, c_min=1.0, c_max=20.0, p_low=0.1)
        level = schedule.effective_level(0.5)
        np.testing.assert_array_equal(schedule.matrix(lattice, level), constant_inhibition(100, 20.0))

    def test_low_phase_strictly_below_high_phase(self):
        """Test c_min * max_distance < c_max keeps the low matrix below the high one"""
        lattice = Lattice(6)
        schedule = InhibitionSchedule(kind=TWO_LEVEL, c_min=1.0, c_max=20.0, p_low=0.1)
        low = schedule.matrix(lattice, schedule.effective_level(0.0))
        high = schedule.matrix(lattice, schedule.effective_level(1.0))
        off = ~np.eye(lattice.n, dtype=bool)
        self.assertTrue(np.all(low[off] < high[off]))


class ScheduleTests(SimpleTestCase):
    """Progress to level mapping"""

    def test_two_level_before_and_at_boundary(self):
        """Test c_min before p_low and c_max from p_low on"""
        schedule = InhibitionSchedule(kind=TWO_LEVEL, c_min=1.0, c_max=20.0, p_low=0.1)
        self.assertEqual(effective_level(schedule, 0.05), 1.0)
        self.assertEqual(effective_level(schedule, 0.1), 20.0)

    def test_growing_midpoint(self):
        """Test linear interpolation at half progress"""
        schedule = InhibitionSchedule(kind=GROWING, c_min=0.1, c_max=17.5, p_grow=1.0)
        self.assertAlmostEqual(effective_level(schedule, 0.5), 8.8)

    def test_growing_with_zero_p_grow_jumps(self):
        """Test p_grow=0 means c_max immediately"""
        schedule = InhibitionSchedule(kind=GROWING, c_min=0.1, c_max=17.5, p_grow=0.0)
        self.assertEqual(effective_level(schedule, 0.0), 17.5)

    def test_constant_and_increasing_ignore_progress(self):
        """Test c_inhib is returned whatever the progress"""
        for kind in ('constant', 'increasing'):
            schedule = InhibitionSchedule(kind=kind, c_inhib=3.0)
            self.assertEqual(effective_level(schedule, 0.0), 3.0)
            self.assertEqual(effective_level(schedule, 1.0), 3.0)

    def test_levels_non_decreasing(self):
        """Test growing and two_level never decrease along progress"""
        for schedule in (
            InhibitionSchedule(kind=GROWING, c_min=0.1, c_max=17.5, p_grow=0.6),
            InhibitionSchedule(kind=TWO_LEVEL, c_min=1.0, c_max=20.0, p_low=0.25),
        ):
            levels = [schedule.effective_level(p) for p in np.linspace(0, 1, 101)]
            self.assertTrue(all(b >= a for a, b in zip(levels, levels[1:])))

    def test_absolute_n_low(self):
        """Test n_low switches on an example count without a planned total"""
        schedule = InhibitionSchedule(kind=TWO_LEVEL, c_min=1.0, c_max=20.0, n_low=6000)
        self.assertEqual(schedule.level_at(5999), 1.0)
        self.assertEqual(schedule.level_at(6000), 20.0)

    def test_invalid_schedule(self):
        """Test c_min above c_max is refused"""
        with self.assertRaises(ContractError):
            InhibitionSchedule(c_min=5.0, c_max=1.0)
        with self.assertRaises(ContractError):
            InhibitionSchedule(kind='gaussian')
