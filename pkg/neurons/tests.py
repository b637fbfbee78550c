import math

import numpy as np
from django.test import SimpleTestCase

from lattice_snn.exceptions import ContractError, NumericalFaultError, StructuralError

from .lif import LifParams, NeuronGroup, reset_state, step
from .plasticity import (
    Connection,
    StdpParams,
    init_input_connection,
    normalize_incoming,
    stdp_step,
    update_traces,
)


def reference_lif(params, v0, exc_inputs, dt):
    """Scalar integrator following the same tick order as NeuronGroup.step."""
    v, g_e, g_i, theta, refrac = v0, 0.0, 0.0, 0.0, 0.0
    spike_ticks = []
    for tick, exc in enumerate(exc_inputs):
        refractory = refrac > 1e-9
        spiked = (not refractory) and v >= params.v_thresh_base + theta
        if spiked:
            v = params.v_reset
            refrac = params.refractory
            theta += params.theta_plus
            spike_ticks.append(tick)
        g_e += exc
        if not refractory and not spiked:
            v = v + (dt / params.tau_v) * (
                (params.v_rest - v) + g_e * (params.e_exc - v) + g_i * (params.e_inh - v)
            )
        g_e *= math.exp(-dt / params.tau_ge)
        g_i *= math.exp(-dt / params.tau_gi)
        if refractory:
            refrac = max(refrac - dt, 0.0)
            if refrac < 1e-9:
                refrac = 0.0
        theta *= math.exp(-dt / params.tau_theta)
    return spike_ticks


class NeuronStepTests(SimpleTestCase):
    """Tick-level behaviour of the LIF population"""

    def setUp(self):
        self.params = LifParams()
        self.dt = 0.5

    def test_resting_neuron_stays_at_rest(self):
        """Test that v_rest is a fixed point with no input"""
        group = NeuronGroup(1, self.params)
        spikes = step(group, self.dt, np.zeros(1), np.zeros(1))
        self.assertFalse(spikes[0])
        self.assertEqual(group.v[0], self.params.v_rest)

    def test_neuron_at_threshold_spikes_and_resets(self):
        """Test that v at threshold forces a spike regardless of input"""
        group = NeuronGroup(1, self.params)
        group.theta[:] = 0.7
        group.v[:] = self.params.v_thresh_base + 0.7
        spikes = step(group, self.dt, np.zeros(1), np.array([50.0]))
        self.assertTrue(spikes[0])
        self.assertEqual(group.v[0], self.params.v_reset)
        self.assertEqual(group.refrac_remaining[0], self.params.refractory)
        self.assertAlmostEqual(group.theta[0], (0.7 + self.params.theta_plus) * math.exp(-self.dt / self.params.tau_theta))

    def test_conductance_decays_in_closed_form(self):
        """Test that g_e decays by exp(-dt/tau_ge) per tick"""
        group = NeuronGroup(1, self.params)
        group.g_e[:] = 1.0
        step(group, self.dt, np.zeros(1), np.zeros(1))
        self.assertAlmostEqual(group.g_e[0], math.exp(-0.5), places=12)

    def test_decay_over_many_ticks_is_pure_exponential(self):
        """Test that k ticks of decay match exp(-k dt / tau) to 1e-12 relative"""
        group = NeuronGroup(3, self.params)
        group.g_e[:] = [1.0, 2.5, 0.3]
        group.g_i[:] = [0.4, 1.0, 3.0]
        start_e, start_i = group.g_e.copy(), group.g_i.copy()
        k = 40
        for _ in range(k):
            step(group, self.dt, np.zeros(3), np.zeros(3))
        np.testing.assert_allclose(group.g_e, start_e * math.exp(-k * self.dt / self.params.tau_ge), rtol=1e-12)
        np.testing.assert_allclose(group.g_i, start_i * math.exp(-k * self.dt / self.params.tau_gi), rtol=1e-12)

    def test_spike_times_match_scalar_reference(self):
        """Test two neurons against an independently coded scalar integrator"""
        dt = self.dt
        drive = [0.08, 0.2]
        group = NeuronGroup(2, self.params)
        group.v[:] = self.params.v_thresh_base - 1.0
        recorded = [[], []]
        for tick in range(200):
            spikes = step(group, dt, np.array(drive), np.zeros(2))
            for i in np.flatnonzero(spikes):
                recorded[i].append(tick)
        for i in range(2):
            expected = reference_lif(self.params, self.params.v_thresh_base - 1.0, [drive[i]] * 200, dt)
            self.assertEqual(recorded[i], expected)
        self.assertTrue(recorded[1])

    def test_voltage_relaxes_monotonically_without_overshoot(self):
        """Test decay toward v_rest with dt = tau_v / 20"""
        params = LifParams(v_thresh_base=0.0, tau_v=10.0)
        group = NeuronGroup(1, params)
        group.v[:] = -30.0
        previous = group.v[0]
        for _ in range(200):
            step(group, params.tau_v / 20, np.zeros(1), np.zeros(1))
            self.assertLessEqual(group.v[0], previous)
            self.assertGreaterEqual(group.v[0], params.v_rest)
            previous = group.v[0]

    def test_refractory_period_blocks_spikes(self):
        """Test no spike within ceil(refractory/dt) ticks after a spike, random drive"""
        rng = np.random.default_rng(7)
        params = LifParams(theta_plus=0.0)
        quiet = math.ceil(params.refractory / self.dt)
        group = NeuronGroup(20, params)
        last_spike = np.full(20, -10_000)
        for tick in range(3000):
            exc = rng.exponential(0.3, size=20) * (rng.random(20) < 0.5)
            spikes = step(group, self.dt, exc, np.zeros(20))
            for i in np.flatnonzero(spikes):
                self.assertGreater(tick - last_spike[i], quiet)
                last_spike[i] = tick
            self.assertTrue(np.all(group.refrac_remaining >= 0))
            self.assertTrue(np.all(group.refrac_remaining <= params.refractory))
        self.assertTrue(np.any(last_spike >= 0))

    def test_theta_constant_without_adaptation(self):
        """Test theta is untouched with theta_plus=0 and infinite tau_theta"""
        params = LifParams(theta_plus=0.0, tau_theta=math.inf)
        group = NeuronGroup(4, params)
        group.theta[:] = [0.1, 0.2, 0.3, 0.4]
        rng = np.random.default_rng(3)
        for _ in range(500):
            step(group, self.dt, rng.exponential(0.5, size=4), np.zeros(4))
        np.testing.assert_array_equal(group.theta, [0.1, 0.2, 0.3, 0.4])

    def test_frozen_theta_during_evaluation(self):
        """Test learning=False keeps theta fixed even when spiking"""
        group = NeuronGroup(1, self.params)
        group.theta[:] = 1.5
        group.v[:] = self.params.v_thresh_base + 2.0
        spikes = step(group, self.dt, np.zeros(1), np.zeros(1), learning=False)
        self.assertTrue(spikes[0])
        self.assertEqual(group.theta[0], 1.5)

    def test_length_mismatch_is_structural_error(self):
        """Test mismatched input lengths are rejected"""
        group = NeuronGroup(3, self.params)
        with self.assertRaises(StructuralError):
            step(group, self.dt, np.zeros(2), np.zeros(3))

    def test_non_finite_state_halts(self):
        """Test a NaN conductance raises a numerical fault"""
        group = NeuronGroup(2, self.params)
        with self.assertRaises(NumericalFaultError):
            step(group, self.dt, np.array([np.nan, 0.0]), np.zeros(2))

    def test_invalid_params_rejected(self):
        """Test v_reset above threshold is refused"""
        with self.assertRaises(ContractError):
            LifParams(v_reset=-40.0, v_thresh_base=-52.0)


class ResetStateTests(SimpleTestCase):
    """Inter-example state reset"""

    def test_reset_clears_dynamics_but_keeps_theta(self):
        """Test v, conductances and refractory counters reset, theta survives"""
        rng = np.random.default_rng(0)
        group = NeuronGroup(2, LifParams())
        group.v[:] = [-50.0, -70.0]
        group.g_e[:] = rng.random(2)
        group.g_i[:] = rng.random(2)
        group.refrac_remaining[:] = [1.0, 0.5]
        group.theta[:] = [0.5, 1.2]
        reset_state(group)
        np.testing.assert_array_equal(group.v, [-65.0, -65.0])
        np.testing.assert_array_equal(group.g_e, [0.0, 0.0])
        np.testing.assert_array_equal(group.g_i, [0.0, 0.0])
        np.testing.assert_array_equal(group.refrac_remaining, [0.0, 0.0])
        np.testing.assert_array_equal(group.theta, [0.5, 1.2])
        self.assertFalse(group.spiked.any())


class TraceTests(SimpleTestCase):
    """Pre/post trace bookkeeping"""

    def setUp(self):
        self.stdp = StdpParams(tau_trace=20.0)

    def test_trace_decays_one_tick(self):
        """Test exp(-0.5/20) decay of a unit trace"""
        conn = Connection(2, 2, stdp=self.stdp)
        conn.x_pre[0] = 1.0
        update_traces(conn, 0.5, np.zeros(2, bool), np.zeros(2, bool))
        self.assertAlmostEqual(conn.x_pre[0], math.exp(-0.025), places=12)
        self.assertAlmostEqual(conn.x_pre[0], 0.97531, places=5)

    def test_spike_sets_trace_to_one(self):
        """Test the set-to-one rule"""
        conn = Connection(2, 2, stdp=self.stdp)
        conn.x_pre[1] = 0.3
        update_traces(conn, 0.5, np.array([False, True]), np.zeros(2, bool))
        self.assertEqual(conn.x_pre[1], 1.0)

    def test_traces_match_event_time_reconstruction(self):
        """Test 100 random ticks against the closed form exp(-(t - t_last) dt / tau)"""
        rng = np.random.default_rng(11)
        dt = 0.5
        conn = Connection(6, 4, stdp=self.stdp)
        pre_history = rng.random((100, 6)) < 0.1
        post_history = rng.random((100, 4)) < 0.1
        for pre, post in zip(pre_history, post_history):
            update_traces(conn, dt, pre, post)

        def closed_form(history):
            out = []
            last_tick = len(history) - 1
            for column in history.T:
                fired = np.flatnonzero(column)
                if fired.size == 0:
                    out.append(0.0)
                else:
                    out.append(math.exp(-(last_tick - fired[-1]) * dt / self.stdp.tau_trace))
            return np.array(out)

        np.testing.assert_allclose(conn.x_pre, closed_form(pre_history), atol=1e-10)
        np.testing.assert_allclose(conn.x_post, closed_form(post_history), atol=1e-10)

    def test_length_mismatch(self):
        """Test wrong spike vector length is a structural error"""
        conn = Connection(3, 2, stdp=self.stdp)
        with self.assertRaises(StructuralError):
            update_traces(conn, 0.5, np.zeros(2, bool), np.zeros(2, bool))


class StdpTests(SimpleTestCase):
    """Weight updates under the online rule"""

    def test_potentiation_from_zero(self):
        """Test dw = eta_post * w_max with a saturated pre trace"""
        conn = Connection(1, 1, stdp=StdpParams(eta_post=0.01, w_max=1.0))
        conn.x_pre[0] = 1.0
        stdp_step(conn, np.array([False]), np.array([True]))
        self.assertAlmostEqual(conn.w[0, 0], 0.01)

    def test_zero_post_trace_blocks_depression(self):
        """Test a pre spike with x_post=0 leaves w unchanged"""
        conn = Connection(1, 1, w=np.array([[0.4]]), stdp=StdpParams())
        stdp_step(conn, np.array([True]), np.array([False]))
        self.assertEqual(conn.w[0, 0], 0.4)

    def test_soft_bound_at_w_max(self):
        """Test no potentiation beyond w_max"""
        conn = Connection(1, 1, w=np.array([[1.0]]), stdp=StdpParams(w_max=1.0))
        conn.x_pre[0] = 1.0
        stdp_step(conn, np.array([False]), np.array([True]))
        self.assertEqual(conn.w[0, 0], 1.0)

    def test_missing_stdp_is_contract_error(self):
        """Test stdp_step without parameters"""
        conn = Connection(1, 1)
        with self.assertRaises(ContractError):
            stdp_step(conn, np.array([True]), np.array([True]))

    def test_matches_per_synapse_loop(self):
        """Test a 20x20 random history against a naive per-synapse loop"""
        rng = np.random.default_rng(5)
        rule = StdpParams(eta_pre=0.05, eta_post=0.1, w_max=1.0, tau_trace=20.0)
        mask = rng.random((20, 20)) < 0.8
        w0 = rng.random((20, 20)) * mask
        conn = Connection(20, 20, w=w0.copy(), mask=mask, stdp=rule)
        w = w0.copy()
        x_pre = np.zeros(20)
        x_post = np.zeros(20)
        decay = math.exp(-0.5 / rule.tau_trace)
        for _ in range(200):
            pre = rng.random(20) < 0.1
            post = rng.random(20) < 0.1
            update_traces(conn, 0.5, pre, post)
            stdp_step(conn, pre, post)
            for i in range(20):
                x_pre[i] = 1.0 if pre[i] else x_pre[i] * decay
            for j in range(20):
                x_post[j] = 1.0 if post[j] else x_post[j] * decay
            for i in range(20):
                for j in range(20):
                    if not mask[i, j]:
                        continue
                    if post[j]:
                        w[i, j] += rule.eta_post * x_pre[i] * (rule.w_max - w[i, j])
                    if pre[i]:
                        w[i, j] -= rule.eta_pre * x_post[j] * w[i, j]
                    w[i, j] = min(max(w[i, j], 0.0), rule.w_max)
        np.testing.assert_allclose(conn.w, w, atol=1e-12)

    def test_weights_stay_bounded(self):
        """Test 10k random ticks keep every weight in [0, w_max] and masked-out at 0"""
        rng = np.random.default_rng(9)
        rule = StdpParams(eta_pre=0.3, eta_post=0.4, w_max=0.8)
        mask = rng.random((12, 10)) < 0.7
        conn = Connection(12, 10, w=rng.random((12, 10)) * 0.8, mask=mask, stdp=rule)
        for _ in range(10_000):
            pre = rng.random(12) < 0.2
            post = rng.random(10) < 0.2
            update_traces(conn, 0.5, pre, post)
            stdp_step(conn, pre, post)
        self.assertGreaterEqual(conn.w.min(), 0.0)
        self.assertLessEqual(conn.w.max(), rule.w_max)
        self.assertTrue(np.all(conn.w[~mask] == 0.0))

    def test_alternating_spikes_converge_to_equilibrium(self):
        """Test convergence to w* = eta_post w_max / (eta_post + eta_pre) within 1%"""
        rule = StdpParams(eta_pre=0.0001, eta_post=0.01, w_max=1.0)
        conn = Connection(1, 1, w=np.array([[0.2]]), stdp=rule)
        both = np.array([True])
        for _ in range(5000):
            update_traces(conn, 0.5, both, both)
            stdp_step(conn, both, both)
        expected = rule.eta_post * rule.w_max / (rule.eta_post + rule.eta_pre)
        self.assertLess(abs(conn.w[0, 0] - expected) / expected, 0.01)


class NormalizationTests(SimpleTestCase):
    """Column normalisation to c_norm"""

    def test_columns_scaled_to_target(self):
        """Test column sums 2 and 4 both become 62.5"""
        w = np.array([[1.0, 3.0], [1.0, 1.0]])
        conn = Connection(2, 2, w=w, c_norm=62.5)
        normalize_incoming(conn)
        np.testing.assert_allclose(conn.w.sum(axis=0), [62.5, 62.5])

    def test_zero_column_untouched(self):
        """Test an all-zero column is left alone"""
        w = np.array([[0.0, 1.0], [0.0, 2.0]])
        conn = Connection(2, 2, w=w, c_norm=10.0)
        normalize_incoming(conn)
        np.testing.assert_array_equal(conn.w[:, 0], [0.0, 0.0])

    def test_sparse_column_only_scales_masked_entries(self):
        """Test masked-out synapses stay zero under normalisation"""
        rng = np.random.default_rng(2)
        mask = rng.random((100, 3)) < 0.1
        mask[0, :] = True
        conn = Connection(100, 3, w=rng.random((100, 3)), mask=mask, c_norm=5.0)
        normalize_incoming(conn)
        self.assertTrue(np.all(conn.w[~mask] == 0.0))
        np.testing.assert_allclose(conn.w.sum(axis=0), [5.0, 5.0, 5.0])

    def test_idempotent(self):
        """Test normalising twice equals normalising once"""
        rng = np.random.default_rng(4)
        conn = Connection(30, 8, w=rng.random((30, 8)), c_norm=7.84)
        normalize_incoming(conn)
        once = conn.w.copy()
        normalize_incoming(conn)
        np.testing.assert_allclose(conn.w, once, rtol=1e-12, atol=1e-12)

    def test_initialised_connection_is_normalised(self):
        """Test random init followed by normalisation hits c_norm"""
        rng = np.random.default_rng(1)
        conn = init_input_connection(784, 4, rng, StdpParams(), c_norm=78.4)
        np.testing.assert_allclose(conn.w.sum(axis=0), [78.4] * 4)
        self.assertLessEqual(conn.w.max(), 1.0)

    def test_overshoot_is_capped_and_redistributed(self):
        """Test normalisation never lifts a weight above w_max"""
        w = np.array([[0.9, 0.25], [0.05, 0.25], [0.05, 0.25], [0.0, 0.25]])
        conn = Connection(4, 2, w=w, stdp=StdpParams(w_max=1.0), c_norm=2.0)
        normalize_incoming(conn)
        np.testing.assert_allclose(conn.w[:, 0], [1.0, 0.5, 0.5, 0.0])
        np.testing.assert_allclose(conn.w.sum(axis=0), [2.0, 2.0])
        self.assertLessEqual(conn.w.max(), 1.0)

    def test_capped_normalisation_is_idempotent(self):
        """Test a capped column is a fixed point of normalisation"""
        rng = np.random.default_rng(6)
        w = rng.random((10, 5)) ** 4
        conn = Connection(10, 5, w=w, stdp=StdpParams(w_max=0.5), c_norm=2.0)
        normalize_incoming(conn)
        once = conn.w.copy()
        normalize_incoming(conn)
        np.testing.assert_allclose(conn.w, once, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(conn.w.sum(axis=0), [2.0] * 5)

    def test_unreachable_target_saturates(self):
        """Test a column that cannot reach c_norm ends at w_max"""
        w = np.array([[0.2], [0.1], [0.0]])
        conn = Connection(3, 1, w=w, stdp=StdpParams(w_max=1.0), c_norm=5.0)
        normalize_incoming(conn)
        np.testing.assert_allclose(conn.w[:, 0], [1.0, 1.0, 0.0])

    def test_quiet_columns_keep_their_sum_after_stdp(self):
        """Test a pre spike without post activity leaves column sums alone"""
        w = np.array([[0.9, 0.25], [0.05, 0.25], [0.05, 0.25], [0.0, 0.25]])
        conn = Connection(4, 2, w=w, stdp=StdpParams(w_max=1.0), c_norm=2.0)
        normalize_incoming(conn)
        update_traces(conn, 0.5, [False, False, False, True], [False, False])
        stdp_step(conn, [False, False, False, True], [False, False])
        np.testing.assert_allclose(conn.w.sum(axis=0), [2.0, 2.0])
