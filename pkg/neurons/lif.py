"""
Conductance-based leaky integrate-and-fire populations.

One call to NeuronGroup.step advances every neuron by a single clock tick.
Order inside a tick is frozen:

    1. threshold test on the state left by the previous tick
       (non-refractory neurons with v >= v_thresh_base + theta spike,
       are reset and enter their refractory period)
    2. conductance increments: g_e += exc_input, g_i += inh_input
    3. forward-Euler membrane update for neurons that are neither
       refractory nor spiking this tick
    4. exponential conductance decay
    5. refractory countdown, theta decay
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from lattice_snn.exceptions import ContractError, NumericalFaultError, StructuralError

logger = logging.getLogger(__name__)

# Remaining refractory time below this is treated as zero (float drift of dt sums)
_REFRACTORY_EPS = 1e-9


@dataclass(frozen=True)
class LifParams:
    v_rest: float = -65.0
    v_reset: float = -65.0
    v_thresh_base: float = -52.0
    tau_v: float = 100.0
    e_exc: float = 0.0
    e_inh: float = -100.0
    tau_ge: float = 1.0
    tau_gi: float = 2.0
    refractory: float = 5.0
    theta_plus: float = 0.05
    tau_theta: float = 1e7
    theta_enabled: bool = True

    def __post_init__(self):
        problems = []
        if not (self.tau_v > 0 and self.tau_ge > 0 and self.tau_gi > 0):
            problems.append('tau_v, tau_ge and tau_gi must be positive')
        if self.tau_theta <= 0:
            problems.append('tau_theta must be positive')
        if self.refractory < 0:
            problems.append('refractory must be >= 0')
        if self.theta_plus < 0:
            problems.append('theta_plus must be >= 0')
        if self.v_reset > self.v_thresh_base:
            problems.append('v_reset must not exceed v_thresh_base')
        if problems:
            raise ContractError("Invalid LifParams: " + "; ".join(problems))

    @classmethod
    def inhibitory(cls, **overrides):
        """Defaults of the relay population in the three-layer network."""
        values = dict(
            v_rest=-60.0,
            v_reset=-45.0,
            v_thresh_base=-40.0,
            tau_v=10.0,
            refractory=2.0,
            theta_plus=0.0,
            theta_enabled=False,
        )
        values.update(overrides)
        return cls(**values)


@dataclass
class NeuronGroup:
    n: int
    params: LifParams
    v: np.ndarray = field(default=None)
    g_e: np.ndarray = field(default=None)
    g_i: np.ndarray = field(default=None)
    theta: np.ndarray = field(default=None)
    refrac_remaining: np.ndarray = field(default=None)
    spiked: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.n <= 0:
            raise StructuralError(f"NeuronGroup needs n > 0, got {self.n}")
        if self.v is None:
            self.v = np.full(self.n, self.params.v_rest, dtype=np.float64)
        if self.g_e is None:
            self.g_e = np.zeros(self.n)
        if self.g_i is None:
            self.g_i = np.zeros(self.n)
        if self.theta is None:
            self.theta = np.zeros(self.n)
        if self.refrac_remaining is None:
            self.refrac_remaining = np.zeros(self.n)
        if self.spiked is None:
            self.spiked = np.zeros(self.n, dtype=bool)
        for name in ('v', 'g_e', 'g_i', 'theta', 'refrac_remaining', 'spiked'):
            if getattr(self, name).shape != (self.n,):
                raise StructuralError(
                    f"{name} has shape {getattr(self, name).shape}, expected ({self.n},)"
                )

    @property
    def threshold(self):
        return self.params.v_thresh_base + self.theta

    def step(self, dt, exc_input, inh_input, learning=True):
        """
        Advance one tick and return the boolean spike vector.

        learning=False freezes theta (no increments, no decay) while still
        using its current values in the threshold.
        """
        if dt <= 0:
            raise StructuralError(f"dt must be positive, got {dt}")
        exc_input = np.asarray(exc_input, dtype=np.float64)
        inh_input = np.asarray(inh_input, dtype=np.float64)
        if exc_input.shape != (self.n,) or inh_input.shape != (self.n,):
            raise StructuralError(
                f"Input lengths {exc_input.shape}/{inh_input.shape} do not match n={self.n}"
            )

        p = self.params
        refractory = self.refrac_remaining > _REFRACTORY_EPS

        spikes = (~refractory) & (self.v >= self.threshold)
        if spikes.any():
            self.v[spikes] = p.v_reset
            self.refrac_remaining[spikes] = p.refractory
            if p.theta_enabled and learning:
                self.theta[spikes] += p.theta_plus

        self.g_e += exc_input
        self.g_i += inh_input

        integrating = ~(refractory | spikes)
        v = self.v[integrating]
        dv = (dt / p.tau_v) * (
            (p.v_rest - v)
            + self.g_e[integrating] * (p.e_exc - v)
            + self.g_i[integrating] * (p.e_inh - v)
        )
        self.v[integrating] = v + dv

        self.g_e *= math.exp(-dt / p.tau_ge)
        self.g_i *= math.exp(-dt / p.tau_gi)

        if refractory.any():
            remaining = self.refrac_remaining[refractory] - dt
            remaining[remaining < _REFRACTORY_EPS] = 0.0
            self.refrac_remaining[refractory] = remaining

        if p.theta_enabled and learning:
            self.theta *= math.exp(-dt / p.tau_theta)

        self.spiked = spikes
        self._check_finite()
        return spikes

    def reset_state(self):
        """Clear dynamic state between examples; theta is learned and kept."""
        self.v.fill(self.params.v_rest)
        self.g_e.fill(0.0)
        self.g_i.fill(0.0)
        self.refrac_remaining.fill(0.0)
        self.spiked = np.zeros(self.n, dtype=bool)

    def _check_finite(self):
        for name in ('v', 'g_e', 'g_i', 'theta'):
            values = getattr(self, name)
            if not np.isfinite(values).all():
                bad = int(np.flatnonzero(~np.isfinite(values))[0])
                logger.error(f"Non-finite {name} at neuron {bad}: {values[bad]}")
                raise NumericalFaultError(f"Non-finite {name} at neuron {bad}")


def step(group, dt, exc_input, inh_input, learning=True):
    return group.step(dt, exc_input, inh_input, learning=learning)


def reset_state(group):
    group.reset_state()
