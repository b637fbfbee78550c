"""
Input connections with online STDP.

Traces are per neuron: one x_pre per presynaptic neuron, one x_post per
postsynaptic neuron. Within a tick the trace update runs before the weight
update, and for a synapse whose two ends both spiked the potentiation
(post) rule is applied before the depression (pre) rule.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from lattice_snn.exceptions import ContractError, StructuralError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StdpParams:
    eta_pre: float = 0.0001
    eta_post: float = 0.01
    w_max: float = 1.0
    tau_trace: float = 20.0

    def __post_init__(self):
        if self.eta_pre < 0 or self.eta_post < 0:
            raise ContractError('STDP learning rates must be >= 0')
        if self.w_max <= 0:
            raise ContractError('w_max must be positive')
        if self.tau_trace <= 0:
            raise ContractError('tau_trace must be positive')


@dataclass
class Connection:
    n_pre: int
    n_post: int
    w: np.ndarray = field(default=None)
    mask: np.ndarray = field(default=None)
    stdp: Optional[StdpParams] = None
    c_norm: Optional[float] = None
    x_pre: np.ndarray = field(default=None)
    x_post: np.ndarray = field(default=None)

    def __post_init__(self):
        shape = (self.n_pre, self.n_post)
        if self.w is None:
            self.w = np.zeros(shape)
        if self.mask is None:
            self.mask = np.ones(shape, dtype=bool)
        if self.x_pre is None:
            self.x_pre = np.zeros(self.n_pre)
        if self.x_post is None:
            self.x_post = np.zeros(self.n_post)
        self.w = np.asarray(self.w, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.w.shape != shape or self.mask.shape != shape:
            raise StructuralError(
                f"Weight/mask shapes {self.w.shape}/{self.mask.shape} do not match {shape}"
            )
        self.w[~self.mask] = 0.0

    @property
    def w_max(self):
        return self.stdp.w_max if self.stdp is not None else 1.0

    def propagate(self, pre_spikes):
        """Conductance increments delivered to the postsynaptic group."""
        active = np.flatnonzero(pre_spikes)
        if active.size == 0:
            return np.zeros(self.n_post)
        return self.w[active].sum(axis=0)

    def apply_mask(self, mask):
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != self.mask.shape:
            raise StructuralError(f"Mask shape {mask.shape} does not match {self.mask.shape}")
        self.mask = mask.copy()
        self.w[~self.mask] = 0.0

    def reset_traces(self):
        self.x_pre.fill(0.0)
        self.x_post.fill(0.0)

    def update_traces(self, dt, pre_spikes, post_spikes):
        pre_spikes = self._check_vector(pre_spikes, self.n_pre, 'pre_spikes')
        post_spikes = self._check_vector(post_spikes, self.n_post, 'post_spikes')
        tau = self.stdp.tau_trace if self.stdp is not None else 20.0
        decay = math.exp(-dt / tau)
        self.x_pre *= decay
        self.x_post *= decay
        self.x_pre[pre_spikes] = 1.0
        self.x_post[post_spikes] = 1.0

    def stdp_step(self, pre_spikes, post_spikes):
        if self.stdp is None:
            raise ContractError('stdp_step called on a connection without STDP parameters')
        pre_spikes = self._check_vector(pre_spikes, self.n_pre, 'pre_spikes')
        post_spikes = self._check_vector(post_spikes, self.n_post, 'post_spikes')
        rule = self.stdp

        posts = np.flatnonzero(post_spikes)
        if posts.size:
            block = self.w[:, posts]
            block += rule.eta_post * self.x_pre[:, None] * (rule.w_max - block)
            self.w[:, posts] = block

        pres = np.flatnonzero(pre_spikes)
        if pres.size:
            block = self.w[pres, :]
            block -= rule.eta_pre * self.x_post[None, :] * block
            self.w[pres, :] = block

        # drift clamp on the touched rows and columns only
        if posts.size:
            self.w[:, posts] = np.clip(self.w[:, posts], 0.0, rule.w_max) * self.mask[:, posts]
        if pres.size:
            self.w[pres, :] = np.clip(self.w[pres, :], 0.0, rule.w_max) * self.mask[pres, :]

    def normalize_incoming(self):
        """
        Scale every non-zero column to sum to c_norm.

        With STDP parameters the result also respects w_max: entries that
        would overshoot are capped and the remainder of c_norm is spread
        proportionally over the uncapped entries. If the column cannot reach
        c_norm below the cap, every non-zero entry ends at w_max.
        """
        if self.c_norm is None:
            raise ContractError('normalize_incoming needs c_norm')
        sums = self.w.sum(axis=0)
        nonzero = sums > 0
        factors = np.ones(self.n_post)
        factors[nonzero] = self.c_norm / sums[nonzero]
        self.w *= factors[None, :]
        if self.stdp is not None and (self.w > self.stdp.w_max).any():
            self._cap_and_redistribute(nonzero)
        self.w[~self.mask] = 0.0

    def _cap_and_redistribute(self, columns):
        cap = self.stdp.w_max
        # each pass caps at least one more entry
        for _ in range(self.n_pre):
            capped = self.w >= cap
            np.minimum(self.w, cap, out=self.w)
            free_sum = np.where(capped, 0.0, self.w).sum(axis=0)
            target = self.c_norm - capped.sum(axis=0) * cap
            cols = columns & (free_sum > 0) & (target > 0)
            if not cols.any():
                break
            scale = target[cols] / free_sum[cols]
            self.w[:, cols] *= np.where(capped[:, cols], 1.0, scale[None, :])
            if not (self.w > cap).any():
                break
        np.minimum(self.w, cap, out=self.w)

    def _check_vector(self, values, length, name):
        values = np.asarray(values, dtype=bool)
        if values.shape != (length,):
            raise StructuralError(f"{name} has shape {values.shape}, expected ({length},)")
        return values


def init_input_connection(n_pre, n_post, rng, stdp, c_norm, init_scale=0.3, mask=None):
    """
    Uniform random weights in [0, init_scale] on existing synapses, then
    scaled so every column sums to c_norm.
    """
    conn = Connection(
        n_pre=n_pre,
        n_post=n_post,
        w=rng.uniform(0.0, init_scale, size=(n_pre, n_post)),
        mask=mask,
        stdp=stdp,
        c_norm=c_norm,
    )
    if c_norm is not None:
        conn.normalize_incoming()
    logger.info(
        f"Initialised {n_pre}x{n_post} input weights "
        f"({int(conn.mask.sum())} synapses, c_norm={c_norm})"
    )
    return conn


def update_traces(conn, dt, pre_spikes, post_spikes):
    conn.update_traces(dt, pre_spikes, post_spikes)


def stdp_step(conn, pre_spikes, post_spikes):
    conn.stdp_step(pre_spikes, post_spikes)


def normalize_incoming(conn):
    conn.normalize_incoming()
