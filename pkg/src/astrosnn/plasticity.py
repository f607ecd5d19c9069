"""Synaptic plasticity: trace STDP, weight-scaled potentiation, and
column normalization.

Weight updates are event-driven and all-to-all: a post-synaptic spike
potentiates every healthy incoming synapse by eta_post times the
pre-synaptic trace, and a pre-synaptic spike depresses every outgoing
synapse by eta_pre times the post-synaptic trace. Traces decay
exponentially and snap to 1 when their neuron fires.

The repair variant scales potentiation by (w / w_alpha)^sigma, where
w_alpha is a high percentile of the whole weight matrix. Synapses that
survived fault injection with large weights therefore relearn fastest,
while the depression term is left untouched. With sigma = 0 the variant
reduces exactly (bit for bit) to plain STDP.

Weights live in [0, w_max]. Entries whose healthy flag is cleared are
stuck at exactly 0 through every operation. normalize_weights rescales
each column to a fixed sum and deliberately does NOT clamp; the first
update call afterwards clips the whole matrix back into range, mirroring
reference implementations that clamp once per simulation step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError, SurrogateDegenerateError

logger = logging.getLogger(__name__)


@dataclass
class PlasticityParams:
    eta_post: float = 1.0e-2
    eta_pre: float = 1.0e-4
    tau_trace_ms: float = 20.0
    w_max: float = 1.0
    sigma: float = 2.0
    alpha: float = 98.0
    w_norm: float = 78.4
    dt_ms: float = 1.0

    @property
    def trace_decay(self) -> float:
        return math.exp(-self.dt_ms / self.tau_trace_ms)


@dataclass
class SynapseMatrix:
    """Feedforward weights plus the stuck-at-zero fault mask.

    healthy[i, j] False means the synapse is broken: its weight is 0 and
    every update leaves it there. pending_full_clip requests a one-shot
    whole-matrix clip on the next update call (set after normalization,
    which may push weights past w_max).
    """

    w: np.ndarray
    healthy: np.ndarray
    pending_full_clip: bool = field(default=False)

    @property
    def n_in(self) -> int:
        return self.w.shape[0]

    @property
    def n_out(self) -> int:
        return self.w.shape[1]


@dataclass
class TraceState:
    x_pre: np.ndarray
    x_post: np.ndarray


def new_synapse_matrix(
    n_in: int, n_out: int, rng: np.random.Generator, init_scale: float = 0.3
) -> SynapseMatrix:
    """Fresh all-healthy matrix with weights uniform on [0, init_scale]."""
    w = init_scale * rng.random((n_in, n_out))
    return SynapseMatrix(w=w, healthy=np.ones((n_in, n_out), dtype=bool))


def new_trace_state(n_in: int, n_out: int) -> TraceState:
    return TraceState(x_pre=np.zeros(n_in), x_post=np.zeros(n_out))


def trace_decay_step(
    traces: TraceState,
    params: PlasticityParams,
    pre_spikes: np.ndarray | None = None,
    post_spikes: np.ndarray | None = None,
) -> TraceState:
    """Decay both trace vectors one step, then snap spiking entries to 1."""
    decay = params.trace_decay
    traces.x_pre *= decay
    traces.x_post *= decay
    if pre_spikes is not None and pre_spikes.any():
        traces.x_pre[pre_spikes] = 1.0
    if post_spikes is not None and post_spikes.any():
        traces.x_post[post_spikes] = 1.0
    return traces


def _check_update_args(
    syn: SynapseMatrix, traces: TraceState, pre_spikes: np.ndarray, post_spikes: np.ndarray
) -> None:
    if pre_spikes.shape != (syn.n_in,) or traces.x_pre.shape != (syn.n_in,):
        raise ContractViolationError(
            f"pre-side shapes {pre_spikes.shape}/{traces.x_pre.shape} do not match {syn.n_in} inputs"
        )
    if post_spikes.shape != (syn.n_out,) or traces.x_post.shape != (syn.n_out,):
        raise ContractViolationError(
            f"post-side shapes {post_spikes.shape}/{traces.x_post.shape} do not match {syn.n_out} outputs"
        )


def _apply_pending_clip(syn: SynapseMatrix, params: PlasticityParams) -> None:
    if syn.pending_full_clip:
        np.clip(syn.w, 0.0, params.w_max, out=syn.w)
        syn.pending_full_clip = False


def _depress(syn: SynapseMatrix, traces: TraceState, params: PlasticityParams, pre_idx: np.ndarray) -> None:
    rows = syn.w[pre_idx]
    rows -= params.eta_pre * traces.x_post[None, :]
    np.maximum(rows, 0.0, out=rows)
    syn.w[pre_idx] = rows


def stdp_update(
    syn: SynapseMatrix,
    traces: TraceState,
    params: PlasticityParams,
    pre_spikes: np.ndarray,
    post_spikes: np.ndarray,
) -> SynapseMatrix:
    """One step of trace STDP. Mutates and returns syn.

    Call once per simulation step with the current spikes and the traces
    already advanced for this step.
    """
    _check_update_args(syn, traces, pre_spikes, post_spikes)
    _apply_pending_clip(syn, params)
    pre_idx = np.flatnonzero(pre_spikes)
    if pre_idx.size:
        _depress(syn, traces, params, pre_idx)
    post_idx = np.flatnonzero(post_spikes)
    if post_idx.size:
        cols = syn.w[:, post_idx]
        inc = params.eta_post * traces.x_pre[:, None]
        cols += inc * syn.healthy[:, post_idx]
        np.clip(cols, 0.0, params.w_max, out=cols)
        syn.w[:, post_idx] = cols
    return syn


def astdp_update(
    syn: SynapseMatrix,
    traces: TraceState,
    params: PlasticityParams,
    pre_spikes: np.ndarray,
    post_spikes: np.ndarray,
    w_alpha: float,
) -> SynapseMatrix:
    """One step of weight-scaled STDP for self-repair. Mutates syn.

    Potentiation is multiplied per synapse by (w / w_alpha)^sigma using
    the weight value as it stands before the increment. Depression is
    identical to stdp_update. Raises SurrogateDegenerateError when
    w_alpha <= 0; callers should fall back to stdp_update for the batch.
    """
    if w_alpha <= 0.0:
        raise SurrogateDegenerateError(
            f"scaling reference w_alpha = {w_alpha} is not positive; potentiation factor undefined"
        )
    _check_update_args(syn, traces, pre_spikes, post_spikes)
    _apply_pending_clip(syn, params)
    pre_idx = np.flatnonzero(pre_spikes)
    if pre_idx.size:
        _depress(syn, traces, params, pre_idx)
    post_idx = np.flatnonzero(post_spikes)
    if post_idx.size:
        cols = syn.w[:, post_idx]
        mult = (cols / w_alpha) ** params.sigma
        inc = (params.eta_post * traces.x_pre[:, None]) * mult
        cols += inc * syn.healthy[:, post_idx]
        np.clip(cols, 0.0, params.w_max, out=cols)
        syn.w[:, post_idx] = cols
    return syn


def compute_w_alpha(w: np.ndarray, alpha: float) -> float:
    """Nearest-rank alpha-th percentile over every entry of w.

    The k-th smallest value with k = ceil(alpha/100 * n). Stuck-at-zero
    entries participate, so heavy fault injection drags the reference
    down until relearning rebuilds the upper tail.
    """
    if not 0.0 < alpha <= 100.0:
        raise ContractViolationError(f"alpha must lie in (0, 100], got {alpha}")
    flat = w.reshape(-1)
    if flat.size == 0:
        raise ContractViolationError("cannot take a percentile of an empty matrix")
    k = math.ceil(alpha / 100.0 * flat.size)
    return float(np.partition(flat, k - 1)[k - 1])


def normalize_weights(syn: SynapseMatrix, w_norm: float) -> SynapseMatrix:
    """Rescale each column to sum to w_norm. Mutates and returns syn.

    Stuck entries are zero and stay zero, so the healthy weights absorb
    the whole budget. Columns summing to zero cannot be rescaled and are
    skipped with a warning. No clamping happens here; the next update
    call clips any entries the rescale pushed past w_max.
    """
    sums = syn.w.sum(axis=0)
    dead = sums <= 0.0
    if dead.any():
        logger.warning(
            "normalize_weights: %d column(s) sum to zero and were left unscaled: %s",
            int(dead.sum()),
            np.flatnonzero(dead).tolist()[:16],
        )
    scale = np.ones_like(sums)
    np.divide(w_norm, sums, out=scale, where=~dead)
    syn.w *= scale[None, :]
    syn.pending_full_clip = True
    return syn
