"""Single-layer network container: input lines fully connected to a LIF
layer with recurrent inhibition, driven one spike raster at a time.

Synaptic currents act as direct potential increments: the raw weighted
spike sum is multiplied by input_gain (default tau_mem / dt, which
cancels the integrator's dt / tau_mem factor) before entering the
membrane equation. Recurrent inhibition passes through the same gain, so
one inhibitory weight unit subtracts one potential unit per step.

During learning, traces advance and the chosen plasticity rule runs
every step, and the weight columns are renormalized after the
presentation. During inference the thresholds are frozen and weights are
untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ContractViolationError
from .neurons import (
    InhibitionConfig,
    LifParams,
    NetworkState,
    compute_input_current,
    init_state,
    lif_step,
    reset_between_samples,
)
from .plasticity import (
    PlasticityParams,
    SynapseMatrix,
    TraceState,
    astdp_update,
    new_synapse_matrix,
    new_trace_state,
    normalize_weights,
    stdp_update,
    trace_decay_step,
)
from .seeding import TAG_WEIGHT_INIT, derive_rng


@dataclass
class SampleResult:
    """Per-neuron outcome of one presentation."""

    spike_counts: np.ndarray
    total_current: np.ndarray

    @property
    def total_spikes(self) -> int:
        return int(self.spike_counts.sum())


@dataclass
class Network:
    syn: SynapseMatrix
    traces: TraceState
    state: NetworkState
    lif: LifParams
    plast: PlasticityParams
    inhib: InhibitionConfig
    input_gain: float

    @property
    def n_inputs(self) -> int:
        return self.syn.n_in

    @property
    def n_neurons(self) -> int:
        return self.syn.n_out

    @property
    def has_faults(self) -> bool:
        return not bool(self.syn.healthy.all())


def build_network(
    n_inputs: int,
    n_neurons: int,
    seed: int,
    lif: LifParams | None = None,
    plast: PlasticityParams | None = None,
    inhib: InhibitionConfig | None = None,
    input_gain: float | None = None,
) -> Network:
    """Assemble a network with seed-derived uniform initial weights."""
    if n_inputs < 1 or n_neurons < 1:
        raise ConfigError(f"network needs at least one input and one neuron, got {n_inputs}x{n_neurons}")
    lif = lif or LifParams()
    plast = plast or PlasticityParams()
    inhib = inhib or InhibitionConfig()
    if lif.dt_ms != plast.dt_ms:
        raise ConfigError(f"lif dt {lif.dt_ms} and plasticity dt {plast.dt_ms} disagree")
    if input_gain is None:
        input_gain = lif.tau_mem_ms / lif.dt_ms
    rng = derive_rng(seed, TAG_WEIGHT_INIT)
    return Network(
        syn=new_synapse_matrix(n_inputs, n_neurons, rng),
        traces=new_trace_state(n_inputs, n_neurons),
        state=init_state(n_neurons, lif),
        lif=lif,
        plast=plast,
        inhib=inhib,
        input_gain=input_gain,
    )


def run_sample(
    net: Network,
    raster: np.ndarray,
    learn: bool = False,
    rule: str = "stdp",
    w_alpha: float | None = None,
    normalize: bool = True,
) -> SampleResult:
    """Present one spike raster and return spike counts and drive.

    The network's fast state (potentials, lockouts, traces) is cleared
    first; thresholds and weights carry over between presentations.
    total_current accumulates each neuron's summed input over the
    presentation and supports ranking neurons when nothing fired.
    """
    if raster.ndim != 2 or raster.shape[1] != net.n_inputs:
        raise ContractViolationError(
            f"raster shape {raster.shape} does not match {net.n_inputs} input lines"
        )
    if learn and rule not in ("stdp", "astdp"):
        raise ConfigError(f"unknown plasticity rule {rule!r}")
    if learn and rule == "astdp" and w_alpha is None:
        raise ContractViolationError("astdp learning requires a w_alpha value")

    reset_between_samples(net.state, net.lif)
    net.traces.x_pre[:] = 0.0
    net.traces.x_post[:] = 0.0

    n_steps = raster.shape[0]
    counts = np.zeros(net.n_neurons, dtype=np.int64)
    total_current = np.zeros(net.n_neurons)
    # Inference never changes the weights, so the whole feedforward drive
    # collapses into one matrix product up front.
    ff_all = None if learn else raster.astype(np.float64) @ net.syn.w
    for t in range(n_steps):
        pre = raster[t]
        ff = None if ff_all is None else ff_all[t]
        current = compute_input_current(net.syn.w, pre, net.inhib, net.state.last_spikes, feedforward=ff)
        total_current += current
        _, spikes = lif_step(net.state, net.lif, net.input_gain * current, freeze_theta=not learn)
        counts += spikes
        if learn:
            trace_decay_step(net.traces, net.plast, pre, spikes)
            if rule == "stdp":
                stdp_update(net.syn, net.traces, net.plast, pre, spikes)
            else:
                astdp_update(net.syn, net.traces, net.plast, pre, spikes, w_alpha)
    if learn and normalize:
        normalize_weights(net.syn, net.plast.w_norm)
    return SampleResult(spike_counts=counts, total_current=total_current)


def run_eval_batch(net: Network, rasters: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Present a stack of rasters (B, steps, inputs) in one vectorized
    inference pass and return (spike_counts, total_current), each (B, N).

    Every batch row simulates an independent presentation of the same
    frozen network: membrane state is (B, N) while the shared threshold
    vector broadcasts across rows. Results match running the samples one
    at a time up to floating-point summation order in the feedforward
    product.
    """
    if rasters.ndim != 3 or rasters.shape[2] != net.n_inputs:
        raise ContractViolationError(
            f"raster stack shape {rasters.shape} does not match {net.n_inputs} input lines"
        )
    n_batch, n_steps, _ = rasters.shape
    state = NetworkState(
        v=np.full((n_batch, net.n_neurons), net.lif.v_rest),
        theta=net.state.theta,
        refrac=np.zeros((n_batch, net.n_neurons), dtype=np.int64),
        last_spikes=np.zeros((n_batch, net.n_neurons), dtype=bool),
    )
    counts = np.zeros((n_batch, net.n_neurons), dtype=np.int64)
    total_current = np.zeros((n_batch, net.n_neurons))
    w_rec = net.inhib.w_recurrent if net.inhib.enabled else 0.0
    for t in range(n_steps):
        current = rasters[:, t, :] @ net.syn.w
        if w_rec != 0.0:
            totals = state.last_spikes.sum(axis=1, keepdims=True)
            current += w_rec * (totals - state.last_spikes)
        total_current += current
        _, spikes = lif_step(state, net.lif, net.input_gain * current, freeze_theta=True)
        counts += spikes
    return counts, total_current


def clone_network(net: Network) -> Network:
    """Independent deep copy; the original is never touched through it."""
    return Network(
        syn=SynapseMatrix(
            w=net.syn.w.copy(),
            healthy=net.syn.healthy.copy(),
            pending_full_clip=net.syn.pending_full_clip,
        ),
        traces=TraceState(x_pre=net.traces.x_pre.copy(), x_post=net.traces.x_post.copy()),
        state=NetworkState(
            v=net.state.v.copy(),
            theta=net.state.theta.copy(),
            refrac=net.state.refrac.copy(),
            last_spikes=net.state.last_spikes.copy(),
            step_count=net.state.step_count,
        ),
        lif=replace(net.lif),
        plast=replace(net.plast),
        inhib=replace(net.inhib),
        input_gain=net.input_gain,
    )


def clone_weights(net: Network) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Snapshot (weights, healthy mask, theta) for checkpointing."""
    return net.syn.w.copy(), net.syn.healthy.copy(), net.state.theta.copy()


def restore_weights(net: Network, snapshot: tuple[np.ndarray, np.ndarray, np.ndarray]) -> None:
    w, healthy, theta = snapshot
    net.syn.w[:] = w
    net.syn.healthy[:] = healthy
    net.state.theta[:] = theta
    net.syn.pending_full_clip = False
