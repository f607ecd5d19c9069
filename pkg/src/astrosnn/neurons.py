"""Leaky integrate-and-fire layer with adaptive thresholds.

Membrane potentials follow
    tau_mem * dv/dt = -(v - v_rest) + I
integrated by forward Euler. Each neuron carries a homeostatic threshold
offset theta that jumps by theta_plus when the neuron fires and decays
exponentially with time constant tau_theta, which keeps per-neuron firing
rates balanced over training. Spiking neurons are locked out for
refrac_ms and held at v_reset; locked-out neurons receive no input,
including recurrent inhibition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError, NumericalFaultError


@dataclass
class LifParams:
    tau_mem_ms: float = 100.0
    v_rest: float = -65.0
    v_reset: float = -60.0
    theta0: float = -52.0
    theta_plus: float = 0.05
    tau_theta_ms: float = 1.0e7
    refrac_ms: float = 5.0
    dt_ms: float = 1.0

    @property
    def refrac_steps(self) -> int:
        return int(math.ceil(self.refrac_ms / self.dt_ms))

    @property
    def theta_decay(self) -> float:
        return math.exp(-self.dt_ms / self.tau_theta_ms)


@dataclass
class InhibitionConfig:
    """All-to-all recurrent inhibition, applied one step delayed.

    Every neuron that fired on the previous step contributes w_recurrent
    (negative) to every other neuron's input current this step.
    """

    w_recurrent: float = -120.0
    enabled: bool = True


@dataclass
class NetworkState:
    """Per-neuron dynamic state for one layer."""

    v: np.ndarray
    theta: np.ndarray
    refrac: np.ndarray
    last_spikes: np.ndarray
    step_count: int = field(default=0)


def init_state(n_neurons: int, params: LifParams) -> NetworkState:
    return NetworkState(
        v=np.full(n_neurons, params.v_rest, dtype=np.float64),
        theta=np.zeros(n_neurons, dtype=np.float64),
        refrac=np.zeros(n_neurons, dtype=np.int64),
        last_spikes=np.zeros(n_neurons, dtype=bool),
    )


def lif_step(
    state: NetworkState,
    params: LifParams,
    input_current: np.ndarray,
    freeze_theta: bool = False,
) -> tuple[NetworkState, np.ndarray]:
    """Advance the layer one step. Mutates and returns state.

    freeze_theta disables both the spike-triggered threshold increment
    and the exponential decay, for inference passes that must not alter
    the homeostatic equilibrium.
    """
    v = state.v
    if input_current.shape != v.shape:
        raise ContractViolationError(
            f"input_current shape {input_current.shape} does not match layer size {v.shape}"
        )
    active = state.refrac == 0
    dv = (params.dt_ms / params.tau_mem_ms) * (params.v_rest - v + input_current)
    v[active] += dv[active]
    # Locked-out neurons sit at the reset potential and burn down their
    # lockout counter; they integrate nothing, inhibition included.
    v[~active] = params.v_reset
    state.refrac[~active] -= 1

    if not np.isfinite(v).all():
        bad = int(np.flatnonzero(~np.isfinite(v))[0])
        raise NumericalFaultError(
            f"membrane potential of neuron {bad} became non-finite at step {state.step_count}"
        )

    spikes = active & (v >= params.theta0 + state.theta)
    if spikes.any():
        v[spikes] = params.v_reset
        state.refrac[spikes] = params.refrac_steps
        if not freeze_theta:
            state.theta[spikes] += params.theta_plus
    if not freeze_theta:
        state.theta *= params.theta_decay

    state.last_spikes = spikes
    state.step_count += 1
    return state, spikes


def compute_input_current(
    weights: np.ndarray,
    in_spikes: np.ndarray,
    inhib: InhibitionConfig,
    last_out_spikes: np.ndarray,
    feedforward: np.ndarray | None = None,
) -> np.ndarray:
    """Raw synaptic current per output neuron for one step.

    Feedforward part sums the weight rows of the input lines that spiked.
    Recurrent part adds w_recurrent for each OTHER output neuron that
    spiked on the previous step (soft winner-take-all). Callers that know
    the weights are frozen may pass a precomputed feedforward vector to
    skip the row gather.
    """
    n_in, n_out = weights.shape
    if in_spikes.shape != (n_in,):
        raise ContractViolationError(
            f"in_spikes shape {in_spikes.shape} does not match weight rows {n_in}"
        )
    if last_out_spikes.shape != (n_out,):
        raise ContractViolationError(
            f"last_out_spikes shape {last_out_spikes.shape} does not match weight columns {n_out}"
        )
    if feedforward is not None:
        current = feedforward
    else:
        idx = np.flatnonzero(in_spikes)
        if idx.size:
            current = weights[idx].sum(axis=0)
        else:
            current = np.zeros(n_out, dtype=np.float64)
    if inhib.enabled and inhib.w_recurrent != 0.0:
        total = int(last_out_spikes.sum())
        if total:
            current = current + inhib.w_recurrent * (total - last_out_spikes.astype(np.float64))
    return current


def reset_between_samples(state: NetworkState, params: LifParams) -> NetworkState:
    """Clear fast state between presentations; theta persists."""
    state.v[:] = params.v_rest
    state.refrac[:] = 0
    state.last_spikes[:] = False
    return state
