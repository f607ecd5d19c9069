"""Tripartite-synapse micro-model: a small group of Poisson-driven LIF
neurons whose synaptic release probabilities are regulated by one shared
astrocyte.

Signal chain per step:

  post spikes -> 2-AG (per neuron, exponential decay, impulse per spike)
  total 2-AG  -> IP3 (first-order low-pass with production gain)
  IP3         -> ER calcium (two-variable exchange model: channel flux
                 gated by IP3 and calcium with slow inactivation, plus
                 leak and pump terms; oscillates for mid-range IP3)
  calcium     -> glutamate (impulse on each upward threshold crossing)
  glutamate   -> e-SP (slow low-pass, percent units, synapse-enhancing)
  2-AG        -> DSE (per neuron, percent units, synapse-depressing)
  PR[k,i]     =  clamp(PR0[k,i] * (1 + (DSE[k] + eSP) / 100), 0, 1)

Faulted synapses have PR forced to exactly 0 from their fault time
onward. Because e-SP is global and DSE is local, a neuron that loses
synapses pulls the shared balance toward potentiation, which raises the
release probability of its surviving synapses: self-repair.

Pre-synaptic input is generated as continuous-time Poisson event streams
(times plus one transmission uniform per event) derived from the seed
alone, so runs at different integration steps see identical input
realizations and can be compared for convergence. Exponential decays use
the exact per-step factor; the nonlinear calcium system and the e-SP
low-pass use forward Euler.

Calcium dynamics and constants follow the standard two-pool
IP3-receptor formulation; rates are per second, concentrations in uM.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractViolationError, NumericalFaultError
from .seeding import TAG_ASTRO_FAULT, TAG_ASTRO_INPUT, derive_rng

TRACE_COLUMNS = [
    "time_s",
    "esp",
    "dse_n1",
    "dse_n2",
    "pr_class_healthy_high",
    "pr_class_healthy_low",
    "pr_class_faulty",
    "rate_n1_hz",
    "rate_n2_hz",
]


@dataclass
class LiRinzelParams:
    """ER calcium exchange constants. Rates per second, amounts in uM."""

    # Resting IP3 production target. Together with r_ip3 this places the
    # quiescent astrocyte just below the oscillatory IP3 window (about
    # 0.38 to 0.53 uM for the constants below) and the two-neuron
    # operating point near its middle.
    ip3_star: float = 0.33
    tau_ip3_s: float = 7.0  # IP3 relaxation time
    a2: float = 0.2  # inactivation binding rate
    r_c: float = 6.0  # maximal channel flux
    r_l: float = 0.11  # leak flux
    c0: float = 2.0  # total free calcium equivalent
    c1: float = 0.185  # ER/cytosol volume ratio
    v_er: float = 0.8  # maximal pump flux
    k_er: float = 0.1  # pump half-activation
    d1: float = 0.13  # IP3 binding
    d2: float = 1.049  # calcium inactivation binding
    d3: float = 0.9434  # IP3 binding (open state)
    d5: float = 0.08234  # calcium activation binding
    # Initial (ca, h): the quiescent fixed point for ip3 = ip3_star with
    # the constants above, so unforced runs start stationary instead of
    # ringing through a spurious startup transient.
    ca_rest: float = 0.17204536417521551
    h_rest: float = 0.6877486883604185


@dataclass
class AstroParams:
    """Coupling gains and time constants of the astrocyte loop."""

    tau_ag_ms: float = 10_000.0  # 2-AG decay
    r_ag: float = 0.042  # 2-AG impulse per post spike
    r_ip3: float = 0.0021  # IP3 production per (2-AG unit * s)
    ca_threshold: float = 0.3  # uM, gliotransmission threshold
    tau_glu_ms: float = 1_000.0  # glutamate decay
    r_glu: float = 1.0  # glutamate impulse per calcium event
    tau_esp_ms: float = 40_000.0  # e-SP low-pass
    m_esp: float = 350.0  # e-SP percent per glutamate unit
    k_ag: float = 7.5  # DSE percent per 2-AG unit
    dt_ms: float = 1.0
    li_rinzel: LiRinzelParams = field(default_factory=LiRinzelParams)

    def validate(self) -> None:
        for name in ("tau_ag_ms", "tau_glu_ms", "tau_esp_ms", "dt_ms"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")


@dataclass
class AstroState:
    """Dynamic state for n_post neurons x n_pre synapses each."""

    ag: np.ndarray  # (n_post,) 2-AG amounts
    ip3: float
    ca: float
    gate_h: float
    glu: float
    esp: float
    dse: np.ndarray  # (n_post,) percent
    pr0: np.ndarray  # (n_post, n_pre) baseline release probabilities
    pr: np.ndarray  # (n_post, n_pre) current release probabilities
    faulted: np.ndarray  # (n_post, n_pre) bool
    ca_armed: bool = True
    ca_event: bool = False


def new_astro_state(pr0: np.ndarray, params: AstroParams) -> AstroState:
    if pr0.ndim != 2:
        raise ContractViolationError(f"pr0 must be 2-D (n_post, n_pre), got {pr0.ndim} dims")
    if pr0.min() < 0.0 or pr0.max() > 1.0:
        raise ContractViolationError("pr0 entries must lie in [0, 1]")
    lr = params.li_rinzel
    n_post = pr0.shape[0]
    return AstroState(
        ag=np.zeros(n_post),
        ip3=lr.ip3_star,
        ca=lr.ca_rest,
        gate_h=lr.h_rest,
        glu=0.0,
        esp=0.0,
        dse=np.zeros(n_post),
        pr0=pr0.astype(np.float64).copy(),
        pr=pr0.astype(np.float64).copy(),
        faulted=np.zeros_like(pr0, dtype=bool),
    )


def ag_step(state: AstroState, params: AstroParams, post_spikes: np.ndarray) -> AstroState:
    """Decay 2-AG one step, then add r_ag for each neuron that fired."""
    if post_spikes.shape != state.ag.shape:
        raise ContractViolationError(
            f"post_spikes shape {post_spikes.shape} does not match {state.ag.shape}"
        )
    state.ag *= math.exp(-params.dt_ms / params.tau_ag_ms)
    if post_spikes.any():
        state.ag[post_spikes] += params.r_ag
    return state


def calcium_step(state: AstroState, params: AstroParams) -> AstroState:
    """Advance IP3, calcium, and the channel gate one Euler step.

    Sets state.ca_event True when calcium crosses ca_threshold upward;
    the detector re-arms only after calcium falls back below threshold,
    so one oscillation yields exactly one event.
    """
    lr = params.li_rinzel
    dt_s = params.dt_ms / 1000.0
    forcing = float(state.ag.sum())

    ip3 = state.ip3
    ca = state.ca
    h = state.gate_h

    ip3 += dt_s * ((lr.ip3_star - ip3) / lr.tau_ip3_s + params.r_ip3 * forcing)

    q2 = lr.d2 * (ip3 + lr.d1) / (ip3 + lr.d3)
    h_inf = q2 / (q2 + ca)
    tau_h = 1.0 / (lr.a2 * (q2 + ca))
    m_inf = ip3 / (ip3 + lr.d1)
    n_inf = ca / (ca + lr.d5)
    gate = m_inf * n_inf * h
    drive = lr.c0 - (1.0 + lr.c1) * ca
    j_chan = lr.r_c * gate * gate * gate * drive
    j_leak = lr.r_l * drive
    j_pump = lr.v_er * ca * ca / (lr.k_er * lr.k_er + ca * ca)

    ca += dt_s * (j_chan + j_leak - j_pump)
    h += dt_s * (h_inf - h) / tau_h

    if not (math.isfinite(ca) and math.isfinite(h) and math.isfinite(ip3)):
        raise NumericalFaultError("calcium dynamics became non-finite")

    crossed = ca >= params.ca_threshold
    state.ca_event = bool(crossed and state.ca_armed)
    state.ca_armed = not crossed

    state.ip3 = ip3
    state.ca = ca
    state.gate_h = h
    return state


def glu_step(state: AstroState, params: AstroParams) -> AstroState:
    """Decay glutamate; add r_glu if this step carries a calcium event."""
    state.glu *= math.exp(-params.dt_ms / params.tau_glu_ms)
    if state.ca_event:
        state.glu += params.r_glu
    return state


def esp_step(state: AstroState, params: AstroParams) -> AstroState:
    """Euler step of tau_esp * d(eSP)/dt = -eSP + m_esp * glu."""
    state.esp += (params.dt_ms / params.tau_esp_ms) * (-state.esp + params.m_esp * state.glu)
    return state


def dse_compute(state: AstroState, params: AstroParams) -> AstroState:
    """DSE[k] = -k_ag * AG[k] (percent, always depressing)."""
    np.multiply(state.ag, -params.k_ag, out=state.dse)
    return state


def pr_update(state: AstroState) -> AstroState:
    """PR = clamp(PR0 * (1 + (DSE + eSP)/100), 0, 1); faulted stay 0."""
    modulation = 1.0 + (state.dse[:, None] + state.esp) / 100.0
    np.multiply(state.pr0, modulation, out=state.pr)
    np.clip(state.pr, 0.0, 1.0, out=state.pr)
    state.pr[state.faulted] = 0.0
    return state


# ------------------------------------------------------------ scenario ----


@dataclass
class FaultEvent:
    """Break synapses of one neuron at time_s.

    Exactly one of fraction (random subset of that size) or synapses
    (explicit pre indices) must be given.
    """

    time_s: float
    neuron: int
    fraction: float | None = None
    synapses: list[int] | None = None

    def validate(self, n_post: int, n_pre: int) -> None:
        if (self.fraction is None) == (self.synapses is None):
            raise ConfigError("fault event needs exactly one of fraction or synapses")
        if not 0 <= self.neuron < n_post:
            raise ConfigError(f"fault event neuron {self.neuron} out of range [0, {n_post})")
        if self.fraction is not None and not 0.0 <= self.fraction <= 1.0:
            raise ConfigError(f"fault fraction must lie in [0, 1], got {self.fraction}")
        if self.synapses is not None:
            for s in self.synapses:
                if not 0 <= s < n_pre:
                    raise ConfigError(f"fault synapse index {s} out of range [0, {n_pre})")
        if self.time_s < 0:
            raise ConfigError(f"fault time must be >= 0, got {self.time_s}")


@dataclass
class MicroNetworkSpec:
    """Scenario description: layout, drive, baseline PR, and faults.

    The default two-neuron layout with ten synapses each and a 70% fault
    on the second neuron reproduces the canonical self-repair experiment.
    """

    n_post: int = 2
    n_pre: int = 10
    input_rate_hz: float = 10.0
    pr0: float = 0.5
    pr0_overrides: list[tuple[int, int, float]] = field(default_factory=list)
    faults: list[FaultEvent] = field(default_factory=list)
    # Post-synaptic LIF (fixed threshold, no homeostasis).
    tau_mem_ms: float = 20.0
    v_threshold: float = 2.0
    v_reset: float = 0.0
    refrac_ms: float = 2.0
    j_syn: float = 1.0

    def validate(self) -> None:
        if self.n_post < 1 or self.n_pre < 1:
            raise ConfigError("n_post and n_pre must be >= 1")
        if self.input_rate_hz < 0:
            raise ConfigError(f"input_rate_hz must be >= 0, got {self.input_rate_hz}")
        if not 0.0 <= self.pr0 <= 1.0:
            raise ConfigError(f"pr0 must lie in [0, 1], got {self.pr0}")
        if self.tau_mem_ms <= 0 or self.v_threshold <= self.v_reset:
            raise ConfigError("post-neuron parameters are inconsistent")
        for neuron, syn, value in self.pr0_overrides:
            if not 0 <= neuron < self.n_post or not 0 <= syn < self.n_pre:
                raise ConfigError(f"pr0 override ({neuron}, {syn}) out of range")
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"pr0 override value {value} outside [0, 1]")
        for ev in self.faults:
            ev.validate(self.n_post, self.n_pre)

    def build_pr0(self) -> np.ndarray:
        pr0 = np.full((self.n_post, self.n_pre), float(self.pr0))
        for neuron, syn, value in self.pr0_overrides:
            pr0[neuron, syn] = value
        return pr0


@dataclass
class TraceLog:
    """Per-second summaries of one micro-model run.

    Continuous signals are averaged within each 1 s bin; rates are spike
    counts per bin. pr_class_* track the synapses of the fault-target
    neuron, split into healthy-with-highest-PR0, healthy-with-lowest-PR0
    (identical when PR0 is uniform), and scheduled-to-fault.
    """

    time_s: np.ndarray
    esp: np.ndarray
    dse: np.ndarray  # (n_post, bins)
    pr_healthy_high: np.ndarray
    pr_healthy_low: np.ndarray
    pr_faulty: np.ndarray
    rates_hz: np.ndarray  # (n_post, bins)

    def _column(self, arr: np.ndarray, row: int) -> np.ndarray:
        if row < arr.shape[0]:
            return arr[row]
        return np.full(arr.shape[1], np.nan)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            dse1 = self._column(self.dse, 0)
            dse2 = self._column(self.dse, 1)
            r1 = self._column(self.rates_hz, 0)
            r2 = self._column(self.rates_hz, 1)
            for b in range(self.time_s.size):
                writer.writerow(
                    [
                        f"{self.time_s[b]:.3f}",
                        repr(float(self.esp[b])),
                        repr(float(dse1[b])),
                        repr(float(dse2[b])),
                        repr(float(self.pr_healthy_high[b])),
                        repr(float(self.pr_healthy_low[b])),
                        repr(float(self.pr_faulty[b])),
                        repr(float(r1[b])),
                        repr(float(r2[b])),
                    ]
                )


def _poisson_event_streams(
    spec: MicroNetworkSpec, duration_s: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Continuous-time Poisson events for every synapse.

    Returns (times_s, post_idx, pre_idx, transmission_uniform) sorted by
    time. Drawn synapse by synapse in fixed order so the realization
    depends only on the rng stream, never on the integration step.
    """
    if spec.input_rate_hz <= 0.0 or duration_s <= 0.0:
        empty = np.empty(0)
        return empty, empty.astype(np.int64), empty.astype(np.int64), empty
    times, posts, pres = [], [], []
    scale = 1.0 / spec.input_rate_hz
    expected = spec.input_rate_hz * duration_s
    chunk = int(expected + 10.0 * math.sqrt(expected) + 20.0)
    for k in range(spec.n_post):
        for i in range(spec.n_pre):
            gaps = rng.exponential(scale, size=chunk)
            t = np.cumsum(gaps)
            while t[-1] < duration_s:  # rare top-up
                extra = np.cumsum(rng.exponential(scale, size=chunk)) + t[-1]
                t = np.concatenate([t, extra])
            t = t[t < duration_s]
            times.append(t)
            posts.append(np.full(t.size, k, dtype=np.int64))
            pres.append(np.full(t.size, i, dtype=np.int64))
    times_all = np.concatenate(times)
    posts_all = np.concatenate(posts)
    pres_all = np.concatenate(pres)
    order = np.lexsort((pres_all, posts_all, times_all))
    uniforms = rng.random(times_all.size)  # one transmission draw per event
    return times_all[order], posts_all[order], pres_all[order], uniforms


def _fault_synapse_sets(spec: MicroNetworkSpec, seed: int) -> list[np.ndarray]:
    """Resolve each fault event to a concrete sorted synapse index set."""
    sets = []
    for idx, ev in enumerate(spec.faults):
        if ev.synapses is not None:
            sets.append(np.array(sorted(set(ev.synapses)), dtype=np.int64))
        else:
            count = int(round(ev.fraction * spec.n_pre))
            rng = derive_rng(seed, TAG_ASTRO_FAULT, idx)
            chosen = rng.choice(spec.n_pre, size=count, replace=False)
            sets.append(np.sort(chosen))
    return sets


def _target_synapse_classes(
    spec: MicroNetworkSpec, fault_sets: list[np.ndarray], pr0: np.ndarray
) -> tuple[int, np.ndarray, np.ndarray, np.ndarray]:
    """Pick the traced neuron and its synapse classes for the log.

    The traced neuron is the first fault event's target, or the last
    neuron when no fault is scheduled.
    """
    target = spec.faults[0].neuron if spec.faults else spec.n_post - 1
    faulty = np.unique(
        np.concatenate(
            [s for ev, s in zip(spec.faults, fault_sets) if ev.neuron == target]
            or [np.empty(0, dtype=np.int64)]
        )
    )
    healthy = np.setdiff1d(np.arange(spec.n_pre), faulty)
    if healthy.size:
        values = pr0[target, healthy]
        high = healthy[values == values.max()]
        low = healthy[values == values.min()]
    else:
        high = low = healthy
    return target, high, low, faulty


def run_micro_experiment(
    spec: MicroNetworkSpec,
    params: AstroParams,
    duration_s: float,
    seed: int,
) -> TraceLog:
    """Simulate the scenario for duration_s seconds and return the log.

    Deterministic given (spec, params, duration_s, seed). A zero or
    negative duration yields an empty log.
    """
    spec.validate()
    params.validate()
    if duration_s < 0:
        raise ConfigError(f"duration_s must be >= 0, got {duration_s}")

    dt = params.dt_ms
    n_steps = int(round(duration_s * 1000.0 / dt))
    steps_per_bin = int(round(1000.0 / dt))
    n_bins = n_steps // steps_per_bin

    pr0 = spec.build_pr0()
    state = new_astro_state(pr0, params)
    fault_sets = _fault_synapse_sets(spec, seed)
    fault_steps = [int(math.floor(ev.time_s * 1000.0 / dt)) for ev in spec.faults]
    target, cls_high, cls_low, cls_faulty = _target_synapse_classes(spec, fault_sets, pr0)

    ev_time, ev_post, ev_pre, ev_u = _poisson_event_streams(
        spec, duration_s, derive_rng(seed, TAG_ASTRO_INPUT)
    )
    ev_step = np.floor(ev_time * 1000.0 / dt).astype(np.int64)

    # Post-neuron LIF state.
    v = np.zeros(spec.n_post)
    refrac = np.zeros(spec.n_post, dtype=np.int64)
    v_decay = math.exp(-dt / spec.tau_mem_ms)
    refrac_steps = int(math.ceil(spec.refrac_ms / dt))
    spikes = np.zeros(spec.n_post, dtype=bool)

    log_time = np.arange(1, n_bins + 1, dtype=np.float64)
    log_esp = np.zeros(n_bins)
    log_dse = np.zeros((spec.n_post, n_bins))
    log_pr_high = np.full(n_bins, np.nan)
    log_pr_low = np.full(n_bins, np.nan)
    log_pr_faulty = np.full(n_bins, np.nan)
    log_rates = np.zeros((spec.n_post, n_bins))

    acc_esp = 0.0
    acc_dse = np.zeros(spec.n_post)
    acc_pr = np.zeros(3)
    acc_spikes = np.zeros(spec.n_post)

    cursor = 0
    n_events = ev_step.size
    syn_in = np.zeros(spec.n_post)
    for t in range(n_steps):
        for f_idx, f_step in enumerate(fault_steps):
            if f_step == t:
                ev = spec.faults[f_idx]
                state.faulted[ev.neuron, fault_sets[f_idx]] = True
                state.pr[ev.neuron, fault_sets[f_idx]] = 0.0

        syn_in[:] = 0.0
        while cursor < n_events and ev_step[cursor] == t:
            k = ev_post[cursor]
            if ev_u[cursor] < state.pr[k, ev_pre[cursor]]:
                syn_in[k] += spec.j_syn
            cursor += 1

        # Post-neuron LIF: exact decay toward 0, instantaneous EPSP jumps.
        active = refrac == 0
        v[active] = v[active] * v_decay + syn_in[active]
        v[~active] = spec.v_reset
        refrac[~active] -= 1
        np.greater_equal(v, spec.v_threshold, out=spikes)
        spikes &= active
        if spikes.any():
            v[spikes] = spec.v_reset
            refrac[spikes] = refrac_steps

        ag_step(state, params, spikes)
        calcium_step(state, params)
        glu_step(state, params)
        esp_step(state, params)
        dse_compute(state, params)
        pr_update(state)

        acc_esp += state.esp
        acc_dse += state.dse
        acc_spikes += spikes
        if cls_high.size:
            acc_pr[0] += state.pr[target, cls_high].mean()
            acc_pr[1] += state.pr[target, cls_low].mean()
        if cls_faulty.size:
            acc_pr[2] += state.pr[target, cls_faulty].mean()

        if (t + 1) % steps_per_bin == 0:
            b = (t + 1) // steps_per_bin - 1
            if b < n_bins:
                log_esp[b] = acc_esp / steps_per_bin
                log_dse[:, b] = acc_dse / steps_per_bin
                if cls_high.size:
                    log_pr_high[b] = acc_pr[0] / steps_per_bin
                    log_pr_low[b] = acc_pr[1] / steps_per_bin
                if cls_faulty.size:
                    log_pr_faulty[b] = acc_pr[2] / steps_per_bin
                log_rates[:, b] = acc_spikes  # counts per 1 s bin = Hz
            acc_esp = 0.0
            acc_dse[:] = 0.0
            acc_pr[:] = 0.0
            acc_spikes[:] = 0.0

    return TraceLog(
        time_s=log_time,
        esp=log_esp,
        dse=log_dse,
        pr_healthy_high=log_pr_high,
        pr_healthy_low=log_pr_low,
        pr_faulty=log_pr_faulty,
        rates_hz=log_rates,
    )
