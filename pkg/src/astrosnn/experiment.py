"""Training, evaluation, fault injection, and repair protocol.

The pipeline mirrors one study cell end to end: train a fresh network
with plain STDP and keep the best checkpoint, assign a class to each
neuron from its training-set responses, measure test accuracy by class
vote, knock out synapses, then retrain with either rule and measure
again. All sample encodings draw from per-sample derived RNG streams, so
every phase is reproducible in isolation and insensitive to the order in
which phases run.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import DatasetBundle, EncoderConfig, poisson_encode
from .errors import ConfigError, ProtocolError
from .network import (
    Network,
    clone_network,
    clone_weights,
    restore_weights,
    run_eval_batch,
    run_sample,
)
from .plasticity import compute_w_alpha, normalize_weights
from .seeding import TAG_FAULT, TAG_SHUFFLE, derive_rng, encode_rng

logger = logging.getLogger(__name__)

N_CLASSES = 10

# Presentation-stream offsets. Baseline training uses presentations
# 0..epochs-1, so the other phases sit far above any plausible epoch
# count and never reuse a training stream.
PHASE_ASSIGN = 10_000
PHASE_EVAL = 20_000
PHASE_REPAIR = 30_000


@dataclass
class ProtocolConfig:
    """Knobs of the experiment protocol itself, not of the network."""

    epochs: int = 2
    repair_epochs: int = 3
    eval_cadence: int = 1000
    cadence_assign_n: int = 1000
    batch_size: int = 16
    patience: int = 2
    max_retries: int = 4
    retry_bump_hz: float = 32.0
    encoder: EncoderConfig = field(default_factory=EncoderConfig)

    def validate(self) -> None:
        if self.epochs < 0 or self.repair_epochs < 1:
            raise ConfigError("epoch counts must be non-negative (repair at least 1)")
        if self.eval_cadence < 1 or self.batch_size < 1:
            raise ConfigError("eval_cadence and batch_size must be positive")
        if self.max_retries < 0 or self.retry_bump_hz < 0:
            raise ConfigError("retry settings must be non-negative")
        self.encoder.validate()


@dataclass
class FaultSpec:
    p_del: float
    seed: int

    def validate(self) -> None:
        if not 0.0 <= self.p_del <= 1.0:
            raise ConfigError(f"p_del must lie in [0, 1], got {self.p_del}")


@dataclass
class ClassAssignment:
    neuron_class: np.ndarray
    response_matrix: np.ndarray
    n_silent: int = 0


@dataclass
class ExperimentRecord:
    phase: str
    samples_seen: int
    test_accuracy: float
    w_alpha_value: float
    seed: int


@dataclass
class EvalResult:
    accuracy: float
    predictions: np.ndarray
    n_retried: int
    n_fallback: int


@dataclass
class SuiteRow:
    dataset: str
    n_neurons: int
    p_del: float
    seed: int
    acc_baseline: float
    acc_post_fault: float
    acc_post_norm: float
    acc_stdp_retrain: float
    acc_astdp_retrain: float


EVAL_CHUNK = 128


def _encode_chunk(
    images: np.ndarray,
    sample_indices: np.ndarray,
    encoder: EncoderConfig,
    seed: int,
    presentation: int,
) -> np.ndarray:
    rasters = np.empty((len(sample_indices), encoder.n_steps, images.shape[1]), dtype=bool)
    for row, i in enumerate(sample_indices):
        rasters[row] = poisson_encode(images[i], encoder, encode_rng(seed, int(i), presentation))
    return rasters


def assign_classes(
    net: Network,
    images: np.ndarray,
    labels: np.ndarray,
    encoder: EncoderConfig,
    seed: int,
) -> ClassAssignment:
    """Label each neuron with the class it responds to most, on average.

    Runs an inference pass over the labeled set, accumulates per-class
    mean spike counts, and takes the argmax per neuron. Ties, including
    fully silent neurons, resolve to the lowest class id; silent neurons
    are counted and reported.
    """
    totals_by_class = np.zeros((N_CLASSES, net.n_neurons))
    class_counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=N_CLASSES)
    n = images.shape[0]
    for start in range(0, n, EVAL_CHUNK):
        idx = np.arange(start, min(start + EVAL_CHUNK, n))
        rasters = _encode_chunk(images, idx, encoder, seed, PHASE_ASSIGN)
        counts, _ = run_eval_batch(net, rasters)
        np.add.at(totals_by_class, np.asarray(labels)[idx], counts)
    response = np.zeros((net.n_neurons, N_CLASSES))
    np.divide(
        totals_by_class.T, class_counts[None, :], out=response, where=class_counts[None, :] > 0
    )
    neuron_class = np.argmax(response, axis=1).astype(np.int64)
    silent = int((response.max(axis=1) == 0).sum())
    if silent:
        logger.warning("%d of %d neurons never spiked during class assignment", silent, net.n_neurons)
    return ClassAssignment(neuron_class=neuron_class, response_matrix=response, n_silent=silent)


def class_votes(values: np.ndarray, assignment: ClassAssignment) -> np.ndarray:
    """Mean of values over the neurons assigned to each class.

    Classes with no neurons contribute 0. values is any per-neuron score
    (spike counts normally, cumulative currents in the silent fallback)
    and may carry leading batch dimensions; votes line up on the last
    axis.
    """
    votes = np.zeros(values.shape[:-1] + (N_CLASSES,))
    for c in range(N_CLASSES):
        members = assignment.neuron_class == c
        if members.any():
            votes[..., c] = values[..., members].mean(axis=-1)
    return votes


def evaluate(
    net: Network,
    assignment: ClassAssignment,
    images: np.ndarray,
    labels: np.ndarray,
    cfg: ProtocolConfig,
    seed: int,
) -> EvalResult:
    """Class-vote accuracy over a labeled set.

    A sample that elicits no output spikes is re-presented at a higher
    input rate up to max_retries times; if the network stays silent the
    prediction falls back to the class vote over cumulative input
    currents, so every sample gets a prediction.
    """
    n = images.shape[0]
    predictions = np.full(n, -1, dtype=np.int64)
    n_retried = 0
    base = cfg.encoder
    pending = np.arange(n)
    last_currents = np.zeros((n, net.n_neurons))
    for attempt in range(cfg.max_retries + 1):
        if pending.size == 0:
            break
        encoder = EncoderConfig(
            max_rate_hz=base.max_rate_hz + attempt * cfg.retry_bump_hz,
            duration_ms=base.duration_ms,
            dt_ms=base.dt_ms,
        )
        still_silent = []
        for start in range(0, pending.size, EVAL_CHUNK):
            idx = pending[start : start + EVAL_CHUNK]
            rasters = _encode_chunk(images, idx, encoder, seed, PHASE_EVAL + attempt)
            counts, currents = run_eval_batch(net, rasters)
            responded = counts.sum(axis=1) > 0
            if responded.any():
                votes = class_votes(counts[responded].astype(np.float64), assignment)
                predictions[idx[responded]] = np.argmax(votes, axis=1)
                if attempt > 0:
                    n_retried += int(responded.sum())
            last_currents[idx[~responded]] = currents[~responded]
            still_silent.extend(idx[~responded])
        pending = np.array(still_silent, dtype=np.int64)
    n_fallback = int(pending.size)
    if n_fallback:
        votes = class_votes(last_currents[pending], assignment)
        predictions[pending] = np.argmax(votes, axis=1)
    accuracy = float((predictions == np.asarray(labels)).mean())
    return EvalResult(
        accuracy=accuracy, predictions=predictions, n_retried=n_retried, n_fallback=n_fallback
    )


def _measure(
    net: Network,
    data: DatasetBundle,
    cfg: ProtocolConfig,
    seed: int,
    assign_n: int | None,
) -> tuple[float, ClassAssignment]:
    """Assign classes on (a prefix of) the training set, then evaluate."""
    ax = data.train_x[:assign_n] if assign_n else data.train_x
    ay = data.train_y[:assign_n] if assign_n else data.train_y
    assignment = assign_classes(net, ax, ay, cfg.encoder, seed)
    result = evaluate(net, assignment, data.test_x, data.test_y, cfg, seed)
    return result.accuracy, assignment


def train_baseline(
    net: Network,
    data: DatasetBundle,
    epochs: int,
    seed: int,
    cfg: ProtocolConfig | None = None,
) -> tuple[Network, list[ExperimentRecord], ClassAssignment]:
    """Train with plain STDP and return the best checkpoint seen.

    Shuffles per epoch with a seed-derived permutation, measures test
    accuracy every eval_cadence samples (assignment from a training
    prefix), and restores the weights of the best measurement at the end.
    The final record holds the returned network's accuracy with a
    full-training-set assignment.
    """
    cfg = cfg or ProtocolConfig()
    cfg.validate()
    records: list[ExperimentRecord] = []
    best: tuple[float, tuple, int] | None = None
    samples_seen = 0

    def cadence_point() -> None:
        nonlocal best
        acc, _ = _measure(net, data, cfg, seed, cfg.cadence_assign_n)
        records.append(
            ExperimentRecord(
                phase="baseline",
                samples_seen=samples_seen,
                test_accuracy=acc,
                w_alpha_value=compute_w_alpha(net.syn.w, net.plast.alpha),
                seed=seed,
            )
        )
        if best is None or acc > best[0]:
            best = (acc, clone_weights(net), samples_seen)

    for epoch in range(epochs):
        order = derive_rng(seed, TAG_SHUFFLE, epoch).permutation(data.train_x.shape[0])
        for idx in order:
            raster = poisson_encode(
                data.train_x[idx], cfg.encoder, encode_rng(seed, int(idx), epoch)
            )
            run_sample(net, raster, learn=True, rule="stdp")
            samples_seen += 1
            if samples_seen % cfg.eval_cadence == 0:
                cadence_point()
    if best is None or samples_seen % cfg.eval_cadence != 0:
        cadence_point()

    assert best is not None
    restore_weights(net, best[1])
    final_acc, assignment = _measure(net, data, cfg, seed, assign_n=None)
    records.append(
        ExperimentRecord(
            phase="baseline",
            samples_seen=best[2],
            test_accuracy=final_acc,
            w_alpha_value=compute_w_alpha(net.syn.w, net.plast.alpha),
            seed=seed,
        )
    )
    return net, records, assignment


def inject_faults(net: Network, spec: FaultSpec) -> int:
    """Mark each still-healthy synapse stuck at zero with probability
    p_del, independently. Returns the number of newly stuck synapses."""
    spec.validate()
    rng = derive_rng(spec.seed, TAG_FAULT)
    draws = rng.random(net.syn.w.shape)
    new_stuck = (draws < spec.p_del) & net.syn.healthy
    net.syn.healthy[new_stuck] = False
    net.syn.w[~net.syn.healthy] = 0.0
    return int(new_stuck.sum())


def repair(
    net: Network,
    data: DatasetBundle,
    rule: str,
    epochs: int | None = None,
    seed: int = 0,
    cfg: ProtocolConfig | None = None,
) -> tuple[Network, list[ExperimentRecord], ClassAssignment]:
    """Retrain a faulted network after one weight renormalization.

    Renormalization happens exactly once, up front; the retraining loop
    itself runs without the per-sample renormalization used during
    baseline training, so the learning rule alone shapes the surviving
    weights. The surrogate rule recomputes its reference weight every
    batch_size samples and falls back to plain potentiation for a batch
    whose reference is degenerate (all-zero percentile). It keeps the best
    accuracy seen at the evaluation cadence and stops early after
    `patience` non-improving measurements; the plain rule runs its epochs
    to the end and reports the final state. Classes are reassigned from
    the full training set before the final record.
    """
    cfg = cfg or ProtocolConfig()
    cfg.validate()
    if rule not in ("stdp", "astdp"):
        raise ConfigError(f"unknown repair rule {rule!r}")
    if not net.has_faults:
        raise ProtocolError("repair called on a network with no stuck-at-zero faults")
    if epochs is None:
        epochs = cfg.repair_epochs if rule == "astdp" else 1

    normalize_weights(net.syn, net.plast.w_norm)
    records: list[ExperimentRecord] = []
    best: tuple[float, tuple, int] | None = None
    samples_seen = 0
    last_recorded = -1
    streak = 0
    stopped = False
    w_alpha = 0.0
    degenerate_batches = 0

    def cadence_point() -> None:
        nonlocal best, streak, last_recorded
        acc, _ = _measure(net, data, cfg, seed, cfg.cadence_assign_n)
        records.append(
            ExperimentRecord(
                phase="repair",
                samples_seen=samples_seen,
                test_accuracy=acc,
                w_alpha_value=compute_w_alpha(net.syn.w, net.plast.alpha),
                seed=seed,
            )
        )
        last_recorded = samples_seen
        if best is None or acc > best[0]:
            best = (acc, clone_weights(net), samples_seen)
            streak = 0
        else:
            streak += 1

    for epoch in range(epochs):
        order = derive_rng(seed, TAG_SHUFFLE, PHASE_REPAIR + epoch).permutation(
            data.train_x.shape[0]
        )
        for idx in order:
            effective_rule = rule
            if rule == "astdp":
                if samples_seen % cfg.batch_size == 0:
                    w_alpha = compute_w_alpha(net.syn.w, net.plast.alpha)
                    if w_alpha <= 0.0:
                        degenerate_batches += 1
                        if degenerate_batches == 1:
                            logger.warning(
                                "reference weight percentile is zero at sample %d; "
                                "falling back to plain potentiation for such batches",
                                samples_seen,
                            )
                if w_alpha <= 0.0:
                    effective_rule = "stdp"
            raster = poisson_encode(
                data.train_x[idx], cfg.encoder, encode_rng(seed, int(idx), PHASE_REPAIR + epoch)
            )
            run_sample(
                net,
                raster,
                learn=True,
                rule=effective_rule,
                w_alpha=w_alpha or None,
                normalize=False,
            )
            samples_seen += 1
            if samples_seen % cfg.eval_cadence == 0:
                cadence_point()
                if rule == "astdp" and streak >= cfg.patience:
                    stopped = True
                    break
        if stopped:
            break
    if last_recorded != samples_seen or best is None:
        cadence_point()

    assert best is not None
    if rule == "astdp":
        restore_weights(net, best[1])
        reported_at = best[2]
    else:
        reported_at = samples_seen
    final_acc, assignment = _measure(net, data, cfg, seed, assign_n=None)
    records.append(
        ExperimentRecord(
            phase="repair",
            samples_seen=reported_at,
            test_accuracy=final_acc,
            w_alpha_value=compute_w_alpha(net.syn.w, net.plast.alpha),
            seed=seed,
        )
    )
    return net, records, assignment


def run_suite(
    build_net,
    data: DatasetBundle,
    p_del_list: list[float],
    n_seeds: int,
    base_seed: int,
    cfg: ProtocolConfig | None = None,
) -> tuple[list[SuiteRow], dict[tuple[float, int, str], list[ExperimentRecord]]]:
    """Full fault/repair sweep: one row per (p_del, seed) cell.

    build_net(seed) must return a fresh network. Each seed trains one
    baseline that is shared across its p_del cells; every cell gets
    independent fault, normalization, and repair copies. Also returns the
    per-run record series keyed by (p_del, seed, label) for the
    time-series CSVs, with baselines under p_del = -1.
    """
    cfg = cfg or ProtocolConfig()
    rows: list[SuiteRow] = []
    series: dict[tuple[float, int, str], list[ExperimentRecord]] = {}
    for k in range(n_seeds):
        seed = base_seed + k
        baseline = build_net(seed)
        baseline, base_records, base_assignment = train_baseline(
            baseline, data, cfg.epochs, seed, cfg
        )
        series[(-1.0, seed, "baseline")] = base_records
        acc_baseline = base_records[-1].test_accuracy
        for p_del in p_del_list:
            faulted = clone_network(baseline)
            inject_faults(faulted, FaultSpec(p_del=p_del, seed=seed))
            acc_fault = evaluate(
                faulted, base_assignment, data.test_x, data.test_y, cfg, seed
            ).accuracy

            normed = clone_network(faulted)
            normalize_weights(normed.syn, normed.plast.w_norm)
            acc_norm = evaluate(
                normed, base_assignment, data.test_x, data.test_y, cfg, seed
            ).accuracy

            stdp_net = clone_network(faulted)
            _, stdp_records, _ = repair(stdp_net, data, "stdp", 1, seed, cfg)
            series[(p_del, seed, "stdp")] = stdp_records

            astdp_net = clone_network(faulted)
            _, astdp_records, _ = repair(astdp_net, data, "astdp", None, seed, cfg)
            series[(p_del, seed, "astdp")] = astdp_records

            rows.append(
                SuiteRow(
                    dataset=data.name,
                    n_neurons=baseline.n_neurons,
                    p_del=p_del,
                    seed=seed,
                    acc_baseline=acc_baseline,
                    acc_post_fault=acc_fault,
                    acc_post_norm=acc_norm,
                    acc_stdp_retrain=stdp_records[-1].test_accuracy,
                    acc_astdp_retrain=astdp_records[-1].test_accuracy,
                )
            )
    return rows, series


def summarize_suite(rows: list[SuiteRow]) -> list[dict]:
    """Mean and population std of each accuracy column, per p_del."""
    fields = [
        "acc_baseline",
        "acc_post_fault",
        "acc_post_norm",
        "acc_stdp_retrain",
        "acc_astdp_retrain",
    ]
    out = []
    for p_del in sorted({r.p_del for r in rows}):
        cell = [r for r in rows if r.p_del == p_del]
        entry: dict = {"p_del": p_del, "n_seeds": len(cell)}
        for name in fields:
            values = np.array([getattr(r, name) for r in cell])
            entry[name + "_mean"] = float(values.mean())
            entry[name + "_std"] = float(values.std())
        out.append(entry)
    return out
