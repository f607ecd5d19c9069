"""End-to-end acceptance checks, one printed verdict line per criterion.

Each test prints `[PASS] criterion N: <measurements>` or the matching
`[FAIL]` line before asserting, so a full run documents the margins that
were actually measured. Criteria 6, 7, and 10 train networks on MNIST
subsets and dominate the runtime (above an hour together on one core);
the others finish within minutes. Criterion 9 reproduces the full-scale
reference accuracies and runs for hours, so it lives in
scripts/reproduce_full_scale.py and is skipped here unless
ASTROSNN_FULL_SCALE is set.
"""

from __future__ import annotations

import csv
import math
import os
import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from conftest import MNIST_DIR, requires_mnist

from astrosnn import cli
from astrosnn.astro import (
    AstroParams,
    MicroNetworkSpec,
    ag_step,
    glu_step,
    esp_step,
    new_astro_state,
    run_micro_experiment,
)
from astrosnn.checkpoint import load_checkpoint, network_from_checkpoint
from astrosnn.config import (
    default_config,
    make_encoder,
    make_lif,
    make_plasticity,
    make_protocol,
)
from astrosnn.data import load_standard_dataset, poisson_encode
from astrosnn.experiment import (
    FaultSpec,
    evaluate,
    inject_faults,
    repair,
    train_baseline,
)
from astrosnn.network import build_network, clone_network, run_sample
from astrosnn.plasticity import (
    compute_w_alpha,
    new_synapse_matrix,
    new_trace_state,
    normalize_weights,
    astdp_update,
    stdp_update,
)
from astrosnn.seeding import derive_rng, encode_rng

FULL_SCALE_FLAG = "ASTROSNN_FULL_SCALE"


def report(criterion: int, ok: bool, detail: str) -> None:
    """Print the verdict line for one criterion, then enforce it."""
    verdict = "PASS" if ok else "FAIL"
    print(f"[{verdict}] criterion {criterion}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def timed_micro_run(scenario: str, duration_s: float) -> tuple:
    spec = cli.builtin_scenario(scenario)
    start = time.time()
    log = run_micro_experiment(spec, AstroParams(), duration_s, seed=0)
    return log, time.time() - start


@pytest.fixture(scope="session")
def fig2_run():
    """400 s of the mid-run fault scenario, shared by criteria 1 and 2."""
    return timed_micro_run("fig2", 400.0)


@pytest.fixture(scope="session")
def fig5_run():
    """400 s of the two-survivor scenario for criterion 3."""
    return timed_micro_run("fig5", 400.0)


@pytest.fixture(scope="session")
def mnist10k():
    """The 10k train / 2k test MNIST subset used by criteria 5 to 8."""
    return load_standard_dataset(str(MNIST_DIR), "mnist", 10000, 2000)


@pytest.fixture(scope="session")
def desk_train(tmp_path_factory):
    """One CLI training run at desk scale, shared by criteria 6, 7, 10."""
    out = tmp_path_factory.mktemp("acceptance") / "train100"
    start = time.time()
    rc = cli.main(
        [
            "train",
            "--dataset", "mnist",
            "--data-dir", str(MNIST_DIR),
            "--out-dir", str(out),
            "--seed", "0",
            "--n-neurons", "100",
            "--epochs", "2",
            "--train-limit", "10000",
            "--test-limit", "2000",
        ]
    )
    assert rc == 0
    return out, time.time() - start


def read_series(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_criterion_01_micro_model_settles_before_fault(fig2_run):
    """Between 100 s and 200 s the healthy micro-model sits at equilibrium.

    Drift is measured between the [100, 150) s and [150, 200) s window
    means: per-neuron firing rate within 10%, release probability within
    5% of its baseline value of 0.5.
    """
    log, elapsed = fig2_run
    rate_drifts = []
    for neuron in range(2):
        first = log.rates_hz[neuron, 100:150].mean()
        second = log.rates_hz[neuron, 150:200].mean()
        rate_drifts.append(abs(second - first) / first)
    pr_first = log.pr_healthy_high[100:150].mean()
    pr_second = log.pr_healthy_high[150:200].mean()
    pr_drift = abs(pr_second - pr_first)
    ok = max(rate_drifts) < 0.10 and pr_drift < 0.05 * 0.5 and elapsed < 60.0
    report(
        1,
        ok,
        f"rate drift n1 {rate_drifts[0]:.2%}, n2 {rate_drifts[1]:.2%} (limit 10%), "
        f"PR drift {pr_drift:.4f} (limit 0.0250), 400 s simulated in {elapsed:.0f}s "
        f"(limit 60s for the 200 s pre-fault segment)",
    )


def test_criterion_02_fault_then_partial_recovery(fig2_run):
    """Breaking 70% of neuron 2's synapses at 200 s dents its rate, then
    the release probabilities climb back and the rate partially recovers
    while neuron 1 stays put."""
    log, _ = fig2_run
    n2 = log.rates_hz[1]
    pre_mean = n2[100:200].mean()
    post_min = n2[200:380].min()
    final = n2[380:400].mean()
    pr_at_fault = log.pr_healthy_high[195:200].mean()
    pr_at_end = log.pr_healthy_high[395:400].mean()
    n1 = log.rates_hz[0]
    n1_change = abs(n1[380:400].mean() - n1[100:200].mean()) / n1[100:200].mean()
    ok = (
        final > post_min
        and final < pre_mean
        and pr_at_end > pr_at_fault
        and n1_change < 0.10
    )
    report(
        2,
        ok,
        f"n2 rate pre {pre_mean:.2f} Hz, post-fault min {post_min:.2f}, final "
        f"{final:.2f} (must sit strictly between), healthy PR {pr_at_fault:.3f} -> "
        f"{pr_at_end:.3f} (must rise), n1 change {n1_change:.2%} (limit 10%)",
    )


def test_criterion_03_stronger_survivor_recovers_more(fig5_run):
    """With survivors of baseline release probability 0.5 and 0.1, the
    strong one gains at least twice as much PR between 200 s and 400 s."""
    log, _ = fig5_run
    delta_strong = log.pr_healthy_high[395:400].mean() - log.pr_healthy_high[195:200].mean()
    delta_weak = log.pr_healthy_low[395:400].mean() - log.pr_healthy_low[195:200].mean()
    ok = delta_strong >= 2.0 * delta_weak
    ratio = delta_strong / delta_weak if delta_weak != 0 else float("inf")
    report(
        3,
        ok,
        f"PR gain of 0.5-baseline survivor {delta_strong:.4f} vs 0.1-baseline "
        f"{delta_weak:.4f}, ratio {ratio:.2f} (limit 2.0)",
    )


def test_criterion_04_kinetics_percentile_and_timestep_oracles():
    """Unit-level oracles for the micro-model and the percentile weight.

    (a) The messenger kinetics match closed forms within 1% at dt = 1 ms:
        the 2-AG and glutamate pools decay as exact exponentials after an
        impulse, and the slow potentiation signal follows the
        double-exponential response of its first-order filter.
    (b) compute_w_alpha agrees exactly with a flat-sort nearest-rank
        oracle on 1000 random matrices.
    (c) Rate curves at dt = 0.1 ms and 1.0 ms agree within 5% (20 s
        windows and whole-run means), in under 2 minutes.
    """
    start = time.time()
    params = AstroParams()

    # (a) 2-AG impulse then free decay.
    state = new_astro_state(np.array([[0.5]]), params)
    ag_step(state, params, np.array([True]))
    worst_ag = 0.0
    steps_done = 0
    for target in (1, 10, 100, 1000, 20000):
        while steps_done < target:
            ag_step(state, params, np.array([False]))
            steps_done += 1
        expected = params.r_ag * math.exp(-steps_done * params.dt_ms / params.tau_ag_ms)
        worst_ag = max(worst_ag, abs(state.ag[0] - expected) / expected)

    # Glutamate impulse (one calcium event) then free decay.
    state = new_astro_state(np.array([[0.5]]), params)
    state.ca_event = True
    glu_step(state, params)
    state.ca_event = False
    worst_glu = 0.0
    steps_done = 0
    for target in (1, 10, 100, 1000, 20000):
        while steps_done < target:
            glu_step(state, params)
            steps_done += 1
        expected = params.r_glu * math.exp(-steps_done * params.dt_ms / params.tau_glu_ms)
        worst_glu = max(worst_glu, abs(state.glu - expected) / expected)

    # Slow potentiation signal driven by that glutamate impulse.
    state = new_astro_state(np.array([[0.5]]), params)
    state.ca_event = True
    glu_step(state, params)
    state.ca_event = False
    esp_step(state, params)
    tau_g, tau_e = params.tau_glu_ms, params.tau_esp_ms
    amp = params.m_esp * params.r_glu / (tau_e / tau_g - 1.0)
    t_grid = np.arange(1, 20001, dtype=np.float64) * params.dt_ms
    reference = amp * (np.exp(-t_grid / tau_e) - np.exp(-t_grid / tau_g))
    peak = float(reference.max())
    worst_esp = abs(state.esp - reference[0]) / peak
    for k in range(1, 20000):
        glu_step(state, params)
        esp_step(state, params)
        worst_esp = max(worst_esp, abs(state.esp - reference[k]) / peak)

    # (b) nearest-rank percentile against a flat sort.
    rng = np.random.default_rng(2024)
    mismatches = 0
    for i in range(1000):
        shape = (int(rng.integers(1, 31)), int(rng.integers(1, 31)))
        w = rng.random(shape)
        if i % 4 == 1:
            w = np.round(w, 1)  # heavy ties
        elif i % 4 == 2:
            w[rng.random(shape) < 0.5] = 0.0  # many zeros
        elif i % 4 == 3 and i % 8 == 3:
            w[:] = 0.0
        alpha = 100.0 if i % 5 == 0 else float(rng.uniform(0.001, 100.0))
        rank = math.ceil(alpha / 100.0 * w.size)
        expected = np.sort(w.ravel())[rank - 1]
        if compute_w_alpha(w, alpha) != expected:
            mismatches += 1

    # (c) timestep invariance of the healthy scenario's rate curves.
    coarse = run_micro_experiment(MicroNetworkSpec(), AstroParams(dt_ms=1.0), 100.0, seed=0)
    fine = run_micro_experiment(MicroNetworkSpec(), AstroParams(dt_ms=0.1), 100.0, seed=0)
    win_coarse = coarse.rates_hz.reshape(2, 5, 20).mean(axis=2)
    win_fine = fine.rates_hz.reshape(2, 5, 20).mean(axis=2)
    worst_window = float(np.max(np.abs(win_fine - win_coarse) / win_coarse))
    mean_coarse = coarse.rates_hz.mean(axis=1)
    mean_fine = fine.rates_hz.mean(axis=1)
    worst_mean = float(np.max(np.abs(mean_fine - mean_coarse) / mean_coarse))
    elapsed = time.time() - start

    ok = (
        worst_ag < 0.01
        and worst_glu < 0.01
        and worst_esp < 0.01
        and mismatches == 0
        and worst_window < 0.05
        and worst_mean < 0.05
        and elapsed < 120.0
    )
    report(
        4,
        ok,
        f"closed-form error 2-AG {worst_ag:.2e}, glutamate {worst_glu:.2e}, slow "
        f"signal {worst_esp:.2e} (limit 1e-2 each); percentile mismatches "
        f"{mismatches}/1000 (limit 0); dt 0.1 vs 1.0 ms rate difference "
        f"{worst_window:.2%} over 20 s windows, {worst_mean:.2%} whole-run "
        f"(limit 5%); elapsed {elapsed:.0f}s (limit 120s)",
    )


@requires_mnist
def test_criterion_05_zero_sigma_matches_plain_rule_bitwise(mnist10k):
    """With the weight-ratio exponent at zero the surrogate rule IS the
    plain rule: a 2200-sample faulted training run stays bit-identical,
    and at w equal to the reference weight one update matches exactly."""
    start = time.time()
    cfg_run = replace(default_config("mnist"), n_neurons=50)
    lif, plast = make_lif(cfg_run), make_plasticity(cfg_run)
    encoder = make_encoder(cfg_run)
    net_surrogate = build_network(784, 50, 7, lif=lif, plast=replace(plast, sigma=0.0))
    net_plain = build_network(784, 50, 7, lif=replace(lif), plast=replace(plast))

    for k in range(200):
        raster = poisson_encode(mnist10k.train_x[k], encoder, encode_rng(7, k, 0))
        run_sample(net_surrogate, raster, learn=True, rule="stdp")
        run_sample(net_plain, raster, learn=True, rule="stdp")
    for net in (net_surrogate, net_plain):
        inject_faults(net, FaultSpec(0.3, 7))
        normalize_weights(net.syn, net.plast.w_norm)

    mismatched_samples = 0
    w_alpha = compute_w_alpha(net_surrogate.syn.w, net_surrogate.plast.alpha)
    for k in range(2000):
        if k % 16 == 0:
            w_alpha = compute_w_alpha(net_surrogate.syn.w, net_surrogate.plast.alpha)
        raster = poisson_encode(mnist10k.train_x[200 + k], encoder, encode_rng(7, 200 + k, 1))
        out_s = run_sample(net_surrogate, raster, learn=True, rule="astdp", w_alpha=w_alpha)
        out_p = run_sample(net_plain, raster, learn=True, rule="stdp")
        if not np.array_equal(out_s.spike_counts, out_p.spike_counts):
            mismatched_samples += 1
    bitwise_identical = (
        mismatched_samples == 0
        and np.array_equal(net_surrogate.syn.w, net_plain.syn.w)
        and np.array_equal(net_surrogate.state.theta, net_plain.state.theta)
    )

    # One update at w exactly equal to the reference weight.
    plast_unit = replace(plast, sigma=2.0)
    increments = {}
    for w0 in (0.14, 0.37, 0.74):
        syn_s = new_synapse_matrix(1, 1, derive_rng(0, 99))
        syn_a = new_synapse_matrix(1, 1, derive_rng(0, 99))
        syn_s.w[:] = w0
        syn_a.w[:] = w0
        traces = new_trace_state(1, 1)
        traces.x_pre[:] = 0.8
        pre = np.array([False])
        post = np.array([True])
        stdp_update(syn_s, traces, plast_unit, pre, post)
        astdp_update(syn_a, traces, plast_unit, pre, post, 0.37)
        increments[w0] = (syn_a.w[0, 0] - w0, syn_s.w[0, 0] - w0)
    multiplier_one_exact = increments[0.37][0] == increments[0.37][1]
    scaling_live = (
        increments[0.14][0] < increments[0.14][1]
        and increments[0.74][0] > increments[0.74][1]
    )
    elapsed = time.time() - start

    ok = bitwise_identical and multiplier_one_exact and scaling_live and elapsed < 300.0
    report(
        5,
        ok,
        f"2200-sample zero-exponent run bit-identical to the plain rule "
        f"({mismatched_samples} spike mismatches, weights and thresholds equal: "
        f"{bitwise_identical}); update at w = reference weight bitwise equal: "
        f"{multiplier_one_exact}; scaling strictly below/above elsewhere: "
        f"{scaling_live}; elapsed {elapsed:.0f}s (limit 300s)",
    )


@requires_mnist
def test_criterion_06_desk_scale_baseline_accuracy(desk_train):
    """Plain-rule training of 100 neurons on 10k MNIST samples reaches at
    least 0.60 test accuracy on the 2k-sample test subset."""
    out, elapsed = desk_train
    rows = read_series(out / "train_series.csv")
    accuracy = float(rows[-1]["test_accuracy"])
    ok = accuracy >= 0.60
    report(
        6,
        ok,
        f"baseline accuracy {accuracy:.4f} (limit 0.60), trained and evaluated "
        f"in {elapsed / 60:.1f} min",
    )


@requires_mnist
def test_criterion_07_self_repair_trend(desk_train, mnist10k):
    """Fault, renormalize, and retrain at desk scale, checking the
    recovery ordering at p_del 0.8 and the repair gain trend between
    p_del 0.5 and 0.9 (mean over seeds 0, 1, 2)."""
    start = time.time()
    data = mnist10k
    out, _ = desk_train
    cfg_run = replace(default_config("mnist"), n_neurons=100, eval_cadence=2000)
    cfg = make_protocol(cfg_run)

    base0, assign0 = network_from_checkpoint(load_checkpoint(str(out / "baseline.ckpt")))
    nets = {0: (base0, assign0)}
    for seed in (1, 2):
        net = build_network(784, 100, seed, lif=make_lif(cfg_run), plast=make_plasticity(cfg_run))
        net, _, assignment = train_baseline(net, data, 2, seed, cfg)
        nets[seed] = (net, assignment)

    def cell(seed: int, p_del: float, rules: tuple[str, ...]) -> dict:
        base, assignment = nets[seed]
        faulted = clone_network(base)
        inject_faults(faulted, FaultSpec(p_del, seed))
        accs = {
            "fault": evaluate(faulted, assignment, data.test_x, data.test_y, cfg, seed).accuracy
        }
        normed = clone_network(faulted)
        normalize_weights(normed.syn, normed.plast.w_norm)
        accs["norm"] = evaluate(normed, assignment, data.test_x, data.test_y, cfg, seed).accuracy
        for rule in rules:
            retrained = clone_network(faulted)
            _, records, _ = repair(retrained, data, rule, seed=seed, cfg=cfg)
            accs[rule] = records[-1].test_accuracy
        return accs

    heavy = cell(0, 0.8, ("astdp", "stdp"))
    gains = {}
    for p_del in (0.5, 0.9):
        gains[p_del] = []
        for seed in (0, 1, 2):
            accs = cell(seed, p_del, ("astdp",))
            gains[p_del].append(accs["astdp"] - accs["norm"])
    gain_low = float(np.mean(gains[0.5]))
    gain_high = float(np.mean(gains[0.9]))
    elapsed = time.time() - start

    checks = {
        "fault<norm": heavy["fault"] < heavy["norm"],
        "astdp>norm": heavy["astdp"] > heavy["norm"],
        "astdp>stdp": heavy["astdp"] > heavy["stdp"],
        "gain trend": gain_high >= gain_low,
    }
    ok = all(checks.values())
    report(
        7,
        ok,
        f"at p_del 0.8: fault {heavy['fault']:.4f} < norm {heavy['norm']:.4f} "
        f"({checks['fault<norm']}), astdp {heavy['astdp']:.4f} > norm "
        f"({checks['astdp>norm']}), astdp > stdp {heavy['stdp']:.4f} "
        f"({checks['astdp>stdp']}); mean repair gain over norm at 0.9 "
        f"{gain_high:+.4f} >= at 0.5 {gain_low:+.4f} ({checks['gain trend']}); "
        f"elapsed {elapsed / 60:.0f} min",
    )


@requires_mnist
def test_criterion_08_stuck_synapses_stay_stuck(mnist10k):
    """Every stuck-at-zero coordinate survives both repair rules
    untouched: the mask is unchanged and those weights are exactly 0,
    checked over the whole matrix."""
    start = time.time()
    small = replace(
        mnist10k,
        train_x=mnist10k.train_x[:600],
        train_y=mnist10k.train_y[:600],
        test_x=mnist10k.test_x[:200],
        test_y=mnist10k.test_y[:200],
    )
    cfg_run = replace(
        default_config("mnist"), n_neurons=30, eval_cadence=600, cadence_assign_n=300
    )
    cfg = make_protocol(cfg_run)
    net = build_network(784, 30, 3, lif=make_lif(cfg_run), plast=make_plasticity(cfg_run))
    for k in range(100):
        raster = poisson_encode(small.train_x[k], cfg.encoder, encode_rng(3, k, 0))
        run_sample(net, raster, learn=True, rule="stdp")
    inject_faults(net, FaultSpec(0.7, 3))
    mask = net.syn.healthy.copy()

    outcomes = {}
    for rule in ("astdp", "stdp"):
        retrained = clone_network(net)
        repair(retrained, small, rule, epochs=1, seed=3, cfg=cfg)
        outcomes[rule] = (
            np.array_equal(retrained.syn.healthy, mask),
            bool((retrained.syn.w[~mask] == 0.0).all()),
        )
    elapsed = time.time() - start
    ok = all(same and zero for same, zero in outcomes.values())
    report(
        8,
        ok,
        f"{int((~mask).sum())} stuck coordinates checked exhaustively after each "
        f"rule; mask unchanged and weights exactly zero: astdp {outcomes['astdp']}, "
        f"stdp {outcomes['stdp']}; elapsed {elapsed:.0f}s",
    )


@pytest.mark.skipif(
    not os.environ.get(FULL_SCALE_FLAG),
    reason=(
        "multi-hour full-scale run; execute scripts/reproduce_full_scale.py "
        f"directly or set {FULL_SCALE_FLAG}=1 to run it here"
    ),
)
def test_criterion_09_full_scale_reproduction():
    """Delegates to the documented script that trains 225 neurons on the
    full dataset and checks the full-scale accuracy bands."""
    script = Path(__file__).resolve().parents[1] / "scripts" / "reproduce_full_scale.py"
    proc = subprocess.run([sys.executable, str(script)], cwd=str(script.parents[1]))
    report(9, proc.returncode == 0, f"reproduce_full_scale.py exit code {proc.returncode}")


@requires_mnist
def test_criterion_10_manifest_reruns_reproduce_csvs(desk_train, tmp_path):
    """Re-running a command from its recorded manifest reproduces every
    CSV byte for byte, shown for the training run of criterion 6 and a
    fault run on its checkpoint."""
    out, _ = desk_train
    start = time.time()
    rerun = tmp_path / "train_rerun"
    rc = cli.main(["train", "--config", str(out / "manifest.txt"), "--out-dir", str(rerun)])
    train_identical = rc == 0 and (out / "train_series.csv").read_bytes() == (
        rerun / "train_series.csv"
    ).read_bytes()

    fault_first = tmp_path / "fault_first"
    fault_again = tmp_path / "fault_again"
    rc1 = cli.main(
        [
            "fault",
            "--checkpoint", str(out / "baseline.ckpt"),
            "--p-del", "0.8",
            "--seed", "0",
            "--data-dir", str(MNIST_DIR),
            "--out-dir", str(fault_first),
        ]
    )
    rc2 = cli.main(
        ["fault", "--config", str(fault_first / "manifest.txt"), "--out-dir", str(fault_again)]
    )
    fault_identical = (
        rc1 == 0
        and rc2 == 0
        and (fault_first / "fault_metrics.csv").read_bytes()
        == (fault_again / "fault_metrics.csv").read_bytes()
    )
    elapsed = time.time() - start
    ok = train_identical and fault_identical
    report(
        10,
        ok,
        f"train_series.csv byte-identical on manifest rerun: {train_identical}; "
        f"fault_metrics.csv byte-identical on manifest rerun: {fault_identical}; "
        f"elapsed {elapsed / 60:.1f} min",
    )
