"""Command-line interface for training, fault injection, repair, and demos.

Commands: train, fault, repair, eval, suite, astro-demo, dump-weights.
Every command writes its artifacts into one output directory together
with a manifest.txt recording the fully resolved configuration, the
invocation values, and a sha256 line per artifact. A manifest passed
back through --config re-runs the command with the same inputs, so every
CSV can be regenerated byte for byte.

Flag resolution order is: explicit flag, then the [invocation] section
of the --config file when present, then the command's default. For
train and suite the configuration file sections ([run], [lif], ...) are
read as well; checkpoint-based commands take their network parameters
from the checkpoint itself.

Exit codes: 0 success, 2 validation error, 3 data or parse error,
4 numerical fault.

Scenario files for astro-demo are plain text, one `key = value` pair
per line, with `#` starting a comment. Scalar keys: n_post, n_pre,
input_rate_hz, pr0. Repeatable keys:

    pr0_override = NEURON SYNAPSE VALUE
    fault = TIME_S NEURON FRACTION
    fault_synapses = TIME_S NEURON IDX [IDX ...]
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import config as config_mod
from .astro import AstroParams, FaultEvent, MicroNetworkSpec, run_micro_experiment
from .checkpoint import (
    checkpoint_from_network,
    load_checkpoint,
    network_from_checkpoint,
    save_checkpoint,
)
from .config import N_INPUT_PIXELS, RunConfig
from .data import load_standard_dataset
from .errors import (
    ConfigError,
    ContractViolationError,
    DataFormatError,
    NumericalFaultError,
    ProtocolError,
)
from .experiment import (
    ExperimentRecord,
    FaultSpec,
    evaluate,
    inject_faults,
    repair,
    run_suite,
    summarize_suite,
    train_baseline,
)
from .network import Network, build_network, clone_network
from .plasticity import normalize_weights

MANIFEST_NAME = "manifest.txt"
SERIES_HEADER = ["samples_seen", "test_accuracy", "w_alpha"]
SUITE_HEADER = [
    "dataset",
    "n_neurons",
    "p_del",
    "seed",
    "acc_baseline",
    "acc_post_fault",
    "acc_post_norm",
    "acc_stdp_retrain",
    "acc_astdp_retrain",
]
ACC_FIELDS = [
    "acc_baseline",
    "acc_post_fault",
    "acc_post_norm",
    "acc_stdp_retrain",
    "acc_astdp_retrain",
]
BUILTIN_SCENARIOS = ("fig2", "fig5")


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_manifest(
    out_dir: str,
    command: str,
    invocation: dict,
    cfg: RunConfig | None,
    artifacts: list[str],
) -> str:
    lines = []
    if cfg is not None:
        lines.append(config_mod.to_text(cfg).rstrip("\n"))
        lines.append("")
    lines.append("[invocation]")
    lines.append(f"command = {command}")
    for key, value in invocation.items():
        lines.append(f"{key} = {_fmt(value)}")
    lines.append("")
    lines.append("[artifacts]")
    for name in artifacts:
        lines.append(f"{name} = {_sha256(os.path.join(out_dir, name))}")
    path = os.path.join(out_dir, MANIFEST_NAME)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _read_invocation(path: str) -> dict[str, str]:
    """Invocation values recorded in a manifest given as --config."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if not parser.has_section("invocation"):
        return {}
    return dict(parser.items("invocation"))


def _resolve(args, inv: dict, name: str, cast, default):
    """Explicit flag beats manifest invocation value beats default."""
    value = getattr(args, name)
    if value is not None:
        return value
    if name in inv:
        try:
            return cast(inv[name])
        except ValueError as exc:
            raise ConfigError(
                f"cannot parse invocation value {name} = {inv[name]!r}"
            ) from exc
    return default


def _file_run_keys(path: str) -> set[str]:
    """Keys explicitly present in the [run] section of a config file."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_string(fh.read())
    except (OSError, configparser.Error):
        return set()
    if parser.has_section("run"):
        return set(parser["run"])
    return set()


def _load_run_config(args, command: str, extra_names: tuple = ()) -> RunConfig:
    """Resolve the full configuration for a config-driven command.

    Directory defaults are per command (runs/<command>) and per dataset
    (data/<dataset>) when neither a flag nor the config file pins them.
    """
    names = ("dataset", "seed", "out_dir", "data_dir") + extra_names
    overrides = {}
    for name in names:
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.config:
        cfg = config_mod.from_file(args.config, overrides)
        file_keys = _file_run_keys(args.config)
    else:
        cfg = config_mod.from_text("", overrides)
        file_keys = set()
    updates = {}
    if args.out_dir is None and "out_dir" not in file_keys:
        updates["out_dir"] = os.path.join("runs", command)
    if args.data_dir is None and "data_dir" not in file_keys:
        updates["data_dir"] = os.path.join("data", cfg.dataset)
    if updates:
        cfg = replace(cfg, **updates)
    return cfg


def _load_data(cfg: RunConfig):
    return load_standard_dataset(
        cfg.data_dir,
        cfg.dataset,
        train_limit=cfg.train_limit or None,
        test_limit=cfg.test_limit or None,
        use_sobel=cfg.sobel,
    )


def _build_network(cfg: RunConfig, seed: int) -> Network:
    return build_network(
        N_INPUT_PIXELS,
        cfg.n_neurons,
        seed,
        lif=config_mod.make_lif(cfg),
        plast=config_mod.make_plasticity(cfg),
        inhib=config_mod.make_inhibition(cfg),
    )


def _write_series(path: str, records: list[ExperimentRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_HEADER)
        for rec in records:
            writer.writerow(
                [rec.samples_seen, repr(rec.test_accuracy), repr(rec.w_alpha_value)]
            )


def _write_rows(path: str, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(value) for value in row])


def _load_checkpoint_arg(args, inv: dict, command: str):
    path = _resolve(args, inv, "checkpoint", str, None)
    if path is None:
        raise ConfigError(
            f"{command} needs --checkpoint (or a manifest that records one)"
        )
    return path, load_checkpoint(path)


def cmd_train(args) -> int:
    cfg = _load_run_config(
        args, "train", ("n_neurons", "epochs", "train_limit", "test_limit")
    )
    os.makedirs(cfg.out_dir, exist_ok=True)
    data = _load_data(cfg)
    protocol = config_mod.make_protocol(cfg)
    net = _build_network(cfg, cfg.seed)
    net, records, assignment = train_baseline(net, data, cfg.epochs, cfg.seed, protocol)
    final = records[-1]
    ckpt = checkpoint_from_network(cfg, net, assignment, "baseline", final.samples_seen)
    save_checkpoint(ckpt, os.path.join(cfg.out_dir, "baseline.ckpt"))
    _write_series(os.path.join(cfg.out_dir, "train_series.csv"), records)
    _write_manifest(
        cfg.out_dir, "train", {}, cfg, ["baseline.ckpt", "train_series.csv"]
    )
    print(f"baseline accuracy = {final.test_accuracy:.4f}")
    print(f"wrote {os.path.join(cfg.out_dir, 'baseline.ckpt')}")
    return 0


def cmd_fault(args) -> int:
    inv = _read_invocation(args.config) if args.config else {}
    ckpt_path, ckpt = _load_checkpoint_arg(args, inv, "fault")
    cfg = ckpt.config
    p_del = _resolve(args, inv, "p_del", float, cfg.p_del)
    seed = _resolve(args, inv, "seed", int, cfg.seed)
    out_dir = _resolve(args, inv, "out_dir", str, os.path.join("runs", "fault"))
    data_dir = _resolve(args, inv, "data_dir", str, cfg.data_dir)
    dataset = _resolve(args, inv, "dataset", str, cfg.dataset)
    cfg = replace(cfg, p_del=p_del, out_dir=out_dir, data_dir=data_dir, dataset=dataset)
    cfg.validate()
    os.makedirs(out_dir, exist_ok=True)

    net, assignment = network_from_checkpoint(ckpt)
    data = _load_data(cfg)
    protocol = config_mod.make_protocol(cfg)
    n_cut = inject_faults(net, FaultSpec(p_del=p_del, seed=seed))
    res_fault = evaluate(net, assignment, data.test_x, data.test_y, protocol, seed)
    normed = clone_network(net)
    normalize_weights(normed.syn, normed.plast.w_norm)
    res_norm = evaluate(normed, assignment, data.test_x, data.test_y, protocol, seed)

    out_ckpt = checkpoint_from_network(
        cfg, net, assignment, "post_fault", ckpt.samples_seen
    )
    save_checkpoint(out_ckpt, os.path.join(out_dir, "faulted.ckpt"))
    _write_rows(
        os.path.join(out_dir, "fault_metrics.csv"),
        ["phase", "accuracy"],
        [("post_fault", res_fault.accuracy), ("post_norm", res_norm.accuracy)],
    )
    invocation = {
        "checkpoint": ckpt_path,
        "p_del": p_del,
        "seed": seed,
        "out_dir": out_dir,
        "data_dir": data_dir,
        "dataset": dataset,
    }
    _write_manifest(
        out_dir, "fault", invocation, cfg, ["faulted.ckpt", "fault_metrics.csv"]
    )
    print(f"stuck {n_cut} synapses at zero (p_del = {p_del:g})")
    print(f"post-fault accuracy = {res_fault.accuracy:.4f}")
    print(f"post-normalization accuracy = {res_norm.accuracy:.4f}")
    return 0


def cmd_repair(args) -> int:
    inv = _read_invocation(args.config) if args.config else {}
    ckpt_path, ckpt = _load_checkpoint_arg(args, inv, "repair")
    cfg = ckpt.config
    rule = _resolve(args, inv, "rule", str, cfg.rule)
    epochs = _resolve(args, inv, "epochs", int, 0)
    seed = _resolve(args, inv, "seed", int, cfg.seed)
    out_dir = _resolve(args, inv, "out_dir", str, os.path.join("runs", "repair"))
    data_dir = _resolve(args, inv, "data_dir", str, cfg.data_dir)
    dataset = _resolve(args, inv, "dataset", str, cfg.dataset)
    cfg = replace(cfg, rule=rule, out_dir=out_dir, data_dir=data_dir, dataset=dataset)
    cfg.validate()
    os.makedirs(out_dir, exist_ok=True)

    net, _ = network_from_checkpoint(ckpt)
    data = _load_data(cfg)
    protocol = config_mod.make_protocol(cfg)
    net, records, assignment = repair(net, data, rule, epochs or None, seed, protocol)
    final = records[-1]
    out_ckpt = checkpoint_from_network(cfg, net, assignment, "repair", final.samples_seen)
    save_checkpoint(out_ckpt, os.path.join(out_dir, "repaired.ckpt"))
    _write_series(os.path.join(out_dir, "repair_series.csv"), records)
    _write_rows(
        os.path.join(out_dir, "repair_metrics.csv"),
        ["rule", "accuracy", "samples_seen"],
        [(rule, final.test_accuracy, final.samples_seen)],
    )
    invocation = {
        "checkpoint": ckpt_path,
        "rule": rule,
        "epochs": epochs,
        "seed": seed,
        "out_dir": out_dir,
        "data_dir": data_dir,
        "dataset": dataset,
    }
    _write_manifest(
        out_dir,
        "repair",
        invocation,
        cfg,
        ["repaired.ckpt", "repair_series.csv", "repair_metrics.csv"],
    )
    print(f"repair rule = {rule}")
    print(f"accuracy = {final.test_accuracy:.4f} after {final.samples_seen} samples")
    return 0


def cmd_eval(args) -> int:
    inv = _read_invocation(args.config) if args.config else {}
    ckpt_path, ckpt = _load_checkpoint_arg(args, inv, "eval")
    cfg = ckpt.config
    seed = _resolve(args, inv, "seed", int, cfg.seed)
    out_dir = _resolve(args, inv, "out_dir", str, os.path.join("runs", "eval"))
    data_dir = _resolve(args, inv, "data_dir", str, cfg.data_dir)
    dataset = _resolve(args, inv, "dataset", str, cfg.dataset)
    cfg = replace(cfg, out_dir=out_dir, data_dir=data_dir, dataset=dataset)
    cfg.validate()
    os.makedirs(out_dir, exist_ok=True)

    net, assignment = network_from_checkpoint(ckpt)
    data = _load_data(cfg)
    protocol = config_mod.make_protocol(cfg)
    res = evaluate(net, assignment, data.test_x, data.test_y, protocol, seed)
    _write_rows(
        os.path.join(out_dir, "eval_metrics.csv"),
        ["accuracy", "n_retried", "n_fallback"],
        [(res.accuracy, res.n_retried, res.n_fallback)],
    )
    invocation = {
        "checkpoint": ckpt_path,
        "seed": seed,
        "out_dir": out_dir,
        "data_dir": data_dir,
        "dataset": dataset,
    }
    _write_manifest(out_dir, "eval", invocation, cfg, ["eval_metrics.csv"])
    print(f"accuracy = {res.accuracy:.4f} ({ckpt.phase} checkpoint)")
    return 0


def _series_name(p_del: float, seed: int, label: str) -> str:
    if p_del < 0:
        return f"series_baseline_seed{seed}.csv"
    return f"series_p{p_del:g}_seed{seed}_{label}.csv"


def cmd_suite(args) -> int:
    cfg = _load_run_config(
        args,
        "suite",
        ("n_neurons", "epochs", "train_limit", "test_limit", "p_del_list", "n_seeds"),
    )
    os.makedirs(cfg.out_dir, exist_ok=True)
    data = _load_data(cfg)
    protocol = config_mod.make_protocol(cfg)

    def fresh_net(seed: int) -> Network:
        return _build_network(cfg, seed)

    rows, series = run_suite(
        fresh_net, data, list(cfg.p_del_list), cfg.n_seeds, cfg.seed, protocol
    )
    artifacts = ["suite_rows.csv", "suite_summary.csv"]
    _write_rows(
        os.path.join(cfg.out_dir, "suite_rows.csv"),
        SUITE_HEADER,
        [tuple(getattr(row, name) for name in SUITE_HEADER) for row in rows],
    )
    summary = summarize_suite(rows)
    summary_header = ["p_del", "n_seeds"] + [
        f"{name}_{stat}" for name in ACC_FIELDS for stat in ("mean", "std")
    ]
    _write_rows(
        os.path.join(cfg.out_dir, "suite_summary.csv"),
        summary_header,
        [tuple(entry[key] for key in summary_header) for entry in summary],
    )
    for (p_del, seed, label), records in sorted(series.items()):
        name = _series_name(p_del, seed, label)
        _write_series(os.path.join(cfg.out_dir, name), records)
        artifacts.append(name)
    _write_manifest(cfg.out_dir, "suite", {}, cfg, artifacts)
    for entry in summary:
        parts = ", ".join(
            f"{name[4:]} {entry[name + '_mean']:.4f}" for name in ACC_FIELDS
        )
        print(f"p_del = {entry['p_del']:g}: {parts}")
    return 0


def builtin_scenario(name: str) -> MicroNetworkSpec:
    """Built-in micro-model scenarios.

    fig2 breaks a random 70% of one neuron's synapses mid-run with a
    uniform baseline release probability. fig5 gives one synapse a much
    lower baseline and breaks a fixed set of eight, leaving one strong
    and one weak survivor.
    """
    if name == "fig2":
        return MicroNetworkSpec(
            faults=[FaultEvent(time_s=200.0, neuron=1, fraction=0.7)]
        )
    if name == "fig5":
        return MicroNetworkSpec(
            pr0_overrides=[(1, 9, 0.1)],
            faults=[FaultEvent(time_s=200.0, neuron=1, synapses=list(range(8)))],
        )
    raise ConfigError(f"unknown scenario {name!r}")


SCENARIO_SCALAR_KEYS = {
    "n_post": int,
    "n_pre": int,
    "input_rate_hz": float,
    "pr0": float,
}


def parse_scenario_text(text: str, source: str) -> MicroNetworkSpec:
    """Parse a scenario description; errors carry 1-based line numbers."""
    scalars: dict = {}
    overrides: list[tuple[int, int, float]] = []
    faults: list[FaultEvent] = []

    def fail(line_no: int, message: str):
        raise DataFormatError(f"{source}:{line_no}: {message}")

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            fail(line_no, "expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        parts = value.split()
        if key in SCENARIO_SCALAR_KEYS:
            if len(parts) != 1:
                fail(line_no, f"{key} takes exactly one value")
            try:
                scalars[key] = SCENARIO_SCALAR_KEYS[key](parts[0])
            except ValueError:
                fail(line_no, f"cannot parse {parts[0]!r} as {key}")
        elif key == "pr0_override":
            if len(parts) != 3:
                fail(line_no, "pr0_override takes NEURON SYNAPSE VALUE")
            try:
                overrides.append((int(parts[0]), int(parts[1]), float(parts[2])))
            except ValueError:
                fail(line_no, "cannot parse pr0_override values")
        elif key == "fault":
            if len(parts) != 3:
                fail(line_no, "fault takes TIME_S NEURON FRACTION")
            try:
                faults.append(
                    FaultEvent(
                        time_s=float(parts[0]),
                        neuron=int(parts[1]),
                        fraction=float(parts[2]),
                    )
                )
            except ValueError:
                fail(line_no, "cannot parse fault values")
        elif key == "fault_synapses":
            if len(parts) < 3:
                fail(line_no, "fault_synapses takes TIME_S NEURON IDX [IDX ...]")
            try:
                faults.append(
                    FaultEvent(
                        time_s=float(parts[0]),
                        neuron=int(parts[1]),
                        synapses=[int(p) for p in parts[2:]],
                    )
                )
            except ValueError:
                fail(line_no, "cannot parse fault_synapses values")
        else:
            fail(line_no, f"unknown scenario key {key!r}")
    return MicroNetworkSpec(pr0_overrides=overrides, faults=faults, **scalars)


def cmd_astro_demo(args) -> int:
    inv = _read_invocation(args.config) if args.config else {}
    scenario = _resolve(args, inv, "scenario", str, "fig2")
    duration_s = _resolve(args, inv, "duration_s", float, 400.0)
    seed = _resolve(args, inv, "seed", int, 0)
    out_dir = _resolve(args, inv, "out_dir", str, os.path.join("runs", "astro-demo"))
    os.makedirs(out_dir, exist_ok=True)
    if scenario in BUILTIN_SCENARIOS:
        spec = builtin_scenario(scenario)
    else:
        try:
            with open(scenario, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise DataFormatError(
                f"cannot read scenario file {scenario}: {exc}"
            ) from exc
        spec = parse_scenario_text(text, scenario)
    log = run_micro_experiment(spec, AstroParams(), duration_s, seed)
    trace_path = os.path.join(out_dir, "trace.csv")
    log.to_csv(trace_path)
    invocation = {
        "scenario": scenario,
        "duration_s": duration_s,
        "seed": seed,
        "out_dir": out_dir,
    }
    _write_manifest(out_dir, "astro-demo", invocation, None, ["trace.csv"])
    print(f"simulated {duration_s:g} s, wrote {trace_path}")
    return 0


def weight_grid_image(w: np.ndarray) -> np.ndarray:
    """Tile each weight column as a square patch into a uint8 grid.

    Columns are laid out row-major into the smallest square-ish grid;
    unused slots stay black. Intensities are scaled so the largest
    weight maps to 255; an all-zero matrix stays all black.
    """
    n_in, n_out = w.shape
    side = math.isqrt(n_in)
    if side * side != n_in:
        raise ContractViolationError(
            f"cannot tile {n_in} inputs into a square patch"
        )
    cols = int(math.ceil(math.sqrt(n_out)))
    rows = int(math.ceil(n_out / cols))
    image = np.zeros((rows * side, cols * side), dtype=np.float64)
    for j in range(n_out):
        r, c = divmod(j, cols)
        image[r * side : (r + 1) * side, c * side : (c + 1) * side] = w[:, j].reshape(
            side, side
        )
    peak = image.max()
    if peak > 0:
        image *= 255.0 / peak
    return np.rint(np.clip(image, 0.0, 255.0)).astype(np.uint8)


def write_pgm(path: str, image: np.ndarray) -> None:
    height, width = image.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(image).tobytes())


def cmd_dump_weights(args) -> int:
    inv = _read_invocation(args.config) if args.config else {}
    ckpt_path, ckpt = _load_checkpoint_arg(args, inv, "dump-weights")
    out_dir = _resolve(args, inv, "out_dir", str, os.path.join("runs", "dump-weights"))
    os.makedirs(out_dir, exist_ok=True)
    image = weight_grid_image(ckpt.w)
    write_pgm(os.path.join(out_dir, "weights.pgm"), image)
    invocation = {"checkpoint": ckpt_path, "out_dir": out_dir}
    _write_manifest(out_dir, "dump-weights", invocation, ckpt.config, ["weights.pgm"])
    print(
        f"wrote {os.path.join(out_dir, 'weights.pgm')}"
        f" ({image.shape[1]}x{image.shape[0]})"
    )
    return 0


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config",
        help="config file or manifest supplying defaults for this command",
    )
    parser.add_argument("--seed", type=int, help="seed for this command's rng streams")
    parser.add_argument(
        "--out-dir", dest="out_dir", help="output directory (default runs/<command>)"
    )
    parser.add_argument(
        "--data-dir", dest="data_dir", help="directory holding the dataset files"
    )
    parser.add_argument(
        "--dataset", choices=("mnist", "fmnist"), help="dataset name"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="astrosnn",
        description="Spiking-network training, fault injection, and self-repair.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("train", help="train a baseline and write a checkpoint")
    _add_common_flags(p)
    p.add_argument("--n-neurons", dest="n_neurons", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--train-limit", dest="train_limit", type=int)
    p.add_argument("--test-limit", dest="test_limit", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("fault", help="stick a random synapse subset at zero")
    _add_common_flags(p)
    p.add_argument("--checkpoint", help="checkpoint to inject faults into")
    p.add_argument("--p-del", dest="p_del", type=float, help="fault probability")
    p.set_defaults(func=cmd_fault)

    p = sub.add_parser("repair", help="retrain a faulted checkpoint")
    _add_common_flags(p)
    p.add_argument("--checkpoint", help="faulted checkpoint to retrain")
    p.add_argument("--rule", choices=("stdp", "astdp"), help="retraining rule")
    p.add_argument(
        "--epochs", type=int, help="retraining epochs (0 means the rule's default)"
    )
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("eval", help="measure a checkpoint's test accuracy")
    _add_common_flags(p)
    p.add_argument("--checkpoint", help="checkpoint to evaluate")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("suite", help="full fault/repair sweep over p_del and seeds")
    _add_common_flags(p)
    p.add_argument("--n-neurons", dest="n_neurons", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--train-limit", dest="train_limit", type=int)
    p.add_argument("--test-limit", dest="test_limit", type=int)
    p.add_argument(
        "--p-del-list",
        dest="p_del_list",
        help="comma-separated fault probabilities, e.g. 0.5,0.7,0.9",
    )
    p.add_argument("--n-seeds", dest="n_seeds", type=int)
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("astro-demo", help="run the tripartite micro-model")
    _add_common_flags(p)
    p.add_argument(
        "--scenario",
        help="built-in scenario name (fig2, fig5) or a scenario file path",
    )
    p.add_argument(
        "--duration-s", dest="duration_s", type=float, help="simulated seconds"
    )
    p.set_defaults(func=cmd_astro_demo)

    p = sub.add_parser("dump-weights", help="export weights as a PGM grid image")
    _add_common_flags(p)
    p.add_argument("--checkpoint", help="checkpoint whose weights to export")
    p.set_defaults(func=cmd_dump_weights)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ContractViolationError, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalFaultError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
