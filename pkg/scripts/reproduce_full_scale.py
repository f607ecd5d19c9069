"""Full-scale MNIST reproduction run (225 neurons, all 60k samples).

Trains a 225-neuron baseline for two epochs, injects stuck-at-zero
faults on 80% of the synapses, and retrains once with each rule. The
final accuracies are checked against the reference ranges below.

This takes several hours on one CPU core, so it is not part of the test
suite. Run it directly:

    python3 scripts/reproduce_full_scale.py [--out-dir runs/full_scale]

Expected outcome (accuracy, fraction correct on the 10k test set):

    baseline      0.8953 +/- 0.0200
    astdp repair  0.7542 +/- 0.0250
    stdp repair   0.6742 +/- 0.0250

Exit code 0 when all three land inside their ranges, 1 otherwise.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from astrosnn import cli

EXPECTED = {
    "baseline": (0.8953, 0.0200),
    "astdp": (0.7542, 0.0250),
    "stdp": (0.6742, 0.0250),
}


def read_final_accuracy(series_path: str) -> float:
    with open(series_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return float(rows[-1]["test_accuracy"])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="runs/full_scale")
    parser.add_argument("--data-dir", default="data/mnist")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--p-del", type=float, default=0.8)
    args = parser.parse_args(argv)

    config_path = os.path.join(args.out_dir, "full_scale.ini")
    os.makedirs(args.out_dir, exist_ok=True)
    with open(config_path, "w", encoding="utf-8") as fh:
        fh.write(
            "[run]\n"
            "n_neurons = 225\n"
            "epochs = 2\n"
            f"seed = {args.seed}\n"
            "eval_cadence = 5000\n"
            "cadence_assign_n = 2000\n"
        )

    train_dir = os.path.join(args.out_dir, "train")
    fault_dir = os.path.join(args.out_dir, "fault")
    astdp_dir = os.path.join(args.out_dir, "repair_astdp")
    stdp_dir = os.path.join(args.out_dir, "repair_stdp")

    steps = [
        [
            "train",
            "--config", config_path,
            "--data-dir", args.data_dir,
            "--out-dir", train_dir,
        ],
        [
            "fault",
            "--checkpoint", os.path.join(train_dir, "baseline.ckpt"),
            "--p-del", str(args.p_del),
            "--data-dir", args.data_dir,
            "--out-dir", fault_dir,
        ],
        [
            "repair",
            "--checkpoint", os.path.join(fault_dir, "faulted.ckpt"),
            "--rule", "astdp",
            "--data-dir", args.data_dir,
            "--out-dir", astdp_dir,
        ],
        [
            "repair",
            "--checkpoint", os.path.join(fault_dir, "faulted.ckpt"),
            "--rule", "stdp",
            "--epochs", "1",
            "--data-dir", args.data_dir,
            "--out-dir", stdp_dir,
        ],
    ]
    for step in steps:
        print(f"$ astrosnn {' '.join(step)}", flush=True)
        rc = cli.main(step)
        if rc != 0:
            print(f"step failed with exit code {rc}", file=sys.stderr)
            return rc

    measured = {
        "baseline": read_final_accuracy(os.path.join(train_dir, "train_series.csv")),
        "astdp": read_final_accuracy(os.path.join(astdp_dir, "repair_series.csv")),
        "stdp": read_final_accuracy(os.path.join(stdp_dir, "repair_series.csv")),
    }
    all_ok = True
    for name, (center, width) in EXPECTED.items():
        value = measured[name]
        ok = center - width <= value <= center + width
        all_ok &= ok
        print(
            f"[{'PASS' if ok else 'FAIL'}] {name}: {value:.4f} "
            f"(expected {center:.4f} +/- {width:.4f})"
        )
    return 0 if all_ok else 1


if __name__ == "__main__":
    sys.exit(main())
