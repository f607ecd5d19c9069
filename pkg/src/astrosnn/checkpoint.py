"""Binary checkpoint format for trained, faulted, and repaired networks.

Layout (all integers little-endian):

    8 bytes   magic "ASTROSNN"
    1 byte    format version (1)
    1 byte    phase code (0 baseline, 1 post_fault, 2 post_norm, 3 repair)
    u64       samples seen when the checkpoint was taken
    u32       config text length, then that many UTF-8 bytes (canonical
              rendering, so identical configs serialize identically)
    u32, u32  n_inputs, n_neurons
    f64 x N   weights, row-major
    bytes     healthy mask, one bit per synapse, big-endian within bytes
    f64 x n   per-neuron threshold offsets
    i8  x n   per-neuron class assignment
    f64 x 10n class response matrix

Every field has a fixed width and order, so loading a file and saving the
result reproduces it byte for byte.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import config as config_mod
from .config import N_INPUT_PIXELS, RunConfig
from .errors import ConfigError, ContractViolationError, DataFormatError
from .experiment import ClassAssignment
from .network import Network, build_network

MAGIC = b"ASTROSNN"
VERSION = 1
PHASES = ("baseline", "post_fault", "post_norm", "repair")


@dataclass
class Checkpoint:
    config: RunConfig
    phase: str
    samples_seen: int
    w: np.ndarray
    healthy: np.ndarray
    theta: np.ndarray
    neuron_class: np.ndarray
    response_matrix: np.ndarray


def _check_shapes(ckpt: Checkpoint) -> None:
    if ckpt.phase not in PHASES:
        raise ContractViolationError(f"unknown checkpoint phase {ckpt.phase!r}")
    n_in, n_out = ckpt.w.shape
    if ckpt.healthy.shape != (n_in, n_out):
        raise ContractViolationError("healthy mask shape does not match weights")
    if ckpt.theta.shape != (n_out,) or ckpt.neuron_class.shape != (n_out,):
        raise ContractViolationError("per-neuron arrays do not match the weight columns")
    if ckpt.response_matrix.shape != (n_out, 10):
        raise ContractViolationError("response matrix must have 10 class columns")


def save_checkpoint(ckpt: Checkpoint, path: str) -> None:
    _check_shapes(ckpt)
    n_in, n_out = ckpt.w.shape
    config_blob = config_mod.to_text(ckpt.config).encode("utf-8")
    parts = [
        MAGIC,
        struct.pack("<BB", VERSION, PHASES.index(ckpt.phase)),
        struct.pack("<Q", ckpt.samples_seen),
        struct.pack("<I", len(config_blob)),
        config_blob,
        struct.pack("<II", n_in, n_out),
        ckpt.w.astype("<f8").tobytes(),
        np.packbits(ckpt.healthy.reshape(-1)).tobytes(),
        ckpt.theta.astype("<f8").tobytes(),
        ckpt.neuron_class.astype("<i1").tobytes(),
        ckpt.response_matrix.astype("<f8").tobytes(),
    ]
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


class _Reader:
    def __init__(self, blob: bytes, path: str):
        self.blob = blob
        self.path = path
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise DataFormatError(
                f"{self.path}: truncated checkpoint, needed {n} bytes for {what} "
                f"at byte {self.pos}, have {len(self.blob) - self.pos}"
            )
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out


def load_checkpoint(path: str) -> Checkpoint:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise DataFormatError(f"cannot read checkpoint {path}: {exc}") from exc
    r = _Reader(blob, path)
    if r.take(8, "magic") != MAGIC:
        raise DataFormatError(f"{path}: bad magic at byte 0, not a checkpoint file")
    version, phase_code = struct.unpack("<BB", r.take(2, "version"))
    if version != VERSION:
        raise DataFormatError(f"{path}: unsupported checkpoint version {version} at byte 8")
    if phase_code >= len(PHASES):
        raise DataFormatError(f"{path}: unknown phase code {phase_code} at byte 9")
    (samples_seen,) = struct.unpack("<Q", r.take(8, "sample counter"))
    (config_len,) = struct.unpack("<I", r.take(4, "config length"))
    config_blob = r.take(config_len, "config text")
    try:
        cfg = config_mod.from_text(config_blob.decode("utf-8"))
    except (ConfigError, UnicodeDecodeError) as exc:
        raise DataFormatError(f"{path}: embedded config is invalid: {exc}") from exc
    n_in, n_out = struct.unpack("<II", r.take(8, "dimensions"))
    if n_in < 1 or n_out < 1:
        raise DataFormatError(f"{path}: invalid dimensions {n_in}x{n_out}")
    n = n_in * n_out
    w = np.frombuffer(r.take(8 * n, "weights"), dtype="<f8").reshape(n_in, n_out).copy()
    mask_bytes = r.take((n + 7) // 8, "fault mask")
    healthy = np.unpackbits(np.frombuffer(mask_bytes, dtype=np.uint8))[:n]
    healthy = healthy.astype(bool).reshape(n_in, n_out)
    theta = np.frombuffer(r.take(8 * n_out, "thresholds"), dtype="<f8").copy()
    neuron_class = np.frombuffer(r.take(n_out, "class assignment"), dtype="<i1").astype(np.int64)
    response = (
        np.frombuffer(r.take(8 * n_out * 10, "response matrix"), dtype="<f8")
        .reshape(n_out, 10)
        .copy()
    )
    if r.pos != len(blob):
        raise DataFormatError(
            f"{path}: {len(blob) - r.pos} trailing bytes after byte {r.pos}"
        )
    return Checkpoint(
        config=cfg,
        phase=PHASES[phase_code],
        samples_seen=samples_seen,
        w=w,
        healthy=healthy,
        theta=theta,
        neuron_class=neuron_class,
        response_matrix=response,
    )


def checkpoint_from_network(
    cfg: RunConfig,
    net: Network,
    assignment: ClassAssignment,
    phase: str,
    samples_seen: int,
) -> Checkpoint:
    return Checkpoint(
        config=cfg,
        phase=phase,
        samples_seen=samples_seen,
        w=net.syn.w.copy(),
        healthy=net.syn.healthy.copy(),
        theta=net.state.theta.copy(),
        neuron_class=assignment.neuron_class.copy(),
        response_matrix=assignment.response_matrix.copy(),
    )


def network_from_checkpoint(ckpt: Checkpoint) -> tuple[Network, ClassAssignment]:
    """Rebuild a runnable network and its class assignment.

    The config supplies all parameters; the stored arrays overwrite the
    fresh initialization.
    """
    cfg = ckpt.config
    n_in, n_out = ckpt.w.shape
    if n_in != N_INPUT_PIXELS:
        raise DataFormatError(
            f"checkpoint has {n_in} input lines, expected {N_INPUT_PIXELS}"
        )
    net = build_network(
        n_in,
        n_out,
        seed=cfg.seed,
        lif=config_mod.make_lif(cfg),
        plast=config_mod.make_plasticity(cfg),
        inhib=config_mod.make_inhibition(cfg),
    )
    net.syn.w[:] = ckpt.w
    net.syn.healthy[:] = ckpt.healthy
    net.state.theta[:] = ckpt.theta
    silent = int((ckpt.response_matrix.max(axis=1) == 0).sum())
    assignment = ClassAssignment(
        neuron_class=ckpt.neuron_class.copy(),
        response_matrix=ckpt.response_matrix.copy(),
        n_silent=silent,
    )
    return net, assignment
