"""Run configuration: typed defaults, file parsing, and overrides.

One RunConfig carries every tunable of a run. Defaults are the reference
simulation constants; a handful switch with the dataset (learning rates,
inhibition strength, network size, edge filtering). Files use flat
`key = value` pairs under section headers, parsed with configparser, and
explicit overrides (normally CLI flags) win over file values. The
canonical text rendering is stable field by field so checkpoints and
manifests embed it byte-reproducibly.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields

from .data import EncoderConfig
from .errors import ConfigError
from .experiment import ProtocolConfig
from .neurons import InhibitionConfig, LifParams
from .plasticity import PlasticityParams

N_INPUT_PIXELS = 784

DATASET_DEFAULTS = {
    "mnist": dict(n_neurons=225, eta_post=1.0e-2, eta_pre=1.0e-4, w_recurrent=-120.0, sobel=False),
    "fmnist": dict(n_neurons=400, eta_post=4.0e-3, eta_pre=4.0e-5, w_recurrent=-250.0, sobel=True),
}

# Sections ignored when reading a config so a manifest, which carries
# extra bookkeeping sections, can be fed straight back to --config.
PASSTHROUGH_SECTIONS = frozenset({"invocation", "artifacts"})


@dataclass
class RunConfig:
    # run
    dataset: str = "mnist"
    data_dir: str = "data/mnist"
    out_dir: str = "runs/out"
    seed: int = 0
    n_neurons: int = 225
    epochs: int = 2
    repair_epochs: int = 3
    rule: str = "astdp"
    p_del: float = 0.8
    p_del_list: tuple = (0.5, 0.7, 0.9)
    n_seeds: int = 1
    train_limit: int = 0
    test_limit: int = 0
    eval_cadence: int = 1000
    cadence_assign_n: int = 1000
    batch_size: int = 16
    patience: int = 2
    max_retries: int = 4
    retry_bump_hz: float = 32.0
    # lif
    tau_mem_ms: float = 100.0
    v_rest: float = -65.0
    v_reset: float = -60.0
    theta0: float = -52.0
    theta_plus: float = 0.05
    tau_theta_ms: float = 1.0e7
    refrac_ms: float = 5.0
    dt_ms: float = 1.0
    # plasticity
    eta_post: float = 1.0e-2
    eta_pre: float = 1.0e-4
    tau_trace_ms: float = 20.0
    w_max: float = 1.0
    sigma: float = 2.0
    alpha: float = 98.0
    w_norm: float = 78.4
    # inhibition
    w_recurrent: float = -120.0
    inhibition_enabled: bool = True
    # encoder
    max_rate_hz: float = 128.0
    duration_ms: float = 250.0
    sobel: bool = False

    def validate(self) -> None:
        if self.dataset not in DATASET_DEFAULTS:
            raise ConfigError(f"dataset must be one of {sorted(DATASET_DEFAULTS)}, got {self.dataset!r}")
        if self.n_neurons < 1:
            raise ConfigError(f"n_neurons must be at least 1, got {self.n_neurons}")
        if self.epochs < 0 or self.repair_epochs < 1:
            raise ConfigError("epochs must be non-negative and repair_epochs at least 1")
        if self.rule not in ("stdp", "astdp"):
            raise ConfigError(f"rule must be stdp or astdp, got {self.rule!r}")
        if not 0.0 <= self.p_del <= 1.0:
            raise ConfigError(f"p_del must lie in [0, 1], got {self.p_del}")
        for p in self.p_del_list:
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"p_del_list entries must lie in [0, 1], got {p}")
        if self.n_seeds < 1:
            raise ConfigError(f"n_seeds must be at least 1, got {self.n_seeds}")
        if self.train_limit < 0 or self.test_limit < 0:
            raise ConfigError("sample limits must be non-negative (0 means the full set)")
        if min(self.tau_mem_ms, self.tau_trace_ms, self.tau_theta_ms, self.dt_ms) <= 0:
            raise ConfigError("time constants and dt must be positive")
        make_protocol(self).validate()


SECTION_FIELDS = {
    "run": [
        "dataset", "data_dir", "out_dir", "seed", "n_neurons", "epochs", "repair_epochs",
        "rule", "p_del", "p_del_list", "n_seeds", "train_limit", "test_limit",
        "eval_cadence", "cadence_assign_n", "batch_size", "patience", "max_retries",
        "retry_bump_hz",
    ],
    "lif": [
        "tau_mem_ms", "v_rest", "v_reset", "theta0", "theta_plus", "tau_theta_ms",
        "refrac_ms", "dt_ms",
    ],
    "plasticity": ["eta_post", "eta_pre", "tau_trace_ms", "w_max", "sigma", "alpha", "w_norm"],
    "inhibition": ["w_recurrent", "inhibition_enabled"],
    "encoder": ["max_rate_hz", "duration_ms", "sobel"],
}

_FIELD_SECTION = {name: section for section, names in SECTION_FIELDS.items() for name in names}
_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def default_config(dataset: str = "mnist") -> RunConfig:
    """Defaults with the dataset-dependent values switched in."""
    if dataset not in DATASET_DEFAULTS:
        raise ConfigError(f"dataset must be one of {sorted(DATASET_DEFAULTS)}, got {dataset!r}")
    return RunConfig(dataset=dataset, **DATASET_DEFAULTS[dataset])


def _parse_value(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    raw = raw.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "tuple":
            if not raw:
                return ()
            return tuple(float(part) for part in raw.split(","))
        return raw
    except ValueError as exc:
        raise ConfigError(f"cannot parse {name} = {raw!r} as {kind}") from exc


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_text(cfg: RunConfig) -> str:
    """Canonical rendering: fixed section and key order, one key per line."""
    lines = []
    for section, names in SECTION_FIELDS.items():
        lines.append(f"[{section}]")
        for name in names:
            lines.append(f"{name} = {_format_value(getattr(cfg, name))}")
        lines.append("")
    return "\n".join(lines)


def _collect_items(parser: configparser.ConfigParser) -> dict:
    items = {}
    for section in parser.sections():
        if section in PASSTHROUGH_SECTIONS:
            continue
        if section not in SECTION_FIELDS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _FIELD_SECTION:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            if _FIELD_SECTION[key] != section:
                raise ConfigError(
                    f"key {key!r} belongs in section [{_FIELD_SECTION[key]}], found in [{section}]"
                )
            items[key] = raw
    return items


def from_text(text: str, overrides: dict | None = None) -> RunConfig:
    """Build a config from file text plus explicit overrides.

    The dataset is resolved first (override beats file beats default) so
    dataset-dependent defaults apply before any explicit value lands on
    top of them.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    items = _collect_items(parser)
    overrides = dict(overrides or {})
    for key in overrides:
        if key not in _FIELD_SECTION:
            raise ConfigError(f"unknown config field {key!r}")

    dataset = overrides.get("dataset", items.get("dataset", "mnist"))
    if isinstance(dataset, str):
        dataset = dataset.strip()
    cfg = default_config(dataset)
    for key, raw in items.items():
        setattr(cfg, key, _parse_value(key, raw))
    for key, value in overrides.items():
        if isinstance(value, str):
            value = _parse_value(key, value)
        setattr(cfg, key, value)
    cfg.validate()
    return cfg


def from_file(path: str, overrides: dict | None = None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return from_text(text, overrides)


def make_lif(cfg: RunConfig) -> LifParams:
    return LifParams(
        tau_mem_ms=cfg.tau_mem_ms,
        v_rest=cfg.v_rest,
        v_reset=cfg.v_reset,
        theta0=cfg.theta0,
        theta_plus=cfg.theta_plus,
        tau_theta_ms=cfg.tau_theta_ms,
        refrac_ms=cfg.refrac_ms,
        dt_ms=cfg.dt_ms,
    )


def make_plasticity(cfg: RunConfig) -> PlasticityParams:
    return PlasticityParams(
        eta_post=cfg.eta_post,
        eta_pre=cfg.eta_pre,
        tau_trace_ms=cfg.tau_trace_ms,
        w_max=cfg.w_max,
        sigma=cfg.sigma,
        alpha=cfg.alpha,
        w_norm=cfg.w_norm,
        dt_ms=cfg.dt_ms,
    )


def make_inhibition(cfg: RunConfig) -> InhibitionConfig:
    return InhibitionConfig(w_recurrent=cfg.w_recurrent, enabled=cfg.inhibition_enabled)


def make_encoder(cfg: RunConfig) -> EncoderConfig:
    return EncoderConfig(
        max_rate_hz=cfg.max_rate_hz, duration_ms=cfg.duration_ms, dt_ms=cfg.dt_ms
    )


def make_protocol(cfg: RunConfig) -> ProtocolConfig:
    return ProtocolConfig(
        epochs=cfg.epochs,
        repair_epochs=cfg.repair_epochs,
        eval_cadence=cfg.eval_cadence,
        cadence_assign_n=cfg.cadence_assign_n,
        batch_size=cfg.batch_size,
        patience=cfg.patience,
        max_retries=cfg.max_retries,
        retry_bump_hz=cfg.retry_bump_hz,
        encoder=make_encoder(cfg),
    )
