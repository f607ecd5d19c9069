"""Exception hierarchy shared across the package.

Each error class maps to one process exit code so the CLI can translate
failures without inspecting messages (see cli.EXIT_CODES).
"""

from __future__ import annotations


class AstrosnnError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(AstrosnnError):
    """Invalid configuration value, CLI argument, or parameter combination."""


class ContractViolationError(AstrosnnError):
    """An operation was called with arguments violating its contract
    (dimension mismatch, wrong dtype, out-of-range index)."""


class ProtocolError(AstrosnnError):
    """Operations were invoked out of order (for example repair on a
    network that has no injected faults)."""


class DataFormatError(AstrosnnError):
    """A file (IDX, checkpoint, scenario, config) failed to parse.

    Messages include the byte offset or line number of the failure.
    """


class NumericalFaultError(AstrosnnError):
    """Simulation state became non-finite; message names the first
    offending neuron index and the step at which it was detected."""


class SurrogateDegenerateError(AstrosnnError):
    """The scaling reference weight is zero or negative, so the
    weight-dependent potentiation factor is undefined. Callers are
    expected to guard and fall back to unscaled updates."""
