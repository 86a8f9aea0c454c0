"""Exception types shared across the package."""

from __future__ import annotations


class MadaptError(Exception):
    """Base class for all package errors."""


class ContractViolationError(MadaptError):
    """An argument violates a documented precondition (e.g. dimension mismatch)."""


class GPFitError(MadaptError):
    """Hyperparameter fitting failed; carries the offending hyperparameters."""

    def __init__(self, message, hyper=None):
        super().__init__(message)
        self.hyper = hyper


class OracleError(MadaptError):
    """A plant/model evaluation failed (e.g. steady-state solve diverged)."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SimulationError(MadaptError):
    """Simulated trajectory left the physical domain."""


class ConfigError(MadaptError):
    """Invalid experiment configuration (CLI exit code 2)."""


class RunAbortedError(MadaptError):
    """An RTO run aborted mid-flight; carries the partial run record."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record
