"""Shared plant/model abstractions: scaling, noisy oracles, nominal models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import ContractViolationError


@dataclass(frozen=True)
class BoxScaling:
    """Affine bijection between an input box and the unit box [0, 1]^n."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ContractViolationError("scaling box requires lower < upper")

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def scale(self, u: np.ndarray) -> np.ndarray:
        return (np.asarray(u, dtype=float) - self.lower) / self.span

    def unscale(self, s: np.ndarray) -> np.ndarray:
        return self.lower + np.asarray(s, dtype=float) * self.span


class PlantOracle:
    """Noisy black-box evaluator of the true cost and constraints.

    ``measure`` draws fresh noise from the owned stream (one independent draw
    per function) and counts against the evaluation budget; ``true_eval`` is
    the noiseless virtual-reality view and is not budgeted.
    """

    def __init__(self, name: str, true_fn: Callable[[np.ndarray], np.ndarray],
                 noise_std: np.ndarray, n_u: int, seed=0):
        self.name = name
        self._true_fn = true_fn
        self.noise_std = np.asarray(noise_std, dtype=float).ravel()
        if np.any(self.noise_std < 0):
            raise ContractViolationError("noise stds must be nonnegative")
        self.n_u = n_u
        self.n_g = self.noise_std.size - 1
        self._rng = np.random.default_rng(seed)
        self.n_measurements = 0

    def reset(self, seed=0):
        self._rng = np.random.default_rng(seed)
        self.n_measurements = 0

    def true_eval(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(self._true_fn(np.asarray(u, dtype=float)), dtype=float)

    def measure(self, u: np.ndarray) -> np.ndarray:
        values = self.true_eval(u)
        noise = self._rng.standard_normal(values.size) * self.noise_std
        self.n_measurements += 1
        return values + noise


class NominalModel:
    """Cheap differentiable model of all G_i, or the zero model for
    model-free runs."""

    def __init__(self, name: str, eval_fn: Optional[Callable],
                 grad_fn: Optional[Callable], n_u: int, n_g: int):
        self.name = name
        self._eval_fn = eval_fn
        self._grad_fn = grad_fn
        self.n_u = n_u
        self.n_g = n_g
        self.zero_model = eval_fn is None

    def eval(self, u: np.ndarray) -> np.ndarray:
        if self.zero_model:
            return np.zeros(self.n_g + 1)
        return np.asarray(self._eval_fn(np.asarray(u, dtype=float)), dtype=float)

    def gradients(self, u: np.ndarray) -> np.ndarray:
        """Rows: one gradient per function G_0..G_ng."""
        if self.zero_model:
            return np.zeros((self.n_g + 1, self.n_u))
        return np.asarray(self._grad_fn(np.asarray(u, dtype=float)), dtype=float)


def zero_model(n_u: int, n_g: int) -> NominalModel:
    return NominalModel("zero", None, None, n_u, n_g)
