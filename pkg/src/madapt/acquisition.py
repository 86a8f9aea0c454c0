"""LCB and EI acquisition values for a cost predictor, plus incumbent rules.

All functions are minimization-oriented: EI is the negated expected
improvement (nonpositive), LCB subtracts the exploration term.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .errors import ContractViolationError

MEAN_ONLY = "mean_only"
LCB = "lcb"
EI = "ei"

MIN_OBSERVATION = "min_observation"
MIN_POSTERIOR_MEAN = "min_posterior_mean_at_observed"

# Below this predictive std the EI integrand collapses to the deterministic
# improvement, avoiding 0/0 in the standardized gap.
SIGMA_FLOOR = 1e-12

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class AcquisitionSpec:
    """Which acquisition drives the subproblem objective.

    ``beta`` only matters for LCB; ``incumbent_rule`` only for EI, where
    ``None`` means: use the posterior-mean rule whenever the cost surrogate
    carries estimated noise, otherwise the raw best observation.
    """

    kind: str = MEAN_ONLY
    beta: float = 2.0
    incumbent_rule: Optional[str] = None

    def __post_init__(self):
        if self.kind not in (MEAN_ONLY, LCB, EI):
            raise ContractViolationError(f"unknown acquisition kind {self.kind!r}")
        if self.beta < 0:
            raise ContractViolationError("beta must be nonnegative")
        if self.incumbent_rule not in (None, MIN_OBSERVATION, MIN_POSTERIOR_MEAN):
            raise ContractViolationError(
                f"unknown incumbent rule {self.incumbent_rule!r}"
            )


def _phi(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def lcb(mean: float, std: float, beta: float) -> float:
    """Lower confidence bound, mean - beta*std."""
    return mean - beta * std


def ei(mean: float, std: float, incumbent: float) -> float:
    """Negated expected improvement below the incumbent (nonpositive)."""
    if std <= SIGMA_FLOOR:
        return -max(incumbent - mean, 0.0)
    z = (incumbent - mean) / std
    return float(-(incumbent - mean) * ndtr(z) - std * _phi(z))


def ei_grad_terms(mean: float, std: float, incumbent: float):
    """(d ei/d mean, d ei/d std); the sigma->0 limit keeps only the mean term."""
    if std <= SIGMA_FLOOR:
        return (1.0 if mean < incumbent else 0.0), 0.0
    z = (incumbent - mean) / std
    return float(ndtr(z)), float(-_phi(z))


def incumbent(observed_costs, gp=None, rule: str = MIN_OBSERVATION,
              means_at_observed=None) -> float:
    """Best-cost reference for EI.

    ``min_observation`` takes the smallest raw observation.  The posterior
    rule takes the smallest predictor mean at the observed inputs: by default
    the GP's own posterior means at its training inputs, or the caller's
    ``means_at_observed`` when the predictor is a corrected model rather than
    the bare GP.
    """
    costs = np.asarray(observed_costs, dtype=float).ravel()
    if costs.size == 0:
        raise ContractViolationError("incumbent requires at least one observation")
    if rule == MIN_OBSERVATION:
        return float(np.min(costs))
    if rule != MIN_POSTERIOR_MEAN:
        raise ContractViolationError(f"unknown incumbent rule {rule!r}")
    if means_at_observed is not None:
        means = np.asarray(means_at_observed, dtype=float).ravel()
    else:
        if gp is None:
            raise ContractViolationError(
                "posterior-mean rule requires a GP or precomputed means"
            )
        from . import gp as _gp

        means, _ = _gp.posterior(gp, gp.train_inputs)
    return float(np.min(means))
