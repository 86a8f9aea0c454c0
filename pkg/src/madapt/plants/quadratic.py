"""Two-dimensional quadratic benchmark with structural mismatch.

Plant outputs
    y1(u) = u1^2 + u2^2 + theta1*u1*u2   (cost)
    y2(u) = 1 - u1 + u2^2 + theta2*u2    (constraint, feasible iff <= 0)
with plant parameters theta = (1, 2); the nominal model sets both to zero.
Measurement noise variance is 1e-3 on both outputs.
"""

from __future__ import annotations

import numpy as np

from .base import BoxScaling, NominalModel, PlantOracle

BOUNDS_LOWER = np.array([-2.0, -2.0])
BOUNDS_UPPER = np.array([2.0, 2.0])
NOISE_STD = np.array([np.sqrt(1e-3), np.sqrt(1e-3)])

THETA_PLANT = (1.0, 2.0)
THETA_NOMINAL = (0.0, 0.0)

# Reference optimum (constraint active): u* ~ (0.368, -0.393), cost ~ 0.145.
OPTIMUM_U = np.array([0.368, -0.393])
OPTIMUM_COST = 0.145

# Default study start: deep inside the feasible region, so the constraint
# surface is only learned as the iterates approach the optimum.
DEFAULT_INITIAL_CENTER = np.array([2.0, -1.0])


def _outputs(u, theta):
    u1, u2 = float(u[0]), float(u[1])
    y1 = u1 * u1 + u2 * u2 + theta[0] * u1 * u2
    y2 = 1.0 - u1 + u2 * u2 + theta[1] * u2
    return np.array([y1, y2])


def _gradients(u, theta):
    u1, u2 = float(u[0]), float(u[1])
    return np.array([
        [2.0 * u1 + theta[0] * u2, 2.0 * u2 + theta[0] * u1],
        [-1.0, 2.0 * u2 + theta[1]],
    ])


def quadratic_plant(u) -> np.ndarray:
    """Noiseless plant outputs (y1, y2)."""
    return _outputs(u, THETA_PLANT)


def quadratic_nominal(u) -> np.ndarray:
    """Nominal-model outputs (y1, y2)."""
    return _outputs(u, THETA_NOMINAL)


def quadratic_nominal_gradients(u) -> np.ndarray:
    return _gradients(u, THETA_NOMINAL)


def quadratic_plant_gradients(u) -> np.ndarray:
    return _gradients(u, THETA_PLANT)


def make_oracle(seed=0, noisy: bool = True) -> PlantOracle:
    std = NOISE_STD if noisy else np.zeros(2)
    return PlantOracle("quadratic", quadratic_plant, std, n_u=2, seed=seed)


def make_nominal(perfect: bool = False) -> NominalModel:
    """Nominal model; ``perfect=True`` returns the plant itself (sanity runs)."""
    if perfect:
        return NominalModel(
            "quadratic-perfect", quadratic_plant, quadratic_plant_gradients,
            n_u=2, n_g=1,
        )
    return NominalModel(
        "quadratic", quadratic_nominal, quadratic_nominal_gradients,
        n_u=2, n_g=1,
    )


def make_scaling() -> BoxScaling:
    return BoxScaling(BOUNDS_LOWER, BOUNDS_UPPER)
