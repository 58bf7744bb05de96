"""Training objectives composed from network outputs and joint mechanics.

The physics objective combines four terms: the forward-dynamics torque
residual, the force consistency between the predicted force and the Hill
force implied by the predicted activation, the activation-power criterion,
and a boundary penalty keeping activations in the practical range. The
supervised baseline is a plain MSE against precomputed oracle labels.

All functions take tape Vars for predictions and plain numpy arrays for the
per-sample constants (torque targets, Hill coefficients, moment arms), in
step-major (T*B, N) layout matching network_forward. Means are taken over
all rows, so the weighting is invariant to batch size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, DimensionError
from .mechanics import ACTIVATION_HIGH, ACTIVATION_LOW, StepConstants


@dataclass(frozen=True)
class LossBreakdown:
    """Scalar components of one evaluation; total = l_m + l_f + omega*(l_p + l_b)."""

    l_m: float
    l_f: float
    l_p: float
    l_b: float
    total: float
    omega: float
    beta: int


def hill_force(a_hat, constants: StepConstants):
    """Hill tendon force implied by predicted activations, newtons.

    Affine in the activation: coef_active * a + coef_passive. Gradients flow
    through a_hat only; the coefficients are kinematic constants.
    """
    tape = a_hat.tape
    return ad.add(ad.mul(a_hat, tape.constant(constants.coef_active)),
                  tape.constant(constants.coef_passive))


def loss_forward_dynamics(a_hat, constants: StepConstants):
    """Mean squared residual between required and produced joint torque."""
    tape = a_hat.tape
    forces = hill_force(a_hat, constants)
    tau = ad.sum_(ad.mul(forces, tape.constant(constants.arms)), axis=1)
    residual = ad.sub(tape.constant(constants.tau_req), tau)
    return ad.mean(ad.square(residual))


def loss_physiological(a_hat, beta: int = 2):
    """Mean over steps of the summed beta-th power of activation."""
    if beta == 2:
        powered = ad.square(a_hat)
    else:
        powered = a_hat
        for _ in range(beta - 1):
            powered = ad.mul(powered, a_hat)
    return ad.mean(ad.sum_(powered, axis=1))


def loss_boundary(a_hat):
    """Quadratic penalty outside the practical activation range."""
    low = ad.square(ad.relu(ad.sub(ACTIVATION_LOW, a_hat)))
    high = ad.square(ad.relu(ad.sub(a_hat, ACTIVATION_HIGH)))
    return ad.mean(ad.sum_(ad.add(low, high), axis=1))


def loss_force_fit(f_hat, f_hill):
    """Mean over steps of summed squared force mismatch, N^2.

    f_hill must be built from the same activations (see hill_force) so the
    gradient reaches the activation head through both branches.
    """
    return ad.mean(ad.sum_(ad.square(ad.sub(f_hat, f_hill)), axis=1))


def loss_total(a_hat, f_hat, constants: StepConstants, omega: float = 100.0,
               beta: int = 2, enabled: str = "mfpb"):
    """Compose the physics objective; returns (total Var, LossBreakdown).

    enabled masks individual terms (ablation switch); disabled terms are
    exact zeros in both the graph and the breakdown.
    """
    if omega < 0:
        raise ConfigError(f"omega must be nonnegative, got {omega}")
    tape = a_hat.tape
    zero = tape.constant(0.0)
    l_m = loss_forward_dynamics(a_hat, constants) if "m" in enabled else zero
    l_f = loss_force_fit(f_hat, hill_force(a_hat, constants)) if "f" in enabled else zero
    l_p = loss_physiological(a_hat, beta) if "p" in enabled else zero
    l_b = loss_boundary(a_hat) if "b" in enabled else zero
    total = ad.add(ad.add(l_m, l_f), ad.mul(omega, ad.add(l_p, l_b)))
    breakdown = LossBreakdown(l_m=float(l_m.value), l_f=float(l_f.value),
                              l_p=float(l_p.value), l_b=float(l_b.value),
                              total=float(total.value), omega=omega, beta=beta)
    return total, breakdown


def loss_supervised_mse(a_hat, f_hat, labels_a: np.ndarray, labels_f: np.ndarray):
    """MSE against oracle labels; returns (mse_a Var, mse_f Var)."""
    if labels_a.shape != a_hat.value.shape or labels_f.shape != f_hat.value.shape:
        raise DimensionError(
            f"label shapes {labels_a.shape}/{labels_f.shape} do not match "
            f"predictions {a_hat.value.shape}")
    tape = a_hat.tape
    mse_a = ad.mean(ad.sum_(ad.square(ad.sub(a_hat, tape.constant(labels_a))), axis=1))
    mse_f = ad.mean(ad.sum_(ad.square(ad.sub(f_hat, tape.constant(labels_f))), axis=1))
    return mse_a, mse_f
