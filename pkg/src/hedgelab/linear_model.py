"""Exact analytic model of attack and defense on a piecewise-linear binary task.

The input is a scalar x with true label sign(x). Each class has a score
that grows with slope `slope_true` on its own side of the origin and falls
with slope `slope_false` on the other side:

    score_plus(x)  =  slope_true * x   if x > 0 else slope_false * x
    score_minus(x) = -slope_false * x  if x > 0 else -slope_true * x

so sign(score_plus - score_minus) = sign(x) everywhere. The learned
("estimated") model subtracts a constant bias_shift * (slope_true +
slope_false) from score_plus, which moves its decision boundary from 0 to
x = bias_shift while leaving both gradients untouched.

A one-step gradient attack of radius `radius` displaces x by exactly
-radius on the positive side and +radius on the negative side. The
defensive displacement follows the opposite of the summed estimated score
gradients: when slope_false > slope_true it points away from the boundary
and undoes the attack; when slope_true > slope_false it points toward the
boundary and hurts; equal slopes make it vanish (sign(0) = 0).

Everything is closed form, so grid sweeps over these functions serve as
ground truth for the behavior of the generic attack/defense pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

REGION_ROBUST = "robust"
REGION_INTRINSIC_NONROBUST = "intrinsic_nonrobust"
REGION_ATTACK_VULNERABLE = "attack_vulnerable"
REGION_NATURAL_ERROR = "natural_error"


@dataclass(frozen=True)
class PiecewiseLinearModel:
    slope_true: float
    slope_false: float
    radius: float
    bias_shift: float

    def __post_init__(self):
        if self.slope_true <= 0 or self.slope_false <= 0:
            raise ConfigError("slopes must be positive")
        if self.radius <= 0:
            raise ConfigError("radius must be positive")
        if self.bias_shift < 0:
            raise ConfigError("bias_shift must be >= 0")

    @property
    def bias_offset(self) -> float:
        return self.bias_shift * (self.slope_true + self.slope_false)


def true_label(x: float) -> int:
    """Ground-truth label of a nonzero scalar input."""
    if x == 0:
        raise ConfigError("label undefined on the decision boundary x = 0")
    return 1 if x > 0 else -1


def scores(model: PiecewiseLinearModel, x: float, estimated: bool = False) -> tuple[float, float]:
    """(score_plus, score_minus) at x; estimated subtracts the learned bias."""
    if x > 0:
        plus, minus = model.slope_true * x, -model.slope_false * x
    else:
        plus, minus = model.slope_false * x, -model.slope_true * x
    if estimated:
        plus -= model.bias_offset
    return plus, minus


def predicted_label(model: PiecewiseLinearModel, x: float, estimated: bool = True) -> int:
    """Classifier decision; +1 iff the plus score strictly wins."""
    plus, minus = scores(model, x, estimated)
    return 1 if plus - minus > 0 else -1


def score_gradients(model: PiecewiseLinearModel, x: float) -> tuple[float, float]:
    """Input gradients (d score_plus / dx, d score_minus / dx); same for both models."""
    if x == 0:
        raise ConfigError("gradient undefined on the boundary x = 0")
    if x > 0:
        return model.slope_true, -model.slope_false
    return model.slope_false, -model.slope_true


def fgm_attack(model: PiecewiseLinearModel, x: float) -> float:
    """One-step gradient attack: displaces x by exactly the radius toward 0."""
    return x - model.radius * true_label(x)


def hedge_direction(model: PiecewiseLinearModel, x: float) -> float:
    """Defensive displacement: -radius * sign(sum of estimated score gradients)."""
    g_plus, g_minus = score_gradients(model, x)
    return -model.radius * float(np.sign(g_plus + g_minus))


def classify_region(model: PiecewiseLinearModel, x: float) -> str:
    """Predict this input's fate under attack, from closed-form analysis.

    - intrinsic_nonrobust: within the radius of the true boundary; no
      classifier can be robust here.
    - natural_error: misclassified by the estimated model before any attack
      (possible only when bias_shift > radius, positive side).
    - attack_vulnerable: classified correctly but flipped by the one-step
      attack against the estimated model (positive side; the bias helps the
      negative side).
    - robust: survives the attack.
    """
    eps, zeta = model.radius, model.bias_shift
    if abs(x) < eps:
        return REGION_INTRINSIC_NONROBUST
    if eps < x <= zeta:
        return REGION_NATURAL_ERROR
    if max(eps, zeta) < x <= eps + zeta:
        return REGION_ATTACK_VULNERABLE
    return REGION_ROBUST


def sample_grid(model: PiecewiseLinearModel, upper: float = 2.0, step: float = 1e-3,
                margin: float = 1e-9) -> np.ndarray:
    """Symmetric grid over +/- [radius + margin, upper], excluding x = 0."""
    start = model.radius + margin
    count = int(np.floor((upper - start) / step)) + 1
    pos = start + step * np.arange(count)
    return np.concatenate([-pos[::-1], pos])


@dataclass
class GridOutcome:
    """Exact per-point bookkeeping of attack and defense on a grid."""

    grid: np.ndarray
    natural_correct: np.ndarray
    attacked_correct: np.ndarray
    hedged_after_attack_correct: np.ndarray
    hedged_natural_correct: np.ndarray
    regions: list[str]

    def accuracy(self, mask: np.ndarray) -> float:
        return float(np.mean(mask))


def evaluate_grid(model: PiecewiseLinearModel, grid: np.ndarray) -> GridOutcome:
    """Run attack and defense exactly on every grid point (estimated model)."""
    natural, attacked, hedged, hedged_nat, regions = [], [], [], [], []
    for x in grid:
        x = float(x)
        label = true_label(x)
        natural.append(predicted_label(model, x) == label)
        x_adv = fgm_attack(model, x)
        attacked.append(predicted_label(model, x_adv) == label)
        x_hed = x_adv + hedge_direction(model, x_adv)
        hedged.append(predicted_label(model, x_hed) == label)
        x_nat_hed = x + hedge_direction(model, x)
        hedged_nat.append(predicted_label(model, x_nat_hed) == label)
        regions.append(classify_region(model, x))
    return GridOutcome(
        grid=grid,
        natural_correct=np.array(natural),
        attacked_correct=np.array(attacked),
        hedged_after_attack_correct=np.array(hedged),
        hedged_natural_correct=np.array(hedged_nat),
        regions=regions,
    )


def as_classifier(model: PiecewiseLinearModel):
    """Equivalent 1-D two-logit ReLU network for the generic pipeline.

    hidden = [relu(x), relu(-x)]; logits = [score_plus, score_minus] built
    from the two ramps, with the learned bias on the plus logit. Gradients
    of the logits match score_gradients away from x = 0.
    """
    from .models import Classifier

    k_t, k_f = model.slope_true, model.slope_false
    weights = [
        np.array([[1.0], [-1.0]]),
        np.array([[k_t, -k_f], [-k_f, k_t]]),
    ]
    biases = [np.zeros(2), np.array([-model.bias_offset, 0.0])]
    return Classifier([1, 2, 2], weights=weights, biases=biases)
