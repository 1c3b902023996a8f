"""Test-time defensive perturbation of incoming inputs.

The core defense perturbs every incoming example, within a small radius,
to ascend the summed cross-entropy over all classes before predicting.
Because sum-CE and the KL divergence from the uniform prediction differ
only by a positive factor and an additive constant, ascending either one
yields the same sign-gradient trajectory; both objectives are provided,
plus a variant that ascends a single randomly drawn class per step, a plain
uniform-noise baseline, and a pass-through.

For logits z with C classes:

    sum_ce(z) = C * logsumexp(z) - sum(z)
    kl(z)     = logsumexp(z) - mean(z) - log(C)      # KL(uniform || softmax(z))
    sum_ce(z) - C * kl(z) = C * log(C)               # holds for every z
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError
from .rng import SplitMix64

VARIANTS = ("none", "random_noise", "hedge", "hedge_random_class", "hedge_kl")


@dataclass(frozen=True)
class DefenseSpec:
    """Configuration of one defensive perturbation variant.

    eps is the defensive radius; step_size defaults to eps / 2 and steps to
    20, mirroring the usual attack budget on the other side.
    """

    variant: str = "hedge"
    eps: float = 8.0 / 255.0
    steps: int = 20
    step_size: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown defense variant '{self.variant}'")
        if self.eps < 0:
            raise ConfigError("defense eps must be >= 0")
        if self.steps < 0:
            raise ConfigError("defense steps must be >= 0")
        if self.step_size is not None and self.step_size <= 0:
            raise ConfigError("defense step_size must be > 0")

    @property
    def effective_step(self) -> float:
        return self.step_size if self.step_size is not None else self.eps / 2.0


@dataclass
class DefenseOutcome:
    x_hedged: np.ndarray
    prediction: int
    objective_trace: tuple[float, ...]
    path: tuple[np.ndarray, ...]


def class_loss_sum(model, x: T.DenseTensor) -> T.DenseTensor:
    """Sum over classes of the cross-entropy at that class, in one pass."""
    z = model.logits_t(x)
    c = z.shape[0]
    return T.sub(
        T.mul(T.logsumexp(z), float(c), name="sum_ce"),
        T.tsum(z, name="sum_ce"),
        name="sum_ce",
    )


def kl_from_uniform(model, x: T.DenseTensor) -> T.DenseTensor:
    """KL(uniform || softmax(logits)), directly from logits."""
    z = model.logits_t(x)
    c = z.shape[0]
    return T.sub(
        T.sub(T.logsumexp(z), T.tmean(z), name="kl_uniform"),
        math.log(c),
        name="kl_uniform",
    )


def hedge_objective(model, x: np.ndarray) -> tuple[float, float]:
    """Both defense objectives at x: (sum of class losses, KL from uniform)."""
    leaf = T.DenseTensor(x, name="input")
    return class_loss_sum(model, leaf).item(), kl_from_uniform(model, leaf).item()


def _clamp(x: np.ndarray, bounds: tuple[float, float] | None) -> np.ndarray:
    if bounds is None:
        return x
    return np.clip(x, bounds[0], bounds[1])


def defend(
    model,
    x: np.ndarray,
    spec: DefenseSpec,
    bounds: tuple[float, float] | None = None,
    seed: int | None = None,
) -> DefenseOutcome:
    """Apply the configured defensive perturbation and predict.

    The perturbed point never leaves the L-inf ball of radius spec.eps
    around x, nor the valid input domain when bounds are given.
    """
    x = np.asarray(x, dtype=np.float64)
    rng = SplitMix64(spec.seed if seed is None else seed)
    if spec.variant == "none":
        pred = model.predict(x)
        return DefenseOutcome(x, pred, (), (x,))

    lo, hi = x - spec.eps, x + spec.eps
    cur = _clamp(np.clip(x + spec.eps * rng.symmetric(x.size), lo, hi), bounds)
    if spec.variant == "random_noise":
        return DefenseOutcome(cur, model.predict(cur), (), (x, cur))

    if spec.variant == "hedge":
        objective = lambda t: class_loss_sum(model, t)
    elif spec.variant == "hedge_kl":
        objective = lambda t: kl_from_uniform(model, t)
    else:  # hedge_random_class: one freshly drawn class per step
        objective = None

    eta = spec.effective_step
    path = [x, cur]
    trace = []
    for _ in range(spec.steps):
        if objective is None:
            drawn = rng.randint(model.num_classes)
            step_objective = lambda t: T.softmax_cross_entropy(model.logits_t(t), drawn)
        else:
            step_objective = objective
        grad = T.input_gradient(step_objective, cur)
        cur = _clamp(np.clip(cur + eta * np.sign(grad), lo, hi), bounds)
        path.append(cur)
        trace.append(hedge_objective(model, cur)[0])
    return DefenseOutcome(cur, model.predict(cur), tuple(trace), tuple(path))
