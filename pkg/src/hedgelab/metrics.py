"""Evaluation instruments: accuracies, defense trade-offs, Lipschitz
estimates and structural image similarity.

The local Lipschitzness of a class logit is estimated as the maximum L2
norm of its input gradient over N seeded uniform perturbations within an
L-inf ball; the estimator and its sample count are configurable. SSIM uses
uniform square sliding windows (stride 1) with the standard (0.01, 0.03)
stabilizers so results are reproducible bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import tensor as T
from .errors import ConfigError
from .rng import SplitMix64

NATURAL = "natural"


@dataclass(frozen=True)
class MetricConfig:
    lipschitz_samples: int = 64
    lipschitz_radius: float = 8.0 / 255.0
    lipschitz_seed: int = 0
    ssim_window: int = 8
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.lipschitz_samples < 1:
            raise ConfigError("lipschitz_samples must be >= 1")
        if self.ssim_window < 1:
            raise ConfigError("ssim_window must be >= 1")
        if self.dynamic_range <= 0:
            raise ConfigError("dynamic_range must be > 0")

    @property
    def c1(self) -> float:
        return (0.01 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (0.03 * self.dynamic_range) ** 2


@dataclass
class AttackEval:
    """Outcome of one attack on one example, before and after each defense."""

    prediction: int
    success: bool
    defended: dict[str, int] = field(default_factory=dict)
    margin: float | None = None
    ssim_to_natural: float | None = None
    lipschitz_diff: float | None = None
    delta_linf: float = 0.0
    delta_l2: float = 0.0


@dataclass
class EvalRecord:
    """One example's journey through the attack/defense grid."""

    example_id: int
    label: int
    natural_pred: int
    defended_natural: dict[str, int] = field(default_factory=dict)
    attacks: dict[str, AttackEval] = field(default_factory=dict)

    def prediction(self, attack_id: str | None, defense_id: str | None) -> int:
        if attack_id is None or attack_id == NATURAL:
            if defense_id is None or defense_id not in self.defended_natural:
                return self.natural_pred
            return self.defended_natural[defense_id]
        if attack_id not in self.attacks:
            raise ConfigError(f"record {self.example_id} has no attack '{attack_id}'")
        entry = self.attacks[attack_id]
        if defense_id is None or defense_id not in entry.defended:
            return entry.prediction
        return entry.defended[defense_id]


def robust_accuracy(records: list[EvalRecord], attack_id: str | None,
                    defense_id: str | None = None) -> float:
    """Fraction of records predicted correctly after attack (and defense)."""
    if not records:
        raise ConfigError("no records")
    hits = sum(1 for r in records if r.prediction(attack_id, defense_id) == r.label)
    return hits / len(records)


def worst_case_accuracy(records: list[EvalRecord], attack_ids: list[str],
                        defense_id: str | None = None) -> float:
    """Per-example conjunction: correct only if every listed attack fails."""
    if not records:
        raise ConfigError("no records")
    hits = 0
    for r in records:
        if all(r.prediction(a, defense_id) == r.label for a in attack_ids):
            hits += 1
    return hits / len(records)


@dataclass(frozen=True)
class TradeoffCounts:
    f_to_t: int
    t_to_f: int
    f_to_f: int

    @property
    def net(self) -> int:
        return self.f_to_t - self.t_to_f


def tradeoff_counts(records: list[EvalRecord], attack_id: str | None,
                    defense_id: str) -> TradeoffCounts:
    """Defense-induced prediction transitions relative to the undefended view."""
    f_to_t = t_to_f = f_to_f = 0
    for r in records:
        before = r.prediction(attack_id, None)
        after = r.prediction(attack_id, defense_id)
        if before != r.label and after == r.label:
            f_to_t += 1
        elif before == r.label and after != r.label:
            t_to_f += 1
        elif before != r.label and after != r.label and before != after:
            f_to_f += 1
    return TradeoffCounts(f_to_t, t_to_f, f_to_f)


def logit_margin(model, x: np.ndarray) -> float:
    """Top logit minus runner-up: distance-to-boundary proxy in logit space."""
    z = model.logits(x)
    top = np.argmax(z)
    rest = np.delete(z, top)
    return float(z[top] - np.max(rest))


def _max_gradient_norm(model, x: np.ndarray, class_index: int,
                       cfg: MetricConfig) -> float:
    rng = SplitMix64(cfg.lipschitz_seed)
    best = 0.0
    for _ in range(cfg.lipschitz_samples):
        delta = cfg.lipschitz_radius * rng.symmetric(x.size)
        grad = T.input_gradient(
            lambda t: T.gather(model.logits_t(t), class_index), x + delta
        )
        best = max(best, float(np.linalg.norm(grad)))
    return best


def lipschitz_difference(model, x: np.ndarray, y_true: int, y_pred_false: int,
                         cfg: MetricConfig) -> float:
    """Estimated Lipschitzness of the false-class logit minus the true one.

    Positive values mean the true class is locally flatter, the condition
    under which the defensive perturbation helps.
    """
    if y_true == y_pred_false:
        raise ConfigError("lipschitz_difference needs two distinct classes")
    x = np.asarray(x, dtype=np.float64)
    false_l = _max_gradient_norm(model, x, y_pred_false, cfg)
    true_l = _max_gradient_norm(model, x, y_true, cfg)
    return false_l - true_l


def ssim(a: np.ndarray, b: np.ndarray, cfg: MetricConfig = MetricConfig()) -> float:
    """Mean structural similarity over uniform sliding windows (stride 1)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ConfigError(f"ssim shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ConfigError("ssim expects rank-2 image tensors")
    w = cfg.ssim_window
    if min(a.shape) < w:
        raise ConfigError(f"image side {a.shape} smaller than window {w}")
    wa = sliding_window_view(a, (w, w))
    wb = sliding_window_view(b, (w, w))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    e_aa = (wa * wa).mean(axis=(-2, -1))
    e_bb = (wb * wb).mean(axis=(-2, -1))
    e_ab = (wa * wb).mean(axis=(-2, -1))
    var_a = e_aa - mu_a * mu_a
    var_b = e_bb - mu_b * mu_b
    cov = e_ab - mu_a * mu_b
    c1, c2 = cfg.c1, cfg.c2
    values = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    return float(values.mean())
