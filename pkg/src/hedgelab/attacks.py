"""Bounded input attacks against a differentiable classifier.

Everything here is deterministic given (model, input, spec, seed) and, for
the radius-bounded variants, guaranteed to return a point inside the L-inf
ball around the natural input and inside the valid domain. Sign steps use
sign(0) = 0.

Variants
--------
fgsm            single sign step of size eps, no random start
pgd             iterated projected sign ascent of the cross-entropy
cw              same loop on the logit-margin loss  -z_y + max_{i!=y} z_i
dlr / dlr_targeted
                same loop on the difference-of-logits ratio, normalized by
                the gap between the largest and third-largest logits
apgd_ce         momentum variant with best-point tracking and step halving
                at checkpoints when progress stalls
deepfool        unbounded minimal-perturbation surrogate: iterative local
                linearization toward the nearest class boundary + overshoot
random_search   query-limited black-box: random coordinate-patch proposals
                kept when the loss increases, early stop on success
label_free      descends the all-class loss sum, no label required
defense_aware   attacks through the defensive perturbation: each outer step
                runs the full inner defense loop and applies the gradient
                taken at the defended point
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import tensor as T
from .defenses import DefenseSpec, class_loss_sum, defend
from .errors import ConfigError, NumericError
from .rng import SplitMix64, derive_seed

VARIANTS = (
    "fgsm", "pgd", "cw", "dlr", "dlr_targeted", "apgd_ce",
    "deepfool", "random_search", "label_free", "defense_aware",
)
_PGD_FAMILY = ("fgsm", "pgd", "cw", "dlr", "dlr_targeted")
_APGD_CHECKPOINT_FRACTIONS = (0.22, 0.44, 0.66, 0.88)


@dataclass(frozen=True)
class AttackSpec:
    """Configuration of one attack variant.

    eps is the L-inf radius, steps the iteration count and step_size the
    per-step magnitude (defaults: eps / 2; eps itself for fgsm; 2 * eps for
    apgd_ce). Fields past `random_start` only apply to specific variants.
    """

    variant: str = "pgd"
    eps: float = 8.0 / 255.0
    steps: int = 20
    step_size: float | None = None
    seed: int = 0
    random_start: bool = True
    target_class: int | None = None           # dlr_targeted
    momentum: float = 0.75                    # apgd_ce
    success_ratio: float = 0.75               # apgd_ce
    checkpoints: tuple[int, ...] | None = None  # apgd_ce; default fractional
    query_budget: int = 200                   # random_search
    patch_fraction: float = 0.25              # random_search
    defense: DefenseSpec | None = None        # defense_aware inner loop

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown attack variant '{self.variant}'")
        if self.eps < 0:
            raise ConfigError("attack eps must be >= 0")
        if self.steps < 0:
            raise ConfigError("attack steps must be >= 0")
        if self.step_size is not None and self.step_size <= 0:
            raise ConfigError("attack step_size must be > 0")
        if self.variant == "dlr_targeted" and self.target_class is None:
            raise ConfigError("dlr_targeted needs a target_class")
        if self.variant == "apgd_ce":
            if self.steps < 2:
                raise ConfigError("apgd_ce needs steps >= 2")
            if self.checkpoints is not None and len(self.checkpoints) == 0:
                raise ConfigError("apgd_ce checkpoint list must not be empty")
        if self.variant == "random_search" and self.query_budget < 1:
            raise ConfigError("random_search needs query_budget >= 1")
        if self.variant == "defense_aware" and self.defense is None:
            raise ConfigError("defense_aware needs an embedded defense spec")

    @property
    def effective_step(self) -> float:
        if self.step_size is not None:
            return self.step_size
        if self.variant == "fgsm":
            return self.eps
        if self.variant == "apgd_ce":
            return 2.0 * self.eps
        return self.eps / 2.0


@dataclass
class AttackResult:
    x_adv: np.ndarray
    success: bool
    iterations: int
    loss_start: float | None = None
    loss_final: float | None = None
    delta_linf: float = 0.0
    delta_l2: float = 0.0
    loss_trace: tuple[float, ...] | None = None


# -- attack objectives ------------------------------------------------------


def cross_entropy_objective(model, y: int):
    return lambda t: T.softmax_cross_entropy(model.logits_t(t), y)


def logit_margin_objective(model, y: int):
    """-z_y + max_{i != y} z_i, attacking the logits directly."""

    def objective(t):
        z = model.logits_t(t)
        values = z.data.copy()
        values[y] = -np.inf
        rival = int(np.argmax(values))
        return T.sub(T.gather(z, rival), T.gather(z, y), name="logit_margin")

    return objective


def dlr_objective(model, y: int, target: int | None = None):
    """Difference-of-logits ratio: -(z_y - rival) / (top - third-largest)."""
    if model.num_classes < 3:
        raise ConfigError("dlr loss needs at least 3 classes")
    if target is not None and not 0 <= target < model.num_classes:
        raise ConfigError(f"dlr target {target} out of range")

    def objective(t):
        z = model.logits_t(t)
        order = np.argsort(-z.data, kind="stable")
        if target is None:
            values = z.data.copy()
            values[y] = -np.inf
            rival = int(np.argmax(values))
        else:
            rival = target
        denom = T.sub(
            T.gather(z, int(order[0])), T.gather(z, int(order[2])), name="dlr_denom"
        )
        if denom.item() == 0.0:
            raise NumericError("dlr loss is undefined: top three logits tie")
        num = T.sub(T.gather(z, rival), T.gather(z, y), name="dlr_num")
        return T.div(num, denom, name="dlr")

    return objective


def _objective_for(model, y: int, spec: AttackSpec):
    if spec.variant in ("fgsm", "pgd", "apgd_ce"):
        return cross_entropy_objective(model, y)
    if spec.variant == "cw":
        return logit_margin_objective(model, y)
    if spec.variant == "dlr":
        return dlr_objective(model, y)
    if spec.variant == "dlr_targeted":
        return dlr_objective(model, y, target=spec.target_class)
    raise ConfigError(f"no gradient objective for variant '{spec.variant}'")


def _clamp(x: np.ndarray, bounds) -> np.ndarray:
    if bounds is None:
        return x
    return np.clip(x, bounds[0], bounds[1])


def _result(model, x, x_adv, y, iterations, loss_start=None, loss_final=None,
            loss_trace=None) -> AttackResult:
    delta = x_adv - x
    return AttackResult(
        x_adv=x_adv,
        success=model.predict(x_adv) != y,
        iterations=iterations,
        loss_start=loss_start,
        loss_final=loss_final,
        delta_linf=float(np.max(np.abs(delta))) if delta.size else 0.0,
        delta_l2=float(np.linalg.norm(delta)),
        loss_trace=loss_trace,
    )


# -- gradient attacks -------------------------------------------------------


def attack_pgd(model, x, y: int, spec: AttackSpec, bounds=None, seed=None) -> AttackResult:
    """Projected sign-gradient ascent (fgsm / pgd / cw / dlr / dlr_targeted)."""
    if spec.variant not in _PGD_FAMILY:
        raise ConfigError(f"attack_pgd cannot run variant '{spec.variant}'")
    x = np.asarray(x, dtype=np.float64)
    steps = 1 if spec.variant == "fgsm" else spec.steps
    random_start = spec.random_start and spec.variant != "fgsm"
    objective = _objective_for(model, y, spec)
    rng = SplitMix64(spec.seed if seed is None else seed)
    lo, hi = x - spec.eps, x + spec.eps
    cur = x
    if random_start:
        cur = _clamp(np.clip(x + spec.eps * rng.symmetric(x.size), lo, hi), bounds)
    loss_start = objective(T.DenseTensor(cur, name="input")).item()
    eta = spec.effective_step
    for _ in range(steps):
        grad = T.input_gradient(objective, cur)
        cur = _clamp(np.clip(cur + eta * np.sign(grad), lo, hi), bounds)
    loss_final = objective(T.DenseTensor(cur, name="input")).item()
    return _result(model, x, cur, y, steps, loss_start, loss_final)


def _default_checkpoints(steps: int) -> tuple[int, ...]:
    pts = sorted({min(steps, max(2, math.ceil(f * steps))) for f in _APGD_CHECKPOINT_FRACTIONS})
    return tuple(pts)


def attack_apgd(model, x, y: int, spec: AttackSpec, bounds=None, seed=None) -> AttackResult:
    """Momentum sign ascent with best-point tracking and adaptive step halving.

    At every checkpoint the step is halved and the iterate reset to the best
    point seen so far if either (a) fewer than a `success_ratio` fraction of
    the steps since the previous checkpoint increased the loss, or (b) both
    the step size and the best loss are unchanged since that checkpoint.
    Returns the best iterate, not the last one.
    """
    if spec.variant != "apgd_ce":
        raise ConfigError(f"attack_apgd cannot run variant '{spec.variant}'")
    x = np.asarray(x, dtype=np.float64)
    objective = cross_entropy_objective(model, y)
    checkpoints = spec.checkpoints or _default_checkpoints(spec.steps)
    checkpoints = tuple(int(c) for c in checkpoints if 2 <= int(c) <= spec.steps)
    lo, hi = x - spec.eps, x + spec.eps

    def project(p):
        return _clamp(np.clip(p, lo, hi), bounds)

    def loss_at(p):
        return objective(T.DenseTensor(p, name="input")).item()

    def grad_at(p):
        return T.input_gradient(objective, p)

    eta = spec.effective_step
    alpha = spec.momentum
    prev = x
    cur = project(prev + eta * np.sign(grad_at(prev)))
    losses = [loss_at(prev), loss_at(cur)]
    if losses[1] >= losses[0]:
        best_x, best_loss = cur, losses[1]
    else:
        best_x, best_loss = prev, losses[0]
    ckpt_state = {0: (eta, best_loss)}
    prev_ckpt = 0
    for k in range(2, spec.steps + 1):
        z = project(cur + eta * np.sign(grad_at(cur)))
        nxt = project(cur + alpha * (z - cur) + (1.0 - alpha) * (cur - prev))
        prev, cur = cur, nxt
        losses.append(loss_at(cur))
        if losses[-1] > best_loss:
            best_x, best_loss = cur, losses[-1]
        if k in checkpoints:
            span = k - prev_ckpt
            ascents = sum(
                1 for i in range(prev_ckpt, k) if losses[i + 1] > losses[i]
            )
            eta_then, best_then = ckpt_state[prev_ckpt]
            stalled = eta_then == eta and best_then == best_loss
            if ascents < spec.success_ratio * span or stalled:
                eta /= 2.0
                cur = best_x
                prev = best_x
            ckpt_state[k] = (eta, best_loss)
            prev_ckpt = k
    return _result(
        model, x, best_x, y, spec.steps,
        loss_start=losses[0], loss_final=best_loss, loss_trace=tuple(losses),
    )


def attack_deepfool(model, x, y: int, max_iter: int = 50, overshoot: float = 0.02,
                    bounds=None, eps: float | None = None) -> AttackResult:
    """Minimal-perturbation surrogate via iterative local linearization.

    Walks toward the nearest linearized class boundary until the prediction
    leaves y, then overshoots by `overshoot` to actually cross it. The walk
    itself is unconstrained and reports the perturbation norms it needed;
    when an eps budget is given, a perturbation exceeding it counts as a
    failed attack and the natural input is returned unchanged.
    """
    x = np.asarray(x, dtype=np.float64)
    if model.predict(x) != y:
        return _result(model, x, x.copy(), y, 0)
    num_classes = model.num_classes
    r_total = np.zeros_like(x)
    cur = x
    iterations = 0
    for _ in range(max_iter):
        if model.predict(cur) != y:
            break
        iterations += 1
        leaf = T.DenseTensor(cur, name="input")
        z = model.logits_t(leaf)
        grad_y = T.gradients(T.gather(z, y), [leaf])[0]
        best_ratio, best_w, best_f = np.inf, None, 0.0
        for k in range(num_classes):
            if k == y:
                continue
            grad_k = T.gradients(T.gather(z, k), [leaf])[0]
            w = grad_k - grad_y
            f = float(z.data[k] - z.data[y])
            norm = float(np.linalg.norm(w))
            if norm == 0.0:
                continue
            ratio = abs(f) / norm
            if ratio < best_ratio:
                best_ratio, best_w, best_f = ratio, w, f
        if best_w is None:
            break
        step = (abs(best_f) / float(best_w @ best_w)) * best_w
        r_total = r_total + step
        cur = x + (1.0 + overshoot) * r_total
    x_adv = _clamp(cur, bounds)
    if eps is not None and np.max(np.abs(x_adv - x)) > eps:
        return _result(model, x, x.copy(), y, iterations)
    return _result(model, x, x_adv, y, iterations)


def attack_blackbox_rs(model, x, y: int, spec: AttackSpec, bounds=None, seed=None) -> AttackResult:
    """Query-limited random search: coordinate-patch proposals, early stop.

    Proposals rewrite a contiguous block of coordinates to natural value
    +/- eps (the block length starts at `patch_fraction` of the dimension
    and halves each budget quartile); a proposal is kept when it increases
    the cross-entropy at y. Stops at the first successful prediction flip.
    Uses forward evaluations only.
    """
    if spec.variant != "random_search":
        raise ConfigError(f"attack_blackbox_rs cannot run variant '{spec.variant}'")
    x = np.asarray(x, dtype=np.float64)
    rng = SplitMix64(spec.seed if seed is None else seed)

    def ce_and_pred(p):
        z = model.logits(p)
        return float(np.log(np.sum(np.exp(z - np.max(z)))) + np.max(z) - z[y]), int(np.argmax(z))

    loss_cur, pred = ce_and_pred(x)
    if pred != y:
        return _result(model, x, x.copy(), y, 0, loss_cur, loss_cur)
    cur = x.copy()
    loss_start = loss_cur
    dim = x.size
    queries = 1
    success = False
    while queries < spec.query_budget:
        quartile = min(3, 4 * queries // spec.query_budget)
        fraction = spec.patch_fraction / (2 ** quartile)
        length = max(1, round(fraction * dim))
        start = rng.randint(dim - length + 1)
        sign = 1.0 if rng.uniform() < 0.5 else -1.0
        candidate = cur.copy()
        candidate[start:start + length] = x[start:start + length] + sign * spec.eps
        if bounds is not None:
            candidate = np.clip(candidate, bounds[0], bounds[1])
        loss_new, pred = ce_and_pred(candidate)
        queries += 1
        if loss_new > loss_cur:
            cur, loss_cur = candidate, loss_new
            if pred != y:
                success = True
                break
    result = _result(model, x, cur, y, queries, loss_start, loss_cur)
    result.success = success or result.success
    return result


def attack_label_free(model, x, spec: AttackSpec, bounds=None, seed=None) -> AttackResult:
    """Label-free attack: descends the all-class loss sum.

    Pulls the prediction toward the uniform distribution. No label is used;
    the success flag reports whether the prediction changed relative to the
    natural input (callers judge against ground truth themselves).
    """
    if spec.variant != "label_free":
        raise ConfigError(f"attack_label_free cannot run variant '{spec.variant}'")
    x = np.asarray(x, dtype=np.float64)
    natural_pred = model.predict(x)
    rng = SplitMix64(spec.seed if seed is None else seed)
    lo, hi = x - spec.eps, x + spec.eps
    cur = x
    if spec.random_start:
        cur = _clamp(np.clip(x + spec.eps * rng.symmetric(x.size), lo, hi), bounds)
    objective = lambda t: class_loss_sum(model, t)
    loss_start = objective(T.DenseTensor(cur, name="input")).item()
    eta = spec.effective_step
    for _ in range(spec.steps):
        grad = T.input_gradient(objective, cur)
        cur = _clamp(np.clip(cur - eta * np.sign(grad), lo, hi), bounds)
    loss_final = objective(T.DenseTensor(cur, name="input")).item()
    result = _result(model, x, cur, natural_pred, spec.steps, loss_start, loss_final)
    return result


def attack_defense_aware(model, x, y: int, spec: AttackSpec, bounds=None, seed=None) -> AttackResult:
    """White-box attack on the defense + model pipeline.

    Each outer step runs the full inner defensive loop from the current
    iterate and applies the cross-entropy gradient taken at the defended
    point back to the iterate (first-order approximation of the pipeline
    gradient). With an inner loop of zero steps and zero radius this is
    exactly pgd.
    """
    if spec.variant != "defense_aware":
        raise ConfigError(f"attack_defense_aware cannot run variant '{spec.variant}'")
    x = np.asarray(x, dtype=np.float64)
    base_seed = spec.seed if seed is None else seed
    rng = SplitMix64(base_seed)
    objective = cross_entropy_objective(model, y)
    lo, hi = x - spec.eps, x + spec.eps
    cur = x
    if spec.random_start:
        cur = _clamp(np.clip(x + spec.eps * rng.symmetric(x.size), lo, hi), bounds)
    loss_start = objective(T.DenseTensor(cur, name="input")).item()
    eta = spec.effective_step
    for t in range(spec.steps):
        inner = defend(
            model, cur, spec.defense, bounds=bounds,
            seed=derive_seed(base_seed, "inner-defense", t),
        )
        grad = T.input_gradient(objective, inner.x_hedged)
        cur = _clamp(np.clip(cur + eta * np.sign(grad), lo, hi), bounds)
    loss_final = objective(T.DenseTensor(cur, name="input")).item()
    return _result(model, x, cur, y, spec.steps, loss_start, loss_final)


def run_attack(model, x, y: int, spec: AttackSpec, bounds=None, seed=None) -> AttackResult:
    """Dispatch an attack spec to its implementation."""
    if spec.variant in _PGD_FAMILY:
        return attack_pgd(model, x, y, spec, bounds, seed)
    if spec.variant == "apgd_ce":
        return attack_apgd(model, x, y, spec, bounds, seed)
    if spec.variant == "deepfool":
        return attack_deepfool(
            model, x, y, max_iter=max(spec.steps, 1), bounds=bounds, eps=spec.eps
        )
    if spec.variant == "random_search":
        return attack_blackbox_rs(model, x, y, spec, bounds, seed)
    if spec.variant == "label_free":
        return attack_label_free(model, x, spec, bounds, seed)
    if spec.variant == "defense_aware":
        return attack_defense_aware(model, x, y, spec, bounds, seed)
    raise ConfigError(f"unknown attack variant '{spec.variant}'")
