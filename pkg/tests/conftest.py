"""Shared expensive fixtures: trained pipelines reused across test modules.

Pipeline T (two-class): the 2-class 2-D blob evaluation demanded by the
ordering criteria: adversarially trained 64-64 MLP, eps_a = eps_d = 0.1,
PGD-20 attack, defenses none / uniform noise / hedge, seeds 1-3.

Pipeline M (multi-class): 4 classes in 8 dimensions, where per-class loss
coupling gives the defensive perturbation room to work; used by the
attack-fragility and defense-aware criteria and the directional defense
ordering tests.
"""

import time

import numpy as np
import pytest

from hedgelab.attacks import (
    AttackSpec,
    attack_blackbox_rs,
    attack_deepfool,
    attack_defense_aware,
    attack_pgd,
)
from hedgelab.data import make_blobs
from hedgelab.defenses import DefenseSpec, defend
from hedgelab.models import Classifier, TrainSpec, train
from hedgelab.rng import derive_seed

SEEDS = (1, 2, 3)

PGD_EVAL = AttackSpec(variant="pgd", eps=0.1, steps=20, step_size=0.05)
DEFENSES = {
    "none": DefenseSpec(variant="none"),
    "random": DefenseSpec(variant="random_noise", eps=0.1),
    "hedge": DefenseSpec(variant="hedge", eps=0.1, steps=20),
}


def _train_robust(seed, classes, dim, spread, per_class, epochs):
    data = make_blobs(classes, dim, per_class, spread, derive_seed(seed, "train-data"))
    inner = AttackSpec(variant="pgd", eps=0.1, steps=10, step_size=0.025)
    spec = TrainSpec(
        epochs=epochs, batch_size=32, learning_rate=0.1, mode="adversarial",
        attack=inner, seed=derive_seed(seed, "train"),
    )
    model, _ = train(
        Classifier([dim, 64, 64, classes], seed=derive_seed(seed, "model-init")),
        data,
        spec,
    )
    return model


def _defended_accuracy(model, points, labels, spec, seed, tag):
    hits = 0
    for i, (x, y) in enumerate(zip(points, labels)):
        hits += defend(model, x, spec, seed=derive_seed(seed, "def", tag, i)).prediction == y
    return hits / len(labels)


@pytest.fixture(scope="session")
def pipeline_two_class():
    """Per-seed accuracies of the pinned 2-class 2-D ordering pipeline."""
    out = {"seeds": {}, "runtime": 0.0}
    start = time.time()
    for seed in SEEDS:
        model = _train_robust(seed, classes=2, dim=2, spread=0.5, per_class=200, epochs=30)
        eval_set = make_blobs(2, 2, 200, 0.5, derive_seed(seed, "eval-data"))
        labels = [y for _, y in eval_set.examples]
        adv = [
            attack_pgd(model, x, y, PGD_EVAL, seed=derive_seed(seed, "attack", i)).x_adv
            for i, (x, y) in enumerate(eval_set.examples)
        ]
        naturals = [x for x, _ in eval_set.examples]
        acc = {}
        nat = {}
        for name, spec in DEFENSES.items():
            acc[name] = _defended_accuracy(model, adv, labels, spec, seed, f"adv-{name}")
            nat[name] = _defended_accuracy(model, naturals, labels, spec, seed, f"nat-{name}")
        f_to_t = t_to_f = 0
        for i, (xa, y) in enumerate(zip(adv, labels)):
            before = model.predict(xa) == y
            after = defend(
                model, xa, DEFENSES["hedge"], seed=derive_seed(seed, "def", "adv-hedge", i)
            ).prediction == y
            if before and not after:
                t_to_f += 1
            if not before and after:
                f_to_t += 1
        out["seeds"][seed] = {
            "robust": acc, "natural": nat, "f_to_t": f_to_t, "t_to_f": t_to_f,
        }
    out["runtime"] = time.time() - start
    return out


@pytest.fixture(scope="session")
def pipeline_multiclass():
    """Per-seed attack grid on the 4-class 8-D pipeline (pgd/rs/df/da)."""
    defense_aware = AttackSpec(
        variant="defense_aware", eps=0.1, steps=20, step_size=0.05,
        defense=DefenseSpec(variant="hedge", eps=0.1, steps=20),
    )
    rs = AttackSpec(variant="random_search", eps=0.1, query_budget=300)
    out = {}
    for seed in SEEDS:
        model = _train_robust(seed, classes=4, dim=8, spread=0.45, per_class=120, epochs=30)
        eval_set = make_blobs(4, 8, 50, 0.45, derive_seed(seed, "eval-data"))
        labels = [y for _, y in eval_set.examples]
        adv = {
            "pgd": [
                attack_pgd(model, x, y, PGD_EVAL, seed=derive_seed(seed, "a", "pgd", i)).x_adv
                for i, (x, y) in enumerate(eval_set.examples)
            ],
            "rs": [
                attack_blackbox_rs(model, x, y, rs, seed=derive_seed(seed, "a", "rs", i)).x_adv
                for i, (x, y) in enumerate(eval_set.examples)
            ],
            "df": [
                attack_deepfool(model, x, y, max_iter=50, eps=0.1).x_adv
                for x, y in eval_set.examples
            ],
            "da": [
                attack_defense_aware(
                    model, x, y, defense_aware, seed=derive_seed(seed, "a", "da", i)
                ).x_adv
                for i, (x, y) in enumerate(eval_set.examples)
            ],
        }
        direct = {
            name: np.mean([model.predict(xa) == y for xa, y in zip(points, labels)])
            for name, points in adv.items()
        }
        hedged = {
            name: _defended_accuracy(model, points, labels, DEFENSES["hedge"], seed, f"h-{name}")
            for name, points in adv.items()
        }
        pgd_defended = {
            name: _defended_accuracy(model, adv["pgd"], labels, spec, seed, f"adv-{name}")
            for name, spec in DEFENSES.items()
        }
        naturals = [x for x, _ in eval_set.examples]
        nat_defended = {
            name: _defended_accuracy(model, naturals, labels, spec, seed, f"nat-{name}")
            for name, spec in DEFENSES.items()
        }
        out[seed] = {
            "model": model,
            "eval": eval_set,
            "direct": direct,
            "hedged": hedged,
            "pgd_defended": pgd_defended,
            "nat_defended": nat_defended,
        }
    return out
