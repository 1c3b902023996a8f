import math

import numpy as np
import pytest

from hedgelab.data import make_blobs
from hedgelab.defenses import (
    DefenseSpec,
    class_loss_sum,
    defend,
    hedge_objective,
    kl_from_uniform,
)
from hedgelab.errors import ConfigError
from hedgelab.models import Classifier, TrainSpec, train
from hedgelab.rng import SplitMix64, derive_seed
from hedgelab.tensor import DenseTensor, input_gradient


def identity_model(num_classes):
    """Logits equal the input, so objectives act on raw logit vectors."""
    return Classifier(
        [num_classes, num_classes],
        weights=[np.eye(num_classes)],
        biases=[np.zeros(num_classes)],
    )


class TestHedgeObjective:
    def test_uniform_prediction_two_classes(self):
        model = identity_model(2)
        sum_ce, kl = hedge_objective(model, np.array([0.0, 0.0]))
        assert sum_ce == pytest.approx(2 * math.log(2), abs=1e-12)
        assert kl == pytest.approx(0.0, abs=1e-12)

    def test_direct_formula_evaluation(self):
        # probabilities (0.9, 0.1): sum_ce = -ln .9 - ln .1, kl = .5 ln(.5/.9) + .5 ln(.5/.1)
        model = identity_model(2)
        z = np.array([math.log(9.0), 0.0])
        sum_ce, kl = hedge_objective(model, z)
        assert sum_ce == pytest.approx(-math.log(0.9) - math.log(0.1), abs=1e-9)
        assert kl == pytest.approx(
            0.5 * math.log(0.5 / 0.9) + 0.5 * math.log(0.5 / 0.1), abs=1e-9
        )
        assert sum_ce - 2 * kl == pytest.approx(2 * math.log(2), abs=1e-12)

    def test_identity_constant_for_arbitrary_logits(self):
        rng = SplitMix64(17)
        for c in (2, 3, 10):
            model = identity_model(c)
            for _ in range(50):
                z = 10.0 * rng.normal(c)
                sum_ce, kl = hedge_objective(model, z)
                assert sum_ce - c * kl == pytest.approx(c * math.log(c), abs=1e-9)

    def test_gradient_proportionality(self):
        # autodiff comparison oracle: grad(sum_ce) == C * grad(kl)
        rng = SplitMix64(23)
        model = Classifier([4, 8, 3], seed=6)
        for _ in range(100):
            x = rng.normal(4)
            g_sum = input_gradient(lambda t: class_loss_sum(model, t), x)
            g_kl = input_gradient(lambda t: kl_from_uniform(model, t), x)
            err = np.linalg.norm(g_sum - 3 * g_kl) / max(np.linalg.norm(g_sum), 1e-12)
            assert err <= 1e-8


@pytest.fixture(scope="module")
def toy():
    data = make_blobs(3, 2, 40, 0.3, seed=2)
    model, _ = train(
        Classifier([2, 16, 3], seed=1),
        data,
        TrainSpec(epochs=20, batch_size=16, learning_rate=0.2, seed=1),
    )
    return model, data


class TestDefend:

    def test_zero_radius_is_identity_for_every_variant(self, toy):
        model, data = toy
        for variant in ("none", "random_noise", "hedge", "hedge_random_class", "hedge_kl"):
            spec = DefenseSpec(variant=variant, eps=0.0, steps=5, step_size=1.0, seed=3)
            for x, y in data.examples[:10]:
                out = defend(model, x, spec)
                assert out.x_hedged.tolist() == x.tolist()
                assert out.prediction == model.predict(x)

    def test_ball_containment_and_domain_clamp(self, toy):
        model, data = toy
        spec = DefenseSpec(variant="hedge", eps=0.05, steps=8, seed=1)
        for i, (x, y) in enumerate(data.examples[:20]):
            out = defend(model, x, spec, bounds=(-0.5, 1.5), seed=derive_seed(4, i))
            assert np.max(np.abs(out.x_hedged - x)) <= 0.05 + 1e-12
            assert out.x_hedged.min() >= -0.5 and out.x_hedged.max() <= 1.5

    def test_hedge_and_kl_variant_agree(self, toy):
        # same seeds give the same sign-gradient trajectory for both objectives
        model, data = toy
        a = DefenseSpec(variant="hedge", eps=0.1, steps=10, seed=0)
        b = DefenseSpec(variant="hedge_kl", eps=0.1, steps=10, seed=0)
        for i, (x, _) in enumerate(data.examples):
            seed = derive_seed(9, i)
            out_a = defend(model, x, a, seed=seed)
            out_b = defend(model, x, b, seed=seed)
            assert out_a.prediction == out_b.prediction
            assert np.max(np.abs(out_a.x_hedged - out_b.x_hedged)) <= 1e-12

    def test_deterministic_given_seed(self, toy):
        model, data = toy
        spec = DefenseSpec(variant="hedge_random_class", eps=0.1, steps=6, seed=5)
        x = data.examples[0][0]
        r1 = defend(model, x, spec)
        r2 = defend(model, x, spec)
        assert r1.x_hedged.tobytes() == r2.x_hedged.tobytes()
        assert r1.objective_trace == r2.objective_trace

    def test_objective_trace_length_matches_steps(self, toy):
        model, data = toy
        spec = DefenseSpec(variant="hedge", eps=0.1, steps=7, seed=0)
        out = defend(model, data.examples[0][0], spec)
        assert len(out.objective_trace) == 7
        assert len(out.path) == 9  # input, noised start, 7 iterates

    def test_unknown_variant_rejected(self):
        with pytest.raises(ConfigError):
            DefenseSpec(variant="mystery")

    def test_negative_radius_rejected(self):
        with pytest.raises(ConfigError):
            DefenseSpec(eps=-0.1)


class TestDirectionalOrdering:
    def test_natural_accuracy_preserved_by_hedge(self, pipeline_multiclass):
        # |acc(hedge) - acc(none)| on clean data within 5 points, every seed
        for seed, run in pipeline_multiclass.items():
            change = abs(run["nat_defended"]["hedge"] - run["nat_defended"]["none"])
            assert change <= 0.05

    def test_hedge_beats_uniform_noise_on_attacked_robust_model(self, pipeline_multiclass):
        gains = [
            run["pgd_defended"]["hedge"] - run["pgd_defended"]["random"]
            for run in pipeline_multiclass.values()
        ]
        assert np.mean(gains) > 0

    def test_uniform_noise_beats_no_defense_on_attacked_robust_model(self, pipeline_multiclass):
        # Under iterated-gradient attacks the uniform-noise margin over direct
        # prediction is structurally tiny (fractions of a point at benchmark
        # scale); at desk scale it is not reliably positive. Kept as specified.
        gains = [
            run["pgd_defended"]["random"] - run["pgd_defended"]["none"]
            for run in pipeline_multiclass.values()
        ]
        assert np.mean(gains) > 0
