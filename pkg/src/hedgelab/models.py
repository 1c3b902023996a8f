"""Feed-forward ReLU classifiers and their (optionally adversarial) training.

The classifier is a stack of affine layers with ReLU on every hidden layer
and raw logits at the output; predictions take the argmax with ties broken
toward the lowest class index. Training is plain SGD with a fixed learning
rate and a seeded shuffle per epoch, so a (seed, data, spec) triple always
produces the same model. In adversarial mode every batch example is
replaced by its bounded sign-gradient attack before the parameter update.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import tensor as T
from .data import LabeledSet
from .errors import ConfigError, NumericError, ShapeError, TrainingError
from .rng import SplitMix64, derive_seed

if TYPE_CHECKING:
    from .attacks import AttackSpec

CHECKPOINT_SCHEMA_VERSION = 1


class Classifier:
    """MLP over flat inputs: affine + ReLU hidden layers, linear logits."""

    def __init__(self, layer_sizes: Sequence[int], seed: int = 0,
                 weights: list[np.ndarray] | None = None,
                 biases: list[np.ndarray] | None = None):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ConfigError(f"bad layer sizes {sizes}")
        self.layer_sizes = sizes
        if weights is None:
            weights, biases = [], []
            for i in range(len(sizes) - 1):
                rng = SplitMix64(derive_seed(seed, "init", i))
                fan_in = sizes[i]
                # He-style scale keeps ReLU activations well conditioned
                w = rng.normal(sizes[i + 1] * fan_in).reshape(sizes[i + 1], fan_in)
                weights.append(w * np.sqrt(2.0 / fan_in))
                biases.append(np.zeros(sizes[i + 1]))
        self._set_parameters(weights, biases)

    def _set_parameters(self, weights, biases):
        if len(weights) != len(self.layer_sizes) - 1 or len(biases) != len(weights):
            raise ConfigError("parameter count does not match layer sizes")
        self._w = [T.DenseTensor(w, name=f"layer{i}.weight") for i, w in enumerate(weights)]
        self._b = [T.DenseTensor(b, name=f"layer{i}.bias") for i, b in enumerate(biases)]
        for i, (w, b) in enumerate(zip(self._w, self._b)):
            expect = (self.layer_sizes[i + 1], self.layer_sizes[i])
            if w.shape != expect or b.shape != (self.layer_sizes[i + 1],):
                raise ConfigError(f"layer {i} parameter shape mismatch")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def num_classes(self) -> int:
        return self.layer_sizes[-1]

    def parameters(self) -> list[T.DenseTensor]:
        out = []
        for w, b in zip(self._w, self._b):
            out.extend((w, b))
        return out

    def copy(self) -> "Classifier":
        return Classifier(
            self.layer_sizes,
            weights=[w.data.copy() for w in self._w],
            biases=[b.data.copy() for b in self._b],
        )

    # -- forward -----------------------------------------------------------

    def logits_t(self, x: T.DenseTensor) -> T.DenseTensor:
        """Differentiable forward pass; gradients flow to x and parameters."""
        if x.shape != (self.input_dim,):
            raise ShapeError(f"input shape {x.shape} != ({self.input_dim},)")
        h = x
        last = len(self._w) - 1
        for i, (w, b) in enumerate(zip(self._w, self._b)):
            h = T.add(T.matmul(w, h, name=f"layer{i}.matmul"), b, name=f"layer{i}.bias_add")
            if i < last:
                h = T.relu(h, name=f"layer{i}.relu")
        return h

    def logits(self, x: np.ndarray) -> np.ndarray:
        """Plain forward pass without gradient recording."""
        h = np.asarray(x, dtype=np.float64)
        if h.shape != (self.input_dim,):
            raise ShapeError(f"input shape {h.shape} != ({self.input_dim},)")
        last = len(self._w) - 1
        for i, (w, b) in enumerate(zip(self._w, self._b)):
            h = w.data @ h + b.data
            if i < last:
                h = np.maximum(h, 0.0)
        if not np.all(np.isfinite(h)):
            raise NumericError("non-finite logits in forward pass")
        return h

    def predict(self, x: np.ndarray) -> int:
        """Argmax prediction, ties broken toward the lowest class index."""
        return int(np.argmax(self.logits(x)))

    def probabilities(self, x: np.ndarray) -> np.ndarray:
        return T.softmax(self.logits(x))

    # -- persistence ---------------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "schema_version": CHECKPOINT_SCHEMA_VERSION,
            "layer_sizes": self.layer_sizes,
            "activations": ["relu"] * (len(self.layer_sizes) - 2) + ["none"],
            "num_classes": self.num_classes,
            "weights": [w.data.reshape(-1).tolist() for w in self._w],
            "biases": [b.data.tolist() for b in self._b],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "Classifier":
        doc = json.loads(text)
        if doc.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
            raise ConfigError(f"unsupported checkpoint schema: {doc.get('schema_version')}")
        sizes = [int(s) for s in doc["layer_sizes"]]
        weights = [
            np.array(w, dtype=np.float64).reshape(sizes[i + 1], sizes[i])
            for i, w in enumerate(doc["weights"])
        ]
        biases = [np.array(b, dtype=np.float64) for b in doc["biases"]]
        return cls(sizes, weights=weights, biases=biases)


@dataclass(frozen=True)
class TrainSpec:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.1
    weight_decay: float = 0.0
    mode: str = "standard"  # "standard" | "adversarial"
    attack: "AttackSpec | None" = None
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ConfigError("epochs must be >= 0, batch_size >= 1, learning_rate > 0")
        if self.mode not in ("standard", "adversarial"):
            raise ConfigError(f"unknown training mode '{self.mode}'")
        if self.mode == "adversarial" and self.attack is None:
            raise ConfigError("adversarial mode needs an inner attack spec")


def train(model: Classifier, data: LabeledSet, spec: TrainSpec) -> tuple[Classifier, list[float]]:
    """SGD training; returns a new trained model and the per-epoch loss trace.

    The input model is left untouched. Adversarial mode replaces each batch
    example with its attack before the gradient step, using per-example
    seeds derived from (spec.seed, epoch, example index).
    """
    if data.num_classes != model.num_classes:
        raise ConfigError(
            f"dataset has {data.num_classes} classes, model {model.num_classes}"
        )
    from .attacks import attack_pgd  # deferred: attacks depend on nothing here

    model = model.copy()
    xs = [x for x, _ in data.examples]
    ys = [y for _, y in data.examples]
    order = list(range(len(xs)))
    trace: list[float] = []
    for epoch in range(spec.epochs):
        SplitMix64(derive_seed(spec.seed, "shuffle", epoch)).shuffle(order)
        epoch_loss = 0.0
        try:
            for start in range(0, len(order), spec.batch_size):
                batch = order[start:start + spec.batch_size]
                params = model.parameters()
                losses = []
                for idx in batch:
                    x = xs[idx]
                    if spec.mode == "adversarial":
                        result = attack_pgd(
                            model, x, ys[idx], spec.attack,
                            bounds=data.bounds,
                            seed=derive_seed(spec.seed, "inner-attack", epoch, idx),
                        )
                        x = result.x_adv
                    loss = T.softmax_cross_entropy(
                        model.logits_t(T.DenseTensor(x, name="input")), ys[idx]
                    )
                    losses.append(loss)
                total = losses[0]
                for loss in losses[1:]:
                    total = T.add(total, loss, name="batch_sum")
                total = T.div(total, float(len(batch)), name="batch_mean")
                grads = T.gradients(total, params)
                epoch_loss += total.item() * len(batch)
                new_w, new_b = [], []
                for i in range(len(model._w)):
                    gw, gb = grads[2 * i], grads[2 * i + 1]
                    w = model._w[i].data
                    new_w.append(w - spec.learning_rate * (gw + spec.weight_decay * w))
                    new_b.append(model._b[i].data - spec.learning_rate * gb)
                model._set_parameters(new_w, new_b)
        except NumericError as err:
            raise TrainingError(f"training diverged at epoch {epoch}: {err}") from err
        mean_loss = epoch_loss / len(order)
        if not np.isfinite(mean_loss):
            raise TrainingError(f"training diverged at epoch {epoch}: loss is not finite")
        trace.append(mean_loss)
    return model, trace


def accuracy(model: Classifier, data: LabeledSet) -> float:
    correct = sum(1 for x, y in data.examples if model.predict(x) == y)
    return correct / len(data)
