"""Synthetic labeled datasets, generated deterministically from a seed.

Two generators: Gaussian blobs for cheap classifier experiments, and small
grid images (stripes / checkerboards / discs in [0, 1]) so that image
similarity metrics have something meaningful to chew on. All randomness
comes from the package's own SplitMix64 streams, so regeneration with the
same seed is bit-identical across runs and platforms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .rng import SplitMix64, derive_seed

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class LabeledSet:
    """Labeled examples with identical feature shape.

    Features are stored flat (rank-1 float64); `feature_shape` records the
    logical shape, e.g. (side, side) for grid images. `bounds` is the valid
    input domain as (low, high), or None when the domain is unbounded.
    """

    examples: tuple[tuple[np.ndarray, int], ...]
    num_classes: int
    feature_shape: tuple[int, ...]
    seed: int
    bounds: tuple[float, float] | None = None

    def __post_init__(self):
        dim = self.feature_dim
        for x, y in self.examples:
            if x.shape != (dim,):
                raise ConfigError(f"example shape {x.shape} != ({dim},)")
            if not 0 <= y < self.num_classes:
                raise ConfigError(f"label {y} out of range")

    @property
    def feature_dim(self) -> int:
        return int(np.prod(self.feature_shape))

    def __len__(self) -> int:
        return len(self.examples)

    def features(self) -> np.ndarray:
        return np.stack([x for x, _ in self.examples])

    def labels(self) -> np.ndarray:
        return np.array([y for _, y in self.examples], dtype=np.int64)

    def as_image(self, i: int) -> np.ndarray:
        if len(self.feature_shape) != 2:
            raise ConfigError("dataset does not hold images")
        return self.examples[i][0].reshape(self.feature_shape)

    def to_json(self) -> str:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "num_classes": self.num_classes,
            "feature_shape": list(self.feature_shape),
            "seed": self.seed,
            "bounds": list(self.bounds) if self.bounds else None,
            "examples": [{"x": x.tolist(), "y": int(y)} for x, y in self.examples],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "LabeledSet":
        doc = json.loads(text)
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported dataset schema: {doc.get('schema_version')}")
        examples = tuple(
            (_freeze(np.array(e["x"], dtype=np.float64)), int(e["y"]))
            for e in doc["examples"]
        )
        bounds = tuple(doc["bounds"]) if doc.get("bounds") else None
        return cls(
            examples=examples,
            num_classes=int(doc["num_classes"]),
            feature_shape=tuple(doc["feature_shape"]),
            seed=int(doc["seed"]),
            bounds=bounds,
        )


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _class_centers(num_classes: int, dim: int) -> np.ndarray:
    """Distinct unit-scale centers: basis vertices when they fit, else a circle."""
    if num_classes <= dim:
        centers = np.zeros((num_classes, dim))
        for c in range(num_classes):
            centers[c, c] = 1.0
        return centers
    if dim < 2:
        raise ConfigError("need dim >= 2 when classes exceed dim")
    centers = np.zeros((num_classes, dim))
    angles = 2.0 * np.pi * np.arange(num_classes) / num_classes
    centers[:, 0] = np.cos(angles)
    centers[:, 1] = np.sin(angles)
    return centers


def make_blobs(
    num_classes: int, dim: int, per_class: int, spread: float, seed: int
) -> LabeledSet:
    """Isotropic Gaussian clusters, one per class, exactly balanced."""
    if num_classes < 2:
        raise ConfigError("make_blobs needs at least 2 classes")
    if per_class < 1:
        raise ConfigError("make_blobs needs per_class >= 1")
    centers = _class_centers(num_classes, dim)
    examples = []
    for c in range(num_classes):
        rng = SplitMix64(derive_seed(seed, "blobs", c))
        for _ in range(per_class):
            x = centers[c] + spread * rng.normal(dim)
            examples.append((_freeze(x), c))
    return LabeledSet(
        examples=tuple(examples),
        num_classes=num_classes,
        feature_shape=(dim,),
        seed=seed,
        bounds=None,
    )


def _stripes(side: int, period: int, horizontal: bool) -> np.ndarray:
    idx = np.arange(side)
    band = ((idx // period) % 2).astype(np.float64)
    return np.tile(band[:, None] if horizontal else band[None, :], (1, side) if horizontal else (side, 1))


def _checker(side: int, cell: int) -> np.ndarray:
    i, j = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    return (((i // cell) + (j // cell)) % 2).astype(np.float64)


def _disc(side: int, radius_frac: float) -> np.ndarray:
    i, j = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    center = (side - 1) / 2.0
    r = np.sqrt((i - center) ** 2 + (j - center) ** 2)
    return (r <= radius_frac * side / 2.0).astype(np.float64)


def make_grid_images(
    num_classes: int, side: int, per_class: int, seed: int, noise: float = 0.1
) -> LabeledSet:
    """Small structured images in [0, 1]: stripes, checkerboards and discs.

    The pattern family cycles with the class index and its scale varies so
    arbitrarily many classes stay distinguishable. Per-example Gaussian
    noise is added and the result clamped to [0, 1].
    """
    if side < 8:
        raise ConfigError("make_grid_images needs side >= 8")
    if num_classes < 2 or per_class < 1:
        raise ConfigError("make_grid_images needs >= 2 classes and per_class >= 1")
    examples = []
    for c in range(num_classes):
        kind = c % 3
        scale = 1 + c // 3
        if kind == 0:
            base = _stripes(side, period=max(1, side // (2 * scale + 2)), horizontal=scale % 2 == 1)
        elif kind == 1:
            base = _checker(side, cell=max(1, side // (2 * scale + 2)))
        else:
            base = _disc(side, radius_frac=min(0.9, 0.35 + 0.15 * scale))
        rng = SplitMix64(derive_seed(seed, "grid-images", c))
        for _ in range(per_class):
            img = base + noise * rng.normal(side * side).reshape(side, side)
            img = np.clip(img, 0.0, 1.0)
            examples.append((_freeze(img.reshape(-1)), c))
    return LabeledSet(
        examples=tuple(examples),
        num_classes=num_classes,
        feature_shape=(side, side),
        seed=seed,
        bounds=(0.0, 1.0),
    )
