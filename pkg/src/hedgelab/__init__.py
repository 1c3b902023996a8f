"""hedgelab: a desk-scale laboratory for bounded input attacks and the
defensive perturbations that break them."""

from .attacks import AttackResult, AttackSpec, run_attack
from .data import LabeledSet, make_blobs, make_grid_images
from .defenses import DefenseOutcome, DefenseSpec, defend, hedge_objective
from .errors import ConfigError, HedgelabError, NumericError, ShapeError, TrainingError
from .harness import ExperimentConfig, ResultTable, run_experiment, run_linear_verification
from .linear_model import PiecewiseLinearModel
from .metrics import EvalRecord, MetricConfig, lipschitz_difference, robust_accuracy, ssim
from .models import Classifier, TrainSpec, train
from .tensor import DenseTensor, GradientTape, gradients, input_gradient

__version__ = "0.1.0"

__all__ = [
    "AttackResult", "AttackSpec", "run_attack",
    "LabeledSet", "make_blobs", "make_grid_images",
    "DefenseOutcome", "DefenseSpec", "defend", "hedge_objective",
    "ConfigError", "HedgelabError", "NumericError", "ShapeError", "TrainingError",
    "ExperimentConfig", "ResultTable", "run_experiment", "run_linear_verification",
    "PiecewiseLinearModel",
    "EvalRecord", "MetricConfig", "lipschitz_difference", "robust_accuracy", "ssim",
    "Classifier", "TrainSpec", "train",
    "DenseTensor", "GradientTape", "gradients", "input_gradient",
    "__version__",
]
