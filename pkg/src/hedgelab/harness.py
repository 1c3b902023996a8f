"""Config-driven experiment runner.

A JSON experiment config names a dataset, a training recipe, a list of
attacks and a list of defenses; `run_experiment` trains one model per seed,
generates every attack's adversarial example against the bare model once,
then evaluates every defense on both natural and adversarial inputs. The
protocol keeps attack generation strictly independent of any defense
(except for the explicitly defense-aware attack variant, whose inner loop
is part of its own spec).

Per-example randomness is derived from (seed, purpose, id, example index),
so results do not depend on evaluation order. Rerunning a config is
byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .attacks import AttackSpec, run_attack
from .data import LabeledSet, make_blobs, make_grid_images
from .defenses import DefenseSpec, defend
from .errors import ConfigError
from .linear_model import (
    PiecewiseLinearModel,
    REGION_ATTACK_VULNERABLE,
    REGION_NATURAL_ERROR,
    evaluate_grid,
    sample_grid,
)
from .metrics import (
    EvalRecord,
    AttackEval,
    MetricConfig,
    logit_margin,
    lipschitz_difference,
    robust_accuracy,
    ssim,
    tradeoff_counts,
    worst_case_accuracy,
)
from .models import Classifier, TrainSpec, train
from .rng import derive_seed

CONFIG_SCHEMA_VERSION = 1
RESULT_SCHEMA_VERSION = 1

CSV_COLUMNS = (
    "model", "attack", "defense", "attack_eps", "defense_eps", "defense_steps",
    "seed", "natural_accuracy", "robust_accuracy", "worst_case_accuracy",
    "unique_breaks", "f_to_t", "t_to_f", "f_to_f", "net_gain",
    "mean_lipschitz_diff", "mean_ssim",
)


def attack_spec_from_dict(doc: dict) -> AttackSpec:
    doc = dict(doc)
    doc.pop("id", None)
    inner = doc.pop("defense", None)
    if inner is not None:
        inner = defense_spec_from_dict(inner)
    if "checkpoints" in doc and doc["checkpoints"] is not None:
        doc["checkpoints"] = tuple(doc["checkpoints"])
    try:
        return AttackSpec(defense=inner, **doc)
    except TypeError as err:
        raise ConfigError(f"bad attack spec: {err}") from err


def defense_spec_from_dict(doc: dict) -> DefenseSpec:
    doc = dict(doc)
    doc.pop("id", None)
    try:
        return DefenseSpec(**doc)
    except TypeError as err:
        raise ConfigError(f"bad defense spec: {err}") from err


def _spec_to_dict(spec) -> dict:
    doc = asdict(spec)
    return {k: v for k, v in doc.items() if v is not None}


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: dict
    train: dict
    attacks: tuple[tuple[str, AttackSpec], ...]
    defenses: tuple[tuple[str, DefenseSpec], ...]
    seeds: tuple[int, ...] = (1, 2, 3)
    eval_per_class: int = 100
    hidden: tuple[int, ...] = (64, 64)
    metric: MetricConfig = field(default_factory=MetricConfig)
    lipschitz_examples: int = 8
    ablate: dict = field(default_factory=dict)
    output: str | None = None

    def __post_init__(self):
        if not self.attacks or not self.defenses:
            raise ConfigError("config needs at least one attack and one defense")
        ids = [a for a, _ in self.attacks] + [d for d, _ in self.defenses]
        if len(set(ids)) != len(ids):
            raise ConfigError("attack/defense ids must be unique")
        if self.dataset.get("kind") not in ("blobs", "grid_images"):
            raise ConfigError(f"unknown dataset kind {self.dataset.get('kind')!r}")

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        doc = json.loads(text)
        if doc.get("schema_version") != CONFIG_SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema: {doc.get('schema_version')}")
        attacks = tuple(
            (entry["id"], attack_spec_from_dict(entry)) for entry in doc.get("attacks", [])
        )
        defenses = tuple(
            (entry["id"], defense_spec_from_dict(entry)) for entry in doc.get("defenses", [])
        )
        metric = MetricConfig(**doc.get("metric", {}))
        return cls(
            dataset=doc.get("dataset", {}),
            train=doc.get("train", {}),
            attacks=attacks,
            defenses=defenses,
            seeds=tuple(doc.get("seeds", (1, 2, 3))),
            eval_per_class=int(doc.get("eval_per_class", 100)),
            hidden=tuple(doc.get("hidden", (64, 64))),
            metric=metric,
            lipschitz_examples=int(doc.get("lipschitz_examples", 8)),
            ablate=doc.get("ablate", {}),
            output=doc.get("output"),
        )

    def to_json(self) -> str:
        doc = {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "dataset": self.dataset,
            "train": self.train,
            "attacks": [
                {"id": aid, **_spec_to_dict(spec)} for aid, spec in self.attacks
            ],
            "defenses": [
                {"id": did, **_spec_to_dict(spec)} for did, spec in self.defenses
            ],
            "seeds": list(self.seeds),
            "eval_per_class": self.eval_per_class,
            "hidden": list(self.hidden),
            "metric": asdict(self.metric),
            "lipschitz_examples": self.lipschitz_examples,
            "ablate": self.ablate,
            "output": self.output,
        }
        return json.dumps(doc, indent=2)


@dataclass
class ResultRow:
    model: str
    attack: str
    defense: str
    attack_eps: float
    defense_eps: float
    defense_steps: int
    seed: int
    natural_accuracy: float
    robust_accuracy: float
    worst_case_accuracy: float
    unique_breaks: int
    f_to_t: int
    t_to_f: int
    f_to_f: int
    net_gain: int
    mean_lipschitz_diff: float | None
    mean_ssim: float | None


@dataclass
class ResultTable:
    rows: list[ResultRow] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {"schema_version": RESULT_SCHEMA_VERSION, "rows": [asdict(r) for r in self.rows]}
        )

    @classmethod
    def from_json(cls, text: str) -> "ResultTable":
        doc = json.loads(text)
        if doc.get("schema_version") != RESULT_SCHEMA_VERSION:
            raise ConfigError(f"unsupported result schema: {doc.get('schema_version')}")
        return cls(rows=[ResultRow(**row) for row in doc["rows"]])

    def to_csv(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for row in self.rows:
            doc = asdict(row)
            cells = []
            for col in CSV_COLUMNS:
                v = doc[col]
                cells.append("" if v is None else repr(v) if isinstance(v, float) else str(v))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def select(self, **conditions) -> list[ResultRow]:
        out = []
        for row in self.rows:
            doc = asdict(row)
            if all(doc.get(k) == v for k, v in conditions.items()):
                out.append(row)
        return out


def _make_dataset(cfg: dict, per_class: int, seed: int) -> LabeledSet:
    kind = cfg["kind"]
    if kind == "blobs":
        return make_blobs(
            num_classes=int(cfg.get("classes", 2)),
            dim=int(cfg.get("dim", 2)),
            per_class=per_class,
            spread=float(cfg.get("spread", 0.3)),
            seed=seed,
        )
    return make_grid_images(
        num_classes=int(cfg.get("classes", 2)),
        side=int(cfg.get("side", 12)),
        per_class=per_class,
        seed=seed,
        noise=float(cfg.get("noise", 0.1)),
    )


def train_model(config: ExperimentConfig, seed: int) -> tuple[Classifier, LabeledSet]:
    """Train the configured model for one seed; returns (model, train set)."""
    tcfg = dict(config.train)
    mode = tcfg.pop("mode", "standard")
    inner = tcfg.pop("attack", None)
    per_class = int(config.dataset.get("per_class", 100))
    data = _make_dataset(config.dataset, per_class, derive_seed(seed, "train-data"))
    spec = TrainSpec(
        mode=mode,
        attack=attack_spec_from_dict(inner) if inner else None,
        seed=derive_seed(seed, "train"),
        **{k: v for k, v in tcfg.items()},
    )
    model = Classifier(
        [data.feature_dim, *config.hidden, data.num_classes],
        seed=derive_seed(seed, "model-init"),
    )
    trained, _ = train(model, data, spec)
    return trained, data


def evaluate_seed(
    config: ExperimentConfig,
    seed: int,
    model: Classifier | None = None,
    attacks: tuple[tuple[str, AttackSpec], ...] | None = None,
    defenses: tuple[tuple[str, DefenseSpec], ...] | None = None,
) -> list[EvalRecord]:
    """Build the full per-example record grid for one seed."""
    if model is None:
        model, _ = train_model(config, seed)
    attacks = config.attacks if attacks is None else attacks
    defenses = config.defenses if defenses is None else defenses
    eval_set = _make_dataset(
        config.dataset, config.eval_per_class, derive_seed(seed, "eval-data")
    )
    bounds = eval_set.bounds
    image_shape = eval_set.feature_shape if len(eval_set.feature_shape) == 2 else None
    records: list[EvalRecord] = []
    lip_budget = {aid: config.lipschitz_examples for aid, _ in attacks}
    for i, (x, y) in enumerate(eval_set.examples):
        record = EvalRecord(example_id=i, label=y, natural_pred=model.predict(x))
        for did, dspec in defenses:
            record.defended_natural[did] = defend(
                model, x, dspec, bounds=bounds,
                seed=derive_seed(seed, "defense", did, "natural", i),
            ).prediction
        for aid, aspec in attacks:
            res = run_attack(
                model, x, y, aspec, bounds=bounds,
                seed=derive_seed(seed, "attack", aid, i),
            )
            pred = model.predict(res.x_adv)
            entry = AttackEval(
                prediction=pred,
                success=pred != y,
                margin=logit_margin(model, res.x_adv),
                delta_linf=res.delta_linf,
                delta_l2=res.delta_l2,
            )
            if image_shape is not None and min(image_shape) >= config.metric.ssim_window:
                entry.ssim_to_natural = ssim(
                    x.reshape(image_shape), res.x_adv.reshape(image_shape), config.metric
                )
            if pred != y and lip_budget[aid] > 0:
                lip_budget[aid] -= 1
                entry.lipschitz_diff = lipschitz_difference(
                    model, res.x_adv, y, pred,
                    replace(config.metric, lipschitz_seed=derive_seed(seed, "lipschitz", aid, i)),
                )
            for did, dspec in defenses:
                entry.defended[did] = defend(
                    model, res.x_adv, dspec, bounds=bounds,
                    seed=derive_seed(seed, "defense", did, aid, i),
                ).prediction
            record.attacks[aid] = entry
        records.append(record)
    return records


def _rows_for_records(
    records: list[EvalRecord],
    model_name: str,
    attacks: tuple[tuple[str, AttackSpec], ...],
    defenses: tuple[tuple[str, DefenseSpec], ...],
    seed: int,
) -> list[ResultRow]:
    attack_ids = [aid for aid, _ in attacks]
    rows = []
    for did, dspec in defenses:
        natural_acc = robust_accuracy(records, None, did)
        worst = worst_case_accuracy(records, attack_ids, did)
        for aid, aspec in attacks:
            counts = tradeoff_counts(records, aid, did)
            unique = 0
            for r in records:
                if r.prediction(aid, did) != r.label and all(
                    r.prediction(other, did) == r.label
                    for other in attack_ids if other != aid
                ):
                    unique += 1
            lips = [
                r.attacks[aid].lipschitz_diff
                for r in records if r.attacks[aid].lipschitz_diff is not None
            ]
            ssims = [
                r.attacks[aid].ssim_to_natural
                for r in records if r.attacks[aid].ssim_to_natural is not None
            ]
            rows.append(ResultRow(
                model=model_name,
                attack=aid,
                defense=did,
                attack_eps=aspec.eps,
                defense_eps=dspec.eps if dspec.variant != "none" else 0.0,
                defense_steps=dspec.steps if dspec.variant.startswith("hedge") else 0,
                seed=seed,
                natural_accuracy=natural_acc,
                robust_accuracy=robust_accuracy(records, aid, did),
                worst_case_accuracy=worst,
                unique_breaks=unique,
                f_to_t=counts.f_to_t,
                t_to_f=counts.t_to_f,
                f_to_f=counts.f_to_f,
                net_gain=counts.net,
                mean_lipschitz_diff=float(np.mean(lips)) if lips else None,
                mean_ssim=float(np.mean(ssims)) if ssims else None,
            ))
    return rows


def run_experiment(config: ExperimentConfig) -> ResultTable:
    """Train, attack and defend per the config; one row per result key."""
    model_name = config.train.get("mode", "standard")
    table = ResultTable()
    for seed in config.seeds:
        model, _ = train_model(config, seed)
        records = evaluate_seed(config, seed, model=model)
        table.rows.extend(
            _rows_for_records(records, model_name, config.attacks, config.defenses, seed)
        )
    return table


def run_ablation(config: ExperimentConfig) -> ResultTable:
    """Sweep defense steps, defense radius and attack radius grids.

    The model is trained once per seed and reused; each grid point re-runs
    only the needed attacks or defenses.
    """
    grids = config.ablate or {}
    step_grid = [int(v) for v in grids.get("defense_steps", [])]
    d_eps_grid = [float(v) for v in grids.get("defense_eps", [])]
    a_eps_grid = [float(v) for v in grids.get("attack_eps", [])]
    model_name = config.train.get("mode", "standard")
    table = ResultTable()
    for seed in config.seeds:
        model, _ = train_model(config, seed)
        variants: list[tuple[tuple[str, AttackSpec], ...] | None] = []
        defense_sets = []
        for k in step_grid:
            defense_sets.append(tuple(
                (did, replace(dspec, steps=k)) for did, dspec in config.defenses
            ))
        for eps in d_eps_grid:
            defense_sets.append(tuple(
                (did, replace(dspec, eps=eps)) for did, dspec in config.defenses
            ))
        for dset in defense_sets:
            records = evaluate_seed(config, seed, model=model, defenses=dset)
            table.rows.extend(
                _rows_for_records(records, model_name, config.attacks, dset, seed)
            )
        for eps in a_eps_grid:
            aset = tuple(
                (aid, replace(aspec, eps=eps)) for aid, aspec in config.attacks
            )
            records = evaluate_seed(config, seed, model=model, attacks=aset)
            table.rows.extend(
                _rows_for_records(records, model_name, aset, config.defenses, seed)
            )
    return table


# -- linear-model verification ----------------------------------------------


def _scenario_checks(model: PiecewiseLinearModel, upper=2.0, step=1e-3) -> list[dict]:
    grid = sample_grid(model, upper=upper, step=step)
    out = evaluate_grid(model, grid)
    n = len(grid)
    vulnerable = sum(1 for r in out.regions if r == REGION_ATTACK_VULNERABLE)
    natural_err = sum(1 for r in out.regions if r == REGION_NATURAL_ERROR)
    attacked_wrong = int(np.sum(~out.attacked_correct))
    checks = [
        {
            "name": "attack_deficit_matches_regions",
            "passed": attacked_wrong == vulnerable + natural_err,
            "detail": f"attacked wrong {attacked_wrong}, vulnerable {vulnerable}, natural errors {natural_err}",
        },
    ]
    k_t, k_f = model.slope_true, model.slope_false
    if k_f > k_t:
        if model.bias_shift < model.radius:
            checks.append({
                "name": "full_recovery_after_defense",
                "passed": bool(np.all(out.hedged_after_attack_correct)),
                "detail": f"{int(np.sum(out.hedged_after_attack_correct))}/{n} correct",
            })
            checks.append({
                "name": "natural_predictions_unchanged_by_defense",
                "passed": bool(np.all(out.hedged_natural_correct == out.natural_correct)),
                "detail": "defense applied directly to natural inputs",
            })
        else:
            # large-bias regime: defense undoes the attack but natural errors stay
            checks.append({
                "name": "defense_restores_pre_attack_accuracy",
                "passed": bool(np.all(out.hedged_after_attack_correct == out.natural_correct)),
                "detail": "post-defense accuracy equals natural accuracy pointwise",
            })
            checks.append({
                "name": "natural_errors_exist_before_attack",
                "passed": natural_err > 0 and not bool(np.all(out.natural_correct)),
                "detail": f"{natural_err} natural errors",
            })
    elif k_t > k_f:
        checks.append({
            "name": "defense_strictly_hurts",
            "passed": float(np.mean(out.hedged_after_attack_correct))
            < float(np.mean(out.attacked_correct)),
            "detail": f"hedged {float(np.mean(out.hedged_after_attack_correct)):.4f} "
                      f"vs attacked {float(np.mean(out.attacked_correct)):.4f}",
        })
    else:
        checks.append({
            "name": "defense_is_noop",
            "passed": bool(np.all(out.hedged_after_attack_correct == out.attacked_correct)),
            "detail": "equal slopes give sign(0) = 0 steps",
        })
    return checks


def run_linear_verification(scenarios: list[PiecewiseLinearModel] | None = None) -> dict:
    """Exact grid verification of the analytic model across slope/bias regimes."""
    if scenarios is None:
        scenarios = [
            PiecewiseLinearModel(1.0, 10.0, 0.1, 0.05),
            PiecewiseLinearModel(1.0, 10.0, 0.1, 0.15),
            PiecewiseLinearModel(10.0, 1.0, 0.1, 0.05),
            PiecewiseLinearModel(1.0, 1.0, 0.1, 0.05),
        ]
    report = {"scenarios": [], "passed": True}
    for m in scenarios:
        checks = _scenario_checks(m)
        passed = all(c["passed"] for c in checks)
        report["scenarios"].append({
            "slope_true": m.slope_true,
            "slope_false": m.slope_false,
            "radius": m.radius,
            "bias_shift": m.bias_shift,
            "checks": checks,
            "passed": passed,
        })
        report["passed"] = report["passed"] and passed
    return report
