import json

import pytest

from hedgelab.cli import main
from hedgelab.harness import ResultTable
from hedgelab.models import Classifier


@pytest.fixture()
def config_path(tmp_path):
    doc = {
        "schema_version": 1,
        "dataset": {"kind": "blobs", "classes": 2, "dim": 2, "per_class": 20, "spread": 0.2},
        "train": {"mode": "standard", "epochs": 5, "batch_size": 8, "learning_rate": 0.2},
        "hidden": [8],
        "attacks": [{"id": "pgd3", "variant": "pgd", "eps": 0.1, "steps": 3, "step_size": 0.05}],
        "defenses": [
            {"id": "plain", "variant": "none"},
            {"id": "hedge", "variant": "hedge", "eps": 0.1, "steps": 3},
        ],
        "seeds": [1],
        "eval_per_class": 8,
        "lipschitz_examples": 1,
        "ablate": {"defense_steps": [1]},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


def test_train_writes_checkpoint(config_path, tmp_path, capsys):
    out = tmp_path / "model.json"
    assert main(["train", "--config", str(config_path), "--output", str(out)]) == 0
    model = Classifier.from_json(out.read_text())
    assert model.num_classes == 2
    assert "train_accuracy" in capsys.readouterr().out


def test_evaluate_writes_json_and_csv(config_path, tmp_path):
    stem = tmp_path / "results"
    assert main(["evaluate", str(config_path), "--output", str(stem)]) == 0
    table = ResultTable.from_json((tmp_path / "results.json").read_text())
    assert len(table.rows) == 2
    csv_text = (tmp_path / "results.csv").read_text()
    assert csv_text == table.to_csv()


def test_evaluate_rerun_is_byte_identical(config_path, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["evaluate", str(config_path), "--output", str(a)]) == 0
    assert main(["evaluate", str(config_path), "--output", str(b)]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_ablate_runs_grid(config_path, tmp_path):
    stem = tmp_path / "ab"
    assert main(["ablate", "--config", str(config_path), "--output", str(stem)]) == 0
    table = ResultTable.from_json((tmp_path / "ab.json").read_text())
    assert any(r.defense_steps == 1 for r in table.rows)


def test_export_converts_results(config_path, tmp_path):
    stem = tmp_path / "results"
    main(["evaluate", str(config_path), "--output", str(stem)])
    out_csv = tmp_path / "exported.csv"
    assert main(["export", str(tmp_path / "results.json"), "--csv", str(out_csv)]) == 0
    assert out_csv.read_text() == (tmp_path / "results.csv").read_text()


def test_verify_linear_passes_and_writes_report(tmp_path, capsys):
    report_path = tmp_path / "report.json"
    assert main(["verify-linear", "--output", str(report_path)]) == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out and "[FAIL]" not in out
    assert json.loads(report_path.read_text())["passed"]


def test_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": 1, "attacks": [], "defenses": []}')
    assert main(["evaluate", str(bad)]) == 1


def test_io_error_exit_code(tmp_path):
    assert main(["evaluate", str(tmp_path / "missing.json")]) == 3


def test_numeric_error_exit_code(config_path, tmp_path):
    doc = json.loads(config_path.read_text())
    doc["train"]["learning_rate"] = 1e300
    bad = tmp_path / "diverge.json"
    bad.write_text(json.dumps(doc))
    import numpy as np
    with np.errstate(over="ignore", invalid="ignore"):
        assert main(["evaluate", str(bad)]) == 2
