import csv
import json
import os

import pytest

from main import main

FAST = ["--epochs", "10", "--repeats", "2", "--lr", "0.01", "--log-level", "WARNING"]


@pytest.fixture
def workspace(tmp_path):
    config = str(tmp_path / "config.json")
    out = str(tmp_path / "out")
    assert main(["synth", "--kind", "rings", "--n", "80", "--seed", "4", "--out", out, "--config", config]) == 0
    return {"config": config, "out": out, "data": os.path.join(out, "rings.csv")}


def run(workspace, *args):
    return main([*args, "--out", workspace["out"], "--config", workspace["config"]])


def test_compare_is_byte_identical(workspace):
    documents = []
    for _ in range(2):
        assert run(workspace, "compare", "--data", workspace["data"], *FAST) == 0
        with open(os.path.join(workspace["out"], "compare.json"), encoding="utf-8") as f:
            documents.append(f.read())
    assert documents[0] == documents[1]
    doc = json.loads(documents[0])
    assert doc["command"] == "compare"
    assert doc["results"]["comparisons"][0]["dataset"] == "rings"


def test_compare_prints_summary_line(workspace, capsys):
    assert run(workspace, "compare", "--data", workspace["data"], *FAST) == 0
    output = capsys.readouterr().out
    assert "rings: cheby " in output
    assert "cheby wins" in output


def test_train_then_export_and_prune(workspace):
    model = os.path.join(workspace["out"], "rings_cheby.json")
    assert run(workspace, "train", "--data", workspace["data"], *FAST) == 0
    assert os.path.exists(model)

    assert run(workspace, "curves", "--model", model, "--samples", "11") == 0
    with open(os.path.join(workspace["out"], "curves_layer0.csv"), newline="") as f:
        assert len(list(csv.DictReader(f))) == 4 * 2 * 11

    assert run(workspace, "boundary", "--model", model, "--data", workspace["data"], "--resolution", "5") == 0
    with open(os.path.join(workspace["out"], "boundary.csv"), newline="") as f:
        rows = list(csv.DictReader(f))
    assert sum(r["kind"] == "grid" for r in rows) == 25
    assert sum(r["kind"] == "test" for r in rows) == 16

    assert run(workspace, "prune", "--model", model, "--data", workspace["data"], "--tau", "0",
               "--fine-tune-epochs", "2") == 0
    with open(os.path.join(workspace["out"], "prune_rings.json"), encoding="utf-8") as f:
        report = json.load(f)["results"]["report"]
    assert report["compression"] == 0.0


def test_fit_command(workspace):
    assert run(workspace, "fit", "--expr", "x0**2", "--dims", "1", "--order", "2") == 0
    with open(os.path.join(workspace["out"], "fit.json"), encoding="utf-8") as f:
        coeffs = json.load(f)["results"]["model"]["coeffs"]
    assert coeffs == pytest.approx([0.5, 0.0, 0.5], abs=1e-12)


def test_errors_exit_nonzero(workspace, capsys):
    assert run(workspace, "compare", "--data", "missing.csv", *FAST) == 1
    assert capsys.readouterr().err.startswith("error: ")


def test_curves_reject_dense_model(workspace, capsys):
    model = os.path.join(workspace["out"], "rings_mlp.json")
    assert run(workspace, "train", "--data", workspace["data"], "--model", "mlp", *FAST) == 0
    assert run(workspace, "curves", "--model", model) == 1
    assert "Chebyshev-adaptive" in capsys.readouterr().err


def test_diagnose(workspace, capsys):
    assert run(workspace, "diagnose") == 0
    assert "Basis check: OK" in capsys.readouterr().out
