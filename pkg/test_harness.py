import json

import numpy as np
import pytest

import harness
from data import make_rings, make_xor
from harness import (bench_timing, compare_datasets, expression_sampler, fit_function, k_sweep,
                     network_param_count, param_count, parity_hidden, prune_run, results_document, run_experiment,
                     sweep_rows, train_and_save, write_results)
from models import ComparisonResult, ExperimentConfig, PruneReport, RunResult
from network import build_network, load_model
from training import TrainingDivergedError


def small_config(**changes):
    values = dict(hidden=[4, 2], epochs=30, repeats=2, lr=0.01, seed=3)
    values.update(changes)
    return ExperimentConfig(**values)


@pytest.mark.parametrize("decomposition, n, k, expected", [
    ("chebyshev", 20, 3, 80),
    ("legendre", 20, 3, 80),
    ("gaussian", 20, 3, 240),
    ("fourier", 20, 3, 160),
    ("dense", 20, 3, 20),
    ("fourier", 1, 0, 2),
])
def test_param_count_table(decomposition, n, k, expected):
    assert param_count(decomposition, n, k) == expected


def test_param_count_rejects_unknown_decomposition():
    with pytest.raises(ValueError):
        param_count("wavelet", 4, 2)


def test_network_param_count_matches_built_networks():
    cheby = build_network(5, [4, 2], 3, k=3, rng=np.random.default_rng(0))
    mlp = build_network(5, [4, 2], 3, kind="mlp", rng=np.random.default_rng(0))
    assert network_param_count([5, 4, 2, 3], 3) == cheby.parameter_count()
    assert network_param_count([5, 4, 2, 3]) == mlp.parameter_count()


def test_parity_hidden_reaches_the_chebyshev_count():
    widened = parity_hidden([4, 2], 5, 3, 3)
    target = network_param_count([5, 4, 2, 3], 3)
    assert network_param_count([5, *widened, 3]) >= target
    narrower = [h - 1 for h in widened]
    assert network_param_count([5, *narrower, 3]) < target


def test_single_repeat_best_equals_mean():
    result = run_experiment(small_config(repeats=1), make_xor(60, seed=1))
    for run in (result.mlp, result.cheby):
        assert run.best_accuracy == run.mean_accuracy
        assert 0.0 <= run.best_accuracy <= 100.0
    assert result.diff == pytest.approx(result.cheby.best_accuracy - result.mlp.best_accuracy)


def test_k0_chebyshev_matches_mlp():
    result = run_experiment(small_config(k=0), make_rings(80, seed=2))
    assert result.cheby.accuracies == pytest.approx(result.mlp.accuracies, abs=1e-9)
    assert result.cheby.param_count == result.mlp.param_count
    assert result.outcome() == "tie"


def test_failed_repeat_is_excluded(monkeypatch):
    calls = {"n": 0}
    real_train = harness.train_network

    def flaky(net, *args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 1:
            raise TrainingDivergedError("Loss became nan at epoch 0")
        return real_train(net, *args, **kwargs)

    monkeypatch.setattr(harness, "train_network", flaky)
    result = run_experiment(small_config(), make_xor(60, seed=1))
    assert result.mlp.accuracies[0] is None
    assert result.mlp.failures[0]["repeat"] == 0
    assert result.mlp.best_repeat == 1
    assert result.cheby.failures == []


def test_summary_lines():
    mlp = RunResult("mlp", [48.78], [40.0])
    cheby = RunResult("cheby", [75.61], [70.0])
    line = ComparisonResult("auto", mlp, cheby, small_config()).summary_line()
    assert line == "auto: cheby 75.61, mlp 48.78, diff 26.830"

    report = PruneReport("threshold", [0.1], [{"layer": 0, "type": "cheby", "total": 1000, "zeroed": 892,
                                               "compression": 89.2}], accuracy_after=99.123)
    assert report.summary_line("wdbc", "mlp", 98.246) == "wdbc: mlp 98.246, pruned-cheby 99.123, compression 89.2"


def test_compare_tallies_outcomes():
    results, tally = compare_datasets(small_config(k=0, repeats=1), [make_xor(40, seed=1), make_rings(40, seed=1)])
    assert len(results) == 2
    assert tally == {"win": 0, "loss": 0, "tie": 2, "failed": 0}


def test_k_sweep_deduplicates_and_counts_grow():
    sweep = k_sweep(small_config(repeats=1, epochs=5), make_rings(60, seed=0), [3, 1, 3, 6])
    assert [k for k, _ in sweep] == [1, 3, 6]
    counts = [row["cheby_params"] for row in sweep_rows(sweep)]
    assert counts == sorted(counts) and len(set(counts)) == 3


def test_results_document_is_deterministic(tmp_path):
    docs = []
    for name in ("a.json", "b.json"):
        result = run_experiment(small_config(repeats=1, epochs=10), make_xor(40, seed=5))
        path = write_results(str(tmp_path / name), results_document("compare", {"comparisons": [result.to_dict()]}))
        docs.append(open(path, encoding="utf-8").read())
    assert docs[0] == docs[1]
    doc = json.loads(docs[0])
    assert doc["schema_version"] == 1
    assert set(doc["environment"]) == {"python", "numpy", "platform"}
    assert "wall_time_s" not in docs[0]


def test_bench_rows():
    rows = bench_timing([3], [0, 2], batch_size=8, repetitions=2, warmup=1)
    assert [(r["model"], r["k"]) for r in rows] == [("mlp", None), ("cheby", 0), ("cheby", 2)]
    for row in rows:
        assert set(row) == {"model", "features", "k", "train_s_per_batch", "infer_s_per_batch"}
        assert row["features"] == 3
        assert row["train_s_per_batch"] > 0
        assert row["infer_s_per_batch"] > 0


def test_train_and_prune_at_zero_threshold(tmp_path):
    ds = make_rings(80, seed=1)
    path = str(tmp_path / "rings_cheby.json")
    result = train_and_save(small_config(), ds, "cheby", path)
    _, _, metadata = load_model(path)
    assert metadata["test_accuracy"] == result.best_accuracy
    assert metadata["split_seed"] == 3

    report, frontier = prune_run(path, ds, tau=0.0, fine_tune_epochs=5)
    assert report.compression == 0.0
    assert report.accuracy_before == report.accuracy_after == result.best_accuracy
    assert len(frontier) == 1


def test_prune_group_and_threshold_agree_on_k0_model(tmp_path):
    ds = make_rings(80, seed=1)
    path = str(tmp_path / "k0.json")
    train_and_save(small_config(k=0), ds, "cheby", path)
    threshold, _ = prune_run(path, ds, strategy="threshold", tau=0.3, fine_tune_epochs=5)
    group, _ = prune_run(path, ds, strategy="group", tau=0.3, fine_tune_epochs=5)
    assert threshold.per_layer == group.per_layer
    assert threshold.accuracy_after == group.accuracy_after


def test_fit_function():
    result = fit_function("x0**2 * x1", 2, 2)
    assert result["max_abs_error"] <= 1e-12
    pairwise = fit_function("x0*x1 + x1*x2", 3, 1, pairwise=True)
    assert pairwise["max_abs_error"] <= 1e-8
    with pytest.raises(ValueError):
        fit_function("__import__('os')", 1, 2)


@pytest.mark.parametrize("expression", [
    "x0 + sqrt([y.__class__.__name__ == \"ndarray\" for y in (x0,)][0])",
    "(lambda y: y)(x0)",
    "x0.__class__",
    "sum(x for x in (x0,))",
    "x0 +",
])
def test_expression_sampler_rejects_anything_beyond_arithmetic(expression):
    with pytest.raises(ValueError):
        expression_sampler(expression, 1)


def test_expression_sampler_evaluates_numpy_calls():
    sample = expression_sampler("sin(x0) * x1 + abs(-x0) ** 2", 2)
    points = np.array([[0.5, 2.0], [-1.0, 0.0]])
    assert sample(points) == pytest.approx(np.sin(points[:, 0]) * points[:, 1] + points[:, 0] ** 2)


@pytest.mark.slow
def test_rings_and_xor_regressions():
    rings = run_experiment(ExperimentConfig(seed=11), make_rings(600, 0.03, seed=11))
    assert rings.cheby.best_accuracy >= 95.0
    assert rings.cheby.best_accuracy >= rings.mlp.best_accuracy - 2.0
    xor = run_experiment(ExperimentConfig(seed=7), make_xor(400, seed=7))
    assert xor.cheby.best_accuracy >= 95.0
    assert xor.mlp.best_accuracy >= 95.0
    assert xor.diff >= -2.0


@pytest.mark.slow
def test_k_sweep_does_not_improve_at_extreme_order():
    config = ExperimentConfig(seed=11, train_fraction=80 / 600)
    rows = sweep_rows(k_sweep(config, make_rings(600, 0.03, seed=11), [0, 1, 3, 6, 10]))
    counts = [row["cheby_params"] for row in rows]
    assert all(a < b for a, b in zip(counts, counts[1:]))
    assert max(row["cheby_f1"] for row in rows) >= rows[-1]["cheby_f1"]


@pytest.mark.slow
def test_percentile_sweep_keeps_rings_accuracy(tmp_path):
    ds = make_rings(600, 0.03, seed=11)
    path = str(tmp_path / "rings.json")
    train_and_save(ExperimentConfig(seed=11), ds, "cheby", path)
    report, frontier = prune_run(path, ds, percentiles=[50, 70, 80, 90], tolerance=1.0)
    assert len(frontier) == 4
    assert report.compression >= 50.0
    assert report.accuracy_after >= report.accuracy_before - 1.0


@pytest.mark.slow
def test_inference_cost_grows_with_order():
    rows = bench_timing([90], [2, 4, 8], batch_size=256)
    mlp = rows[0]["infer_s_per_batch"]
    cheby = [row["infer_s_per_batch"] for row in rows[1:]]
    assert mlp <= cheby[0]
    assert cheby[0] <= cheby[-1]
