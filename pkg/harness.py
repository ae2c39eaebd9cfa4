"""
Experiment protocol for comparing Chebyshev-adaptive networks with MLPs.

Both architectures are trained `repeats` times on one fixed stratified
split; repeat r of either model draws its initialisation and mini-batch
order from a generator seeded with seed + r, so the two models see the same
split and the same seed stream. The statistic reported per model is the
best test accuracy over the successful repeats.
"""

import ast
import json
import logging
import os
import time

import numpy as np

from data import apply_scaler, fit_scaler, stratified_split_indices
from diagnostic_tool import environment_stamp
from models import ComparisonResult, ExperimentConfig, PruneReport, RunResult
from multicheb import eval_pairwise, eval_tensor, fit_pairwise, fit_tensor
from network import build_network, load_model, save_model
from optim import make_optimizer
from prune import DEFAULT_PERCENTILES, forward_prune, sweep_percentiles
from run_logger import RunLogger, logged_operation
from training import TrainingDivergedError, evaluate, train_network, train_step

logger = logging.getLogger(__name__)

RESULTS_SCHEMA_VERSION = 1

# Parameters per neuron for n inputs at order k, biases excluded
DECOMPOSITIONS = {
    "chebyshev": lambda n, k: n * (k + 1),
    "legendre": lambda n, k: n * (k + 1),
    "gaussian": lambda n, k: 3 * n * (k + 1),
    "fourier": lambda n, k: 2 * n * (k + 1),
    "dense": lambda n, k: n,
}

BENCH_REPETITIONS = 30

# Syntax allowed in fit expressions: arithmetic, comparisons and calls of whitelisted names
EXPRESSION_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Compare, ast.IfExp, ast.Call, ast.Name, ast.Load,
    ast.Constant, ast.operator, ast.unaryop, ast.cmpop,
)


def param_count(decomposition, n, k):
    """Parameters one neuron needs to decompose n inputs at order k."""
    if decomposition not in DECOMPOSITIONS:
        raise ValueError(f"Unknown decomposition {decomposition!r}; expected one of {sorted(DECOMPOSITIONS)}")
    if n < 1 or k < 0:
        raise ValueError(f"Need n >= 1 and k >= 0, got n={n}, k={k}")
    return DECOMPOSITIONS[decomposition](int(n), int(k))


def network_param_count(sizes, k=None):
    """Parameters (biases included) of a stack with the given layer sizes; k=None for an MLP."""
    per_input = 1 if k is None else k + 1
    return int(sum(fan_in * per_input * fan_out + fan_out for fan_in, fan_out in zip(sizes[:-1], sizes[1:])))


def parity_hidden(hidden, n_features, n_classes, k):
    """Widen every MLP hidden layer by the same amount until the MLP has at least as many parameters."""
    target = network_param_count([n_features, *hidden, n_classes], k)
    extra = 0
    while True:
        widened = [h + extra for h in hidden]
        if network_param_count([n_features, *widened, n_classes]) >= target:
            return widened
        extra += 1


class PreparedSplit:
    """Scaled train/test matrices of one dataset split."""

    def __init__(self, dataset, train_fraction, seed):
        dataset.validate()
        self.dataset = dataset
        self.seed = seed
        self.train_fraction = train_fraction
        self.train_idx, self.test_idx = stratified_split_indices(dataset, train_fraction, seed)
        train = dataset.subset(self.train_idx)
        test = dataset.subset(self.test_idx)
        self.scaler = fit_scaler(train)
        self.X_train = apply_scaler(self.scaler, train.X)
        self.y_train = train.y
        self.X_test = apply_scaler(self.scaler, test.X)
        self.y_test = test.y
        if self.y_test.size == 0:
            raise ValueError(f"Dataset {dataset.name!r} is too small for a test split")


def _build(kind, config, split, rng):
    n_features = split.dataset.n_features
    n_classes = split.dataset.n_classes
    hidden = config.hidden
    if kind == RunResult.MODEL_MLP:
        if config.parity:
            hidden = parity_hidden(config.hidden, n_features, n_classes, config.k)
        return build_network(n_features, hidden, n_classes, kind="mlp", rng=rng)
    return build_network(n_features, hidden, n_classes, kind="cheby", k=config.k,
                         mode=config.mode, rng=rng, hidden_map=config.hidden_map)


def run_repeats(kind, config, split):
    """Train one architecture `repeats` times.

    Returns:
        tuple: (RunResult, best-repeat Network or None)
    """
    accuracies, f1_scores, failures = [], [], []
    best_net, best_acc = None, None
    n_params = 0
    start = time.perf_counter()
    for r in range(config.repeats):
        rng = np.random.default_rng(config.seed + r)
        net = _build(kind, config, split, rng)
        n_params = net.parameter_count()
        try:
            train_network(net, split.X_train, split.y_train, lr=config.lr, epochs=config.epochs,
                          batch_size=config.batch_size, rng=rng, optimizer=config.optimizer,
                          momentum=config.momentum)
        except TrainingDivergedError as e:
            RunLogger.log_repeat_failure(kind, r, str(e))
            accuracies.append(None)
            f1_scores.append(None)
            failures.append({"repeat": r, "reason": str(e)})
            continue
        acc, f1 = evaluate(net, split.X_test, split.y_test, split.dataset.n_classes)
        accuracies.append(acc)
        f1_scores.append(f1)
        if best_acc is None or acc > best_acc:
            best_acc, best_net = acc, net
        logger.debug(f"{kind} repeat {r}: accuracy {acc:.3f}, macro-F1 {f1:.3f}")
    wall_time = time.perf_counter() - start
    result = RunResult(kind, accuracies, f1_scores, failures, n_params, wall_time)
    logger.info(f"{split.dataset.name}: {result} in {wall_time:.2f}s")
    return result, best_net


@logged_operation("experiment")
def run_experiment(config, dataset):
    """Train MLP and Chebyshev networks on the same split and seed stream.

    Args:
        config: ExperimentConfig
        dataset: Dataset with raw (unscaled) features

    Returns:
        ComparisonResult: Both RunResults; diff = cheby best - mlp best
    """
    split = PreparedSplit(dataset, config.train_fraction, config.seed)
    RunLogger.log_event("experiment_config", {"dataset": dataset.name, "config": config.to_dict()})
    mlp, mlp_net = run_repeats(RunResult.MODEL_MLP, config, split)
    cheby, cheby_net = run_repeats(RunResult.MODEL_CHEBY, config, split)
    result = ComparisonResult(dataset.name, mlp, cheby, config,
                              networks={RunResult.MODEL_MLP: mlp_net, RunResult.MODEL_CHEBY: cheby_net},
                              scaler=split.scaler)
    logger.info(result.summary_line())
    return result


def compare_datasets(config, datasets):
    """run_experiment per dataset plus Chebyshev win/loss/tie counts."""
    results = [run_experiment(config, ds) for ds in datasets]
    tally = {"win": 0, "loss": 0, "tie": 0, "failed": 0}
    for result in results:
        tally[result.outcome() or "failed"] += 1
    return results, tally


def train_and_save(config, dataset, kind, path):
    """Best-of-repeats training of one architecture; the best repeat's network is saved to path."""
    split = PreparedSplit(dataset, config.train_fraction, config.seed)
    result, best = run_repeats(kind, config, split)
    if best is None:
        raise TrainingDivergedError(f"Every {kind} repeat diverged on {dataset.name!r}")
    metadata = {
        "kind": kind,
        "dataset": dataset.name,
        "split_seed": config.seed,
        "train_fraction": config.train_fraction,
        "best_repeat": result.best_repeat,
        "test_accuracy": result.best_accuracy,
        "config": config.to_dict(),
    }
    save_model(path, best, split.scaler, metadata)
    return result


def k_sweep(config, dataset, ks):
    """run_experiment at each distinct k (ascending).

    Returns:
        list: (k, ComparisonResult) pairs
    """
    if not ks:
        raise ValueError("k_sweep needs at least one k")
    unique = sorted(set(int(k) for k in ks))
    if len(unique) != len(ks):
        logger.warning(f"Duplicate k values removed: {list(ks)} -> {unique}")
    return [(k, run_experiment(config.copy(k=k), dataset)) for k in unique]


def sweep_rows(sweep):
    """Table rows (one per k) of the sweep's Chebyshev results next to the MLP baseline."""
    rows = []
    for k, result in sweep:
        rows.append({
            "k": k,
            "cheby_params": result.cheby.param_count,
            "cheby_best_accuracy": result.cheby.best_accuracy,
            "cheby_f1": result.cheby.f1_at_best,
            "mlp_params": result.mlp.param_count,
            "mlp_best_accuracy": result.mlp.best_accuracy,
            "mlp_f1": result.mlp.f1_at_best,
        })
    return rows


def _time_call(fn, repetitions, warmup):
    for _ in range(warmup):
        fn()
    start = time.perf_counter()
    for _ in range(repetitions):
        fn()
    return (time.perf_counter() - start) / repetitions


def bench_timing(feature_sizes, ks, hidden=(4, 2), n_classes=2, batch_size=64,
                 repetitions=BENCH_REPETITIONS, warmup=3, lr=0.001, seed=0):
    """Mean per-batch training-step and inference time for the MLP and each Chebyshev order.

    Returns:
        list: Rows (model, features, k, train_s_per_batch, infer_s_per_batch);
            k is None for the MLP
    """
    rows = []
    for n in feature_sizes:
        rng = np.random.default_rng(seed)
        X = rng.uniform(-1.0, 1.0, size=(batch_size, n))
        y = rng.integers(0, n_classes, size=batch_size)
        variants = [("mlp", None)] + [("cheby", k) for k in sorted(set(ks))]
        for kind, k in variants:
            net = build_network(n, list(hidden), n_classes, kind=kind, k=k or 0,
                                rng=np.random.default_rng(seed))
            params = net.parameters()
            opt = make_optimizer("adam", params, lr)
            train_s = _time_call(lambda: train_step(net, X, y, opt, params), repetitions, warmup)
            infer_s = _time_call(lambda: net.predict(X), repetitions, warmup)
            rows.append({
                "model": kind,
                "features": n,
                "k": k,
                "train_s_per_batch": train_s,
                "infer_s_per_batch": infer_s,
            })
            logger.info(f"bench {kind} n={n} k={k}: train {train_s:.3e}s, infer {infer_s:.3e}s")
    return rows


@logged_operation("prune")
def prune_run(model_path, dataset, strategy=PruneReport.STRATEGY_THRESHOLD, tau=None, percentiles=None,
              fine_tune_epochs=100, lr=None, tolerance=1.0, order=None, out_path=None):
    """Prune a saved model and fine-tune it on the training split it was trained with.

    With `tau` the given threshold is applied to every layer; otherwise the
    per-layer percentile sweep picks the point to report.

    Returns:
        tuple: (PruneReport, frontier rows)
    """
    net, scaler, metadata = load_model(model_path)
    seed = int(metadata.get("split_seed", 0))
    train_fraction = float(metadata.get("train_fraction", 0.8))
    settings = ExperimentConfig.from_dict(metadata.get("config") or {})
    lr = settings.lr if lr is None else lr

    split = PreparedSplit(dataset, train_fraction, seed)
    if scaler is not None:
        split.X_train = apply_scaler(scaler, dataset.subset(split.train_idx).X)
        split.X_test = apply_scaler(scaler, dataset.subset(split.test_idx).X)
    n_classes = dataset.n_classes

    def fine_tune(model, masks):
        history = train_network(model, split.X_train, split.y_train, lr=lr, epochs=fine_tune_epochs,
                                batch_size=settings.batch_size, rng=np.random.default_rng(seed),
                                optimizer=settings.optimizer, momentum=settings.momentum, masks=masks)
        return history[-1] if history else None

    def test_accuracy(model):
        return evaluate(model, split.X_test, split.y_test, n_classes)[0]

    if tau is not None:
        net, masks, report = forward_prune(net, tau, fine_tune, order, strategy, evaluate=test_accuracy)
        frontier = [report.to_dict()]
    else:
        net, masks, report, frontier = sweep_percentiles(
            net, percentiles or DEFAULT_PERCENTILES, fine_tune, test_accuracy, strategy, order, tolerance)

    if out_path:
        metadata = dict(metadata, pruned=report.to_dict())
        save_model(out_path, net, scaler, metadata)
    logger.info(report.summary_line(dataset.name))
    return report, frontier


def expression_sampler(expression, d):
    """Sampler for fit_tensor from an expression in x0..x{d-1} and numpy functions."""
    namespace = {name: getattr(np, name) for name in
                 ("sin", "cos", "tan", "exp", "log", "sqrt", "tanh", "abs", "pi", "e")}
    try:
        tree = ast.parse(expression, mode="eval")
    except SyntaxError as e:
        raise ValueError(f"Invalid expression {expression!r}: {e.msg}") from e
    allowed = set(namespace) | {f"x{i}" for i in range(d)}
    for node in ast.walk(tree):
        if not isinstance(node, EXPRESSION_NODES):
            raise ValueError(f"Unsupported syntax in expression: {type(node).__name__}")
        if isinstance(node, ast.Name) and node.id not in allowed:
            raise ValueError(f"Unknown name in expression: {node.id!r}")
        if isinstance(node, ast.Call) and (not isinstance(node.func, ast.Name) or node.keywords):
            raise ValueError("Only plain calls of numpy functions are allowed in expressions")
    code = compile(tree, "<expression>", "eval")

    def sample(points):
        scope = dict(namespace, **{f"x{i}": points[:, i] for i in range(d)})
        values = eval(code, {"__builtins__": {}}, scope)
        return np.broadcast_to(np.asarray(values, dtype=np.float64), (points.shape[0],)).copy()
    return sample


def fit_function(expression, d, order, pairwise=False, check_points=200, seed=0):
    """Fit a tensor or pairwise series to an expression and measure its error on random points."""
    sample = expression_sampler(expression, d)
    if pairwise:
        model = fit_pairwise(sample, d, order)
        evaluator = lambda pts: eval_pairwise(model, pts)
    else:
        model = fit_tensor(sample, [order] * d)
        evaluator = lambda pts: eval_tensor(model, pts)
    points = np.random.default_rng(seed).uniform(-1.0, 1.0, size=(check_points, d))
    error = float(np.max(np.abs(evaluator(points) - sample(points))))
    return {"expression": expression, "pairwise": pairwise, "model": model.to_dict(), "max_abs_error": error}


def results_document(command, payload):
    """Versioned results document; contains nothing that varies between identical runs."""
    return {
        "schema_version": RESULTS_SCHEMA_VERSION,
        "command": command,
        "environment": environment_stamp(),
        "results": payload,
    }


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def write_results(path, document):
    """Write a results document as sorted-key JSON."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2, sort_keys=True, default=_jsonable)
        f.write("\n")
    RunLogger.log_event("results_written", {"path": path})
    return path
