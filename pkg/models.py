import logging

import numpy as np

logger = logging.getLogger(__name__)


class ExperimentConfig:
    """Settings for one comparison protocol run."""

    MODE_WEIGHT = "weight"
    MODE_EXPANSION = "expansion"

    DEFAULTS = {
        "hidden": [4, 2],
        "lr": 0.001,
        "epochs": 500,
        "repeats": 10,
        "k": 3,
        "mode": "weight",
        "hidden_map": "squash",
        "seed": 0,
        "train_fraction": 0.8,
        "batch_size": None,
        "optimizer": "adam",
        "momentum": 0.0,
        "parity": False,
    }

    def __init__(self, **kwargs):
        unknown = set(kwargs) - set(self.DEFAULTS)
        if unknown:
            raise ValueError(f"Unknown experiment setting(s): {sorted(unknown)}")
        for key, default in self.DEFAULTS.items():
            value = kwargs.get(key, default)
            setattr(self, key, list(value) if isinstance(value, (list, tuple)) else value)
        self.validate()

    def validate(self):
        """Check ranges; raises ValueError naming the offending field."""
        if not self.hidden or any(int(h) < 1 for h in self.hidden):
            raise ValueError(f"hidden: every layer width must be positive, got {self.hidden}")
        for field in ("epochs", "repeats"):
            if int(getattr(self, field)) < 1:
                raise ValueError(f"{field}: must be positive, got {getattr(self, field)}")
        if not self.lr > 0:
            raise ValueError(f"lr: must be positive, got {self.lr}")
        if int(self.k) < 0:
            raise ValueError(f"k: must be >= 0, got {self.k}")
        if self.mode not in (self.MODE_WEIGHT, self.MODE_EXPANSION):
            raise ValueError(f"mode: expected 'weight' or 'expansion', got {self.mode!r}")
        if self.hidden_map not in ("identity", "clamp", "squash"):
            raise ValueError(f"hidden_map: expected identity, clamp or squash, got {self.hidden_map!r}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction: must lie in (0, 1), got {self.train_fraction}")
        if self.batch_size is not None and int(self.batch_size) < 1:
            raise ValueError(f"batch_size: must be positive, got {self.batch_size}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer: expected 'adam' or 'sgd', got {self.optimizer!r}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum: must lie in [0, 1), got {self.momentum}")
        return self

    def to_dict(self):
        return {key: (list(getattr(self, key)) if key == "hidden" else getattr(self, key)) for key in self.DEFAULTS}

    @classmethod
    def from_dict(cls, values, **overrides):
        """Build from a config section; keys it does not know are ignored with a warning."""
        merged = {}
        for key, value in (values or {}).items():
            if key in cls.DEFAULTS:
                merged[key] = value
            else:
                logger.warning(f"Ignoring unknown experiment setting {key!r}")
        merged.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**merged)

    def copy(self, **changes):
        values = self.to_dict()
        values.update(changes)
        return ExperimentConfig(**values)

    def __str__(self):
        return (f"hidden={self.hidden} k={self.k} mode={self.mode} lr={self.lr} "
                f"epochs={self.epochs} repeats={self.repeats} seed={self.seed}")


class RunResult:
    """Per-repeat test metrics of one architecture under the best-of protocol."""

    MODEL_MLP = "mlp"
    MODEL_CHEBY = "cheby"

    def __init__(self, model, accuracies, f1_scores, failures=None, param_count=0, wall_time=None):
        self.model = model
        self.accuracies = list(accuracies)  # None marks a failed repeat
        self.f1_scores = list(f1_scores)
        self.failures = list(failures or [])
        self.param_count = int(param_count)
        self.wall_time = wall_time

    def successful(self):
        return [(r, a) for r, a in enumerate(self.accuracies) if a is not None]

    @property
    def best_repeat(self):
        ok = self.successful()
        if not ok:
            return None
        # first repeat reaching the maximum
        return max(ok, key=lambda item: (item[1], -item[0]))[0]

    @property
    def best_accuracy(self):
        r = self.best_repeat
        return None if r is None else self.accuracies[r]

    @property
    def f1_at_best(self):
        r = self.best_repeat
        return None if r is None else self.f1_scores[r]

    @property
    def mean_accuracy(self):
        ok = [a for _, a in self.successful()]
        return float(np.mean(ok)) if ok else None

    @property
    def std_accuracy(self):
        ok = [a for _, a in self.successful()]
        return float(np.std(ok)) if ok else None

    def to_dict(self, include_timings=False):
        doc = {
            "model": self.model,
            "per_repeat_accuracy": self.accuracies,
            "per_repeat_f1": self.f1_scores,
            "failed_repeats": self.failures,
            "best_accuracy": self.best_accuracy,
            "best_repeat": self.best_repeat,
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "f1_at_best": self.f1_at_best,
            "param_count": self.param_count,
        }
        if include_timings:
            doc["wall_time_s"] = self.wall_time
        return doc

    def __str__(self):
        best = "n/a" if self.best_accuracy is None else f"{self.best_accuracy:.2f}"
        return f"{self.model}: best {best} over {len(self.successful())}/{len(self.accuracies)} repeats"


class ComparisonResult:
    """MLP vs Chebyshev outcome on one dataset."""

    def __init__(self, dataset, mlp, cheby, config, networks=None, scaler=None):
        self.dataset = dataset
        self.mlp = mlp
        self.cheby = cheby
        self.config = config
        # best-repeat networks keyed by model name, and the scaler they were trained with
        self.networks = networks or {}
        self.scaler = scaler

    @property
    def diff(self):
        if self.mlp.best_accuracy is None or self.cheby.best_accuracy is None:
            return None
        return self.cheby.best_accuracy - self.mlp.best_accuracy

    def outcome(self):
        """'win', 'loss' or 'tie' for the Chebyshev model; None if either side failed."""
        if self.diff is None:
            return None
        if self.diff > 0:
            return "win"
        return "loss" if self.diff < 0 else "tie"

    def summary_line(self):
        def fmt(value, digits):
            return "n/a" if value is None else f"{value:.{digits}f}"
        return (f"{self.dataset}: cheby {fmt(self.cheby.best_accuracy, 2)}, "
                f"mlp {fmt(self.mlp.best_accuracy, 2)}, diff {fmt(self.diff, 3)}")

    def to_dict(self, include_timings=False):
        return {
            "dataset": self.dataset,
            "config": self.config.to_dict(),
            "mlp": self.mlp.to_dict(include_timings),
            "cheby": self.cheby.to_dict(include_timings),
            "diff": self.diff,
            "outcome": self.outcome(),
        }


class PruneReport:
    """Compression and accuracy outcome of a pruning run."""

    STRATEGY_THRESHOLD = "threshold"
    STRATEGY_GROUP = "group"

    def __init__(self, strategy, taus, per_layer, accuracy_before=None, accuracy_after=None, percentile=None):
        self.strategy = strategy
        self.taus = list(taus)
        self.per_layer = list(per_layer)
        self.accuracy_before = accuracy_before
        self.accuracy_after = accuracy_after
        self.percentile = percentile

    @property
    def total(self):
        return int(sum(row["total"] for row in self.per_layer))

    @property
    def zeroed(self):
        return int(sum(row["zeroed"] for row in self.per_layer))

    @property
    def compression(self):
        return 100.0 * self.zeroed / self.total if self.total else 0.0

    def to_dict(self):
        return {
            "strategy": self.strategy,
            "percentile": self.percentile,
            "taus": self.taus,
            "total_parameters": self.total,
            "zeroed_parameters": self.zeroed,
            "compression": self.compression,
            "per_layer": self.per_layer,
            "accuracy_before": self.accuracy_before,
            "accuracy_after": self.accuracy_after,
        }

    def summary_line(self, dataset, baseline_label="unpruned", baseline=None):
        baseline = self.accuracy_before if baseline is None else baseline

        def fmt(value):
            return "n/a" if value is None else f"{value:.3f}"
        return (f"{dataset}: {baseline_label} {fmt(baseline)}, pruned-cheby {fmt(self.accuracy_after)}, "
                f"compression {self.compression:.1f}")

    def __str__(self):
        return f"{self.strategy} prune: {self.zeroed}/{self.total} zeroed ({self.compression:.1f}%)"
