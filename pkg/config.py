import copy
import json
import logging
import os

logger = logging.getLogger(__name__)


class Config:
    """Configuration manager for the Chebyshev network experiment harness."""

    DEFAULT_CONFIG = {
        "experiment": {
            "hidden": [4, 2],
            "lr": 0.001,
            "epochs": 500,
            "repeats": 10,
            "k": 3,
            "mode": "weight",  # 'weight' or 'expansion'
            "hidden_map": "squash",
            "seed": 0,
            "train_fraction": 0.8,
            "batch_size": None,  # None = full batch
            "optimizer": "adam",
            "momentum": 0.0,
        },
        "logging": {
            "level": "INFO",
            "log_file": None,
        },
        "prune": {
            "strategy": "threshold",
            "percentiles": [50, 70, 80, 90],
            "fine_tune_epochs": 100,
            "tolerance": 1.0,
        },
        "bench": {
            "features": [10, 30, 90],
            "ks": [0, 2, 4, 8],
            "batch_size": 64,
            "repetitions": 30,
            "warmup": 3,
        },
        "output_dir": "results",
    }

    CONFIG_FILE = "config.json"

    @classmethod
    def _merge(cls, loaded):
        config = copy.deepcopy(cls.DEFAULT_CONFIG)
        for key, value in (loaded or {}).items():
            if isinstance(config.get(key), dict) and isinstance(value, dict):
                config[key].update(value)
            else:
                config[key] = value
        return config

    @classmethod
    def load_config(cls, path=None):
        """Load configuration from file merged over the defaults.

        A missing file gives the defaults; an unreadable one is logged and
        also gives the defaults.
        """
        path = path or cls.CONFIG_FILE
        try:
            if os.path.exists(path):
                with open(path, 'r', encoding='utf-8') as f:
                    loaded = json.load(f)
                if not isinstance(loaded, dict):
                    raise ValueError("top level must be a JSON object")
                return cls._merge(loaded)
            return copy.deepcopy(cls.DEFAULT_CONFIG)
        except (OSError, ValueError) as e:
            logger.error(f"Error loading config {path}: {e}")
            return copy.deepcopy(cls.DEFAULT_CONFIG)

    @classmethod
    def save_config(cls, config, path=None):
        """Save configuration to file."""
        path = path or cls.CONFIG_FILE
        try:
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(config, f, indent=4)
            return True
        except OSError as e:
            logger.error(f"Error saving config {path}: {e}")
            return False

    @classmethod
    def get_config(cls, path=None):
        """Get the current configuration."""
        return cls.load_config(path)

    @classmethod
    def update_config(cls, updates, path=None):
        """Merge updates into the stored configuration and save it."""
        config = cls.load_config(path)
        for key, value in updates.items():
            if isinstance(config.get(key), dict) and isinstance(value, dict):
                config[key].update(value)
            else:
                config[key] = value
        return cls.save_config(config, path)

    @classmethod
    def get_experiment_defaults(cls, path=None):
        return cls.load_config(path)["experiment"]

    @classmethod
    def get_logging_settings(cls, path=None):
        return cls.load_config(path)["logging"]

    @classmethod
    def get_prune_settings(cls, path=None):
        return cls.load_config(path)["prune"]

    @classmethod
    def get_bench_settings(cls, path=None):
        return cls.load_config(path)["bench"]

    @classmethod
    def get_output_dir(cls, path=None):
        return cls.load_config(path).get("output_dir") or "results"
