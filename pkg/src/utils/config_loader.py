"""
Configuration loader for MKMed
"""

import copy
import hashlib
import json
import os
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple

import yaml
from dotenv import load_dotenv

from .errors import ConfigError

DEFAULT_CONFIG_PATH = Path(__file__).parent.parent.parent / "config" / "default_config.yaml"

MODALITIES = ("image", "text", "structure", "props", "kg")


def _positive_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v >= 1


def _nonneg_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v >= 0


def _unit(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and 0.0 <= v <= 1.0


def _positive_float(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0


def _nonneg_float(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and v >= 0


def _one_of(*choices):
    return lambda v: v in choices


def _int_list(v):
    return isinstance(v, list) and len(v) > 0 and all(_positive_int(x) or x == 0 for x in v)


# dotted key -> (validator, human-readable range)
SCHEMA: Dict[str, Tuple[Callable[[Any], bool], str]] = {
    "seed": (_nonneg_int, "integer >= 0"),
    "data_path": (lambda v: isinstance(v, str), "path"),
    "results_path": (lambda v: isinstance(v, str), "path"),
    "logs_path": (lambda v: isinstance(v, str), "path"),
    "model.dim": (_positive_int, "integer >= 1"),
    "model.gin_layers": (_positive_int, "integer >= 1"),
    "model.vit_patch": (_positive_int, "integer >= 1"),
    "model.vit_layers": (_positive_int, "integer >= 1"),
    "model.vit_heads": (_positive_int, "integer >= 1"),
    "model.text_layers": (_positive_int, "integer >= 1"),
    "model.text_heads": (_positive_int, "integer >= 1"),
    "model.image_size": (lambda v: _positive_int(v) and v >= 16, "integer >= 16"),
    "model.gvp_layers": (_positive_int, "integer >= 1"),
    "model.gvp_node_scalar": (_positive_int, "integer >= 1"),
    "model.gvp_node_vector": (_positive_int, "integer >= 1"),
    "model.gvp_edge_scalar": (_positive_int, "integer >= 1"),
    "model.gvp_edge_vector": (_positive_int, "integer >= 1"),
    "model.gvp_rbf": (_positive_int, "integer >= 1"),
    "model.gru_hidden": (_positive_int, "integer >= 1"),
    "model.mlp_hidden": (_positive_int, "integer >= 1"),
    "pretrain.epochs": (_nonneg_int, "integer >= 0"),
    "pretrain.lr": (_positive_float, "float > 0"),
    "pretrain.batch_size": (lambda v: _positive_int(v) and v >= 2, "integer >= 2"),
    "pretrain.mode": (_one_of("rotating", "intersection"), "rotating | intersection"),
    "pretrain.modalities": (
        lambda v: isinstance(v, list) and len(set(v)) == len(v) and all(m in MODALITIES for m in v),
        f"unique subset of {list(MODALITIES)}"
    ),
    "pretrain.modality_encoders": (_one_of("active", "frozen"), "active | frozen"),
    "pretrain.init_log_temperature": (lambda v: isinstance(v, (int, float)), "float"),
    "pretrain.transe_epochs": (_nonneg_int, "integer >= 0"),
    "pretrain.transe_lr": (_positive_float, "float > 0"),
    "train.epochs": (_nonneg_int, "integer >= 0"),
    "train.lr": (_positive_float, "float > 0"),
    "train.weight_decay": (_nonneg_float, "float >= 0"),
    "train.batch_patients": (_positive_int, "integer >= 1"),
    "train.finetune_cross_modal": (lambda v: isinstance(v, bool), "boolean"),
    "loss.delta": (_unit, "[0, 1]"),
    "loss.beta": (_unit, "[0, 1]"),
    "loss.gamma": (_unit, "[0, 1]"),
    "loss.ddi_target": (_unit, "[0, 1]"),
    "loss.controller": (lambda v: isinstance(v, bool), "boolean"),
    "loss.kappa": (_positive_float, "float > 0"),
    "eval.bootstrap": (_positive_int, "integer >= 1"),
    "eval.ddi_mode": (_one_of("standard", "paper-literal", "truth-pairs"), "standard | paper-literal | truth-pairs"),
    "experiment.seeds": (_int_list, "non-empty list of integers >= 0"),
    "experiment.dims": (_int_list, "non-empty list of integers"),
    "experiment.depths": (_int_list, "non-empty list of integers"),
    "logging.level": (_one_of("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR"), "log level"),
}

MANDATORY_KEYS = ("loss.gamma",)


def _flatten(tree: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat = {}
    for key, value in tree.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, dotted + "."))
        else:
            flat[dotted] = value
    return flat


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _read_yaml(path: Path) -> Dict[str, Any]:
    try:
        with open(path, 'r') as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" (line {mark.line + 1})" if mark is not None else ""
        raise ConfigError(f"{path}: malformed YAML{where}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


class Config:
    """Configuration manager for MKMed"""

    def __init__(self, config_path: Optional[str] = None, apply_env: bool = True):
        """
        Load configuration from YAML file and environment variables

        The packaged defaults are loaded first and the user file is merged on top.
        Unknown keys and out-of-range values raise ConfigError.

        Args:
            config_path: Path to config YAML file (default: config/default_config.yaml)
            apply_env: Apply MKMED_* environment overrides
        """
        load_dotenv()

        defaults = _read_yaml(DEFAULT_CONFIG_PATH)
        if config_path is None:
            user = defaults
            self.source = str(DEFAULT_CONFIG_PATH)
        else:
            user = _read_yaml(Path(config_path))
            self.source = str(config_path)

        self._check_keys(user)
        user_flat = _flatten(user)
        for key in MANDATORY_KEYS:
            if key not in user_flat:
                raise ConfigError(f"{self.source}: mandatory key '{key}' is not stated")

        self._config = _merge(defaults, user)

        if apply_env:
            self._apply_env_overrides()

        self.validate()

    def _check_keys(self, tree: Dict[str, Any]):
        for key in _flatten(tree):
            if key not in SCHEMA:
                raise ConfigError(f"{self.source}: unknown key '{key}'")

    def _apply_env_overrides(self):
        """Apply environment variable overrides to config"""
        if os.getenv("MKMED_DATA_PATH"):
            self._config["data_path"] = os.getenv("MKMED_DATA_PATH")
        if os.getenv("MKMED_RESULTS_PATH"):
            self._config["results_path"] = os.getenv("MKMED_RESULTS_PATH")
        if os.getenv("MKMED_LOGS_PATH"):
            self._config["logs_path"] = os.getenv("MKMED_LOGS_PATH")

    def validate(self):
        """Check every key against the schema; raise ConfigError on the first violation"""
        flat = _flatten(self._config)
        for key, value in flat.items():
            if key not in SCHEMA:
                raise ConfigError(f"{self.source}: unknown key '{key}'")
            check, expected = SCHEMA[key]
            if not check(value):
                raise ConfigError(f"{self.source}: '{key}' = {value!r} is outside {expected}")
        missing = [k for k in SCHEMA if k not in flat]
        if missing:
            raise ConfigError(f"{self.source}: missing keys {missing}")

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get configuration value by dot-separated key

        Args:
            key: Configuration key (e.g., 'pretrain.epochs')
            default: Default value if key not found

        Returns:
            Configuration value
        """
        keys = key.split('.')
        value = self._config

        for k in keys:
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default

        return value

    def set(self, key: str, value: Any):
        """
        Set configuration value by dot-separated key

        Args:
            key: Configuration key
            value: Value to set
        """
        if key not in SCHEMA:
            raise ConfigError(f"unknown key '{key}'")
        keys = key.split('.')
        config = self._config

        for k in keys[:-1]:
            if k not in config:
                config[k] = {}
            config = config[k]

        config[keys[-1]] = value
        self.validate()

    def copy(self) -> 'Config':
        """Deep copy, used by experiment drivers that vary one key at a time"""
        clone = Config.__new__(Config)
        clone.source = self.source
        clone._config = copy.deepcopy(self._config)
        return clone

    @property
    def raw(self) -> Dict[str, Any]:
        """Get raw configuration dictionary"""
        return self._config

    def config_hash(self) -> str:
        """sha256 over the canonical JSON of the configuration"""
        canonical = json.dumps(self._config, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def save(self, path: str):
        """
        Save configuration to YAML file

        Args:
            path: Output file path
        """
        with open(path, 'w') as f:
            yaml.dump(self._config, f, default_flow_style=False)


def load_config(config_path: Optional[str] = None) -> Config:
    """
    Load configuration

    Args:
        config_path: Path to config file

    Returns:
        Config instance
    """
    return Config(config_path)


def thread_cap() -> Optional[int]:
    """Value of MKMED_THREADS, or None when unset"""
    raw = os.getenv("MKMED_THREADS")
    if not raw:
        return None
    try:
        value = int(raw)
    except ValueError as e:
        raise ConfigError(f"MKMED_THREADS must be an integer, got {raw!r}") from e
    if value < 1:
        raise ConfigError(f"MKMED_THREADS must be >= 1, got {value}")
    return value
