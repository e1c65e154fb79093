# -*- coding: utf-8 -*-
# vim:fenc=utf-8
#
# Copyright (C) 2025 TU Dresden
#
# Distributed under terms of the MIT license.

"""Run configuration"""

import argparse
import copy
import hashlib
import json
import pprint
import typing

import yaml


DEFAULTS: dict[str, typing.Any] = {
    "seed": 7,
    "catalog": {
        "n_items": 1000,
        "n_buckets": 5,
        "n_latent": 8,
        "feature_noise": 0.3,
        "price_log_mean": 3.5,
        "price_log_sigma": 1.0,
    },
    "intents": {
        # None means uniform over the catalog's price buckets
        "segment_mix": None,
        "depth_base": 1.0,
        "depth_slope": 1.0,
        "resolve_base": 0.6,
        "resolve_decay": 0.75,
        "query_noise": 0.35,
        "price_hint_noise": 0.25,
    },
    "click_model": {
        "examination_exponent": 1.0,
        "relevance_sharpness": 6.0,
        "affinity_offset": 0.6,
        "price_sensitivity": 1.0,
        "bargain_appeal": 1.5,
        "fit_sensitivity": 4.0,
        "purchase_threshold": 0.5,
    },
    "simulation": {
        "n_sessions": 50000,
        "n_heldout_sessions": 20000,
        "n_candidates": 25,
        "page_size": 10,
        "retrieval_noise": 0.3,
        "max_queries": None,
        "logging_policy": "oracle-noisy",
        "logging_noise": 0.3,
        "common_random_numbers": False,
    },
    "rewards": {},
    "training": {
        "scorer": "linear",
        "hidden_width": 16,
        "learning_rate": 0.5,
        "epochs": 20,
        "minibatch_size": 256,
        "l2_penalty": 1e-4,
        "delta_refresh": "per_minibatch",
        "negatives_per_context": 3,
        "pointwise": False,
    },
    "evaluation": {
        "n_bootstrap": 1000,
        "confidence": 0.95,
        "alpha_grid": [round(0.1 * i, 1) for i in range(11)],
        "n_ab_sessions": 20000,
    },
    "output": {
        "directory": ".",
    },
}


class ConfigError(ValueError):
    """Raised when a configuration value is invalid."""


class _Singleton(type):
    """Singleton meta class.

    see https://stackoverflow.com/q/6760685
    """

    _instances: dict[typing.Type["_Singleton"], "_Singleton"] = {}

    def __call__(cls, *args, **kwargs):
        if cls not in cls._instances:
            cls._instances[cls] = super(_Singleton, cls).__call__(*args, **kwargs)
        return cls._instances[cls]


class Config(metaclass=_Singleton):
    """Singleton Config mapping class to represent embedded defaults, config
    file and CLI argument configuration.

    Values are organized in sections. Adding a mapping for an existing
    section updates the keys of that section instead of replacing it.
    """

    def __init__(self):
        self._sections = {}

    def __str__(self):
        return pprint.pformat(self._sections)

    def __repr__(self):
        return f"<{type(self).__name__}: {self._sections}>"

    def __len__(self):
        return len(self._sections)

    def __contains__(self, key: str) -> bool:
        return key in self._sections

    def __getitem__(self, key: str) -> typing.Any:
        return self._sections[key]

    def get(self, section: str, default=None) -> typing.Any:
        """Get configuration section.

        :param key: Name of the configuration section.
        :type key: str
        :param default: (Optional) default if section does not exist.
        """
        return self._sections.get(section, default)

    def add_config(self, config: typing.Mapping):
        """Adds configuration from a mapping

        :param config: A mapping that contains the new configuration sections.
        :type config: :py:class:`typing.Mapping`.
        """
        for key, value in config.items():
            current = self._sections.get(key)
            if isinstance(current, dict) and isinstance(value, typing.Mapping):
                merged = dict(current)
                merged.update(value)
                self._sections[key] = merged
            else:
                self._sections[key] = copy.deepcopy(value)

    def add_defaults(self):
        """Adds the embedded :py:data:`DEFAULTS`."""
        self.add_config(copy.deepcopy(DEFAULTS))

    def add_yaml_config(self, yaml_file):
        """Adds configuration from a YAML file

        :param yaml: A file-like object to a YAML file.
        :type yaml: A file-like object.
        """
        content = yaml.safe_load(yaml_file)
        if content is None:
            return
        if not isinstance(content, typing.Mapping):
            raise ConfigError("Config file must contain a mapping of sections")
        self.add_config(content)

    def add_args_config(self, args):
        """Adds configuration from CLI arguments

        :param args: parsed CLI arguments.
        :type args: :py:class:`argparse.Namespace`
        """
        self.add_config(
            {
                k: vars(v) if isinstance(v, argparse.Namespace) else v
                for k, v in vars(args).items()
                if v is not None
            }
        )

    def as_dict(self) -> dict:
        """Returns a deep copy of all sections."""
        return copy.deepcopy(self._sections)

    def hash(self) -> str:
        """SHA-256 over the canonical JSON encoding of the configuration.

        :returns: Hex digest that changes whenever any field changes.
        """
        canonical = json.dumps(self._sections, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def dump(self) -> str:
        """Dumps the configuration as YAML.

        :returns: YAML document with one mapping per section.
        """
        return yaml.safe_dump(self._sections, sort_keys=False)

    def validate(self):
        """Checks the values :py:mod:`valuerank` relies on.

        :raises ConfigError: naming the first offending section and key.
        """
        seed = self.get("seed")
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError("seed: an integer seed is mandatory")
        for name, default in DEFAULTS.items():
            section = self.get(name)
            if not isinstance(default, dict) or name == "rewards" or section is None:
                continue
            if not isinstance(section, dict):
                raise ConfigError(f"{name}: must be a mapping")
            unknown = sorted(set(section) - set(default))
            if unknown:
                raise ConfigError(f"{name}: unknown keys {', '.join(unknown)}")
        catalog = self.get("catalog", {})
        n_items = catalog.get("n_items", 0)
        n_buckets = catalog.get("n_buckets", 0)
        if not n_items >= n_buckets >= 1:
            raise ConfigError(
                f"catalog: need n_items >= n_buckets >= 1, got "
                f"n_items={n_items}, n_buckets={n_buckets}"
            )
        mix = self.get("intents", {}).get("segment_mix")
        if mix is not None:
            check_segment_mix(mix, n_buckets)
        simulation = self.get("simulation", {})
        if not 1 <= simulation.get("page_size", 1) <= simulation.get(
            "n_candidates", 1
        ):
            raise ConfigError("simulation: need 1 <= page_size <= n_candidates")
        for key in ("n_sessions", "n_heldout_sessions"):
            if simulation.get(key, 0) < 0:
                raise ConfigError(f"simulation: {key} must not be negative")
        training = self.get("training", {})
        if training.get("delta_refresh", "per_minibatch") not in (
            "per_minibatch",
            "per_epoch",
        ):
            raise ConfigError(
                "training: delta_refresh must be per_minibatch or per_epoch"
            )
        for key in ("learning_rate", "epochs", "minibatch_size"):
            if training.get(key, 1) <= 0:
                raise ConfigError(f"training: {key} must be positive")


def check_segment_mix(mix: typing.Sequence[float], n_buckets: int):
    """Checks that ``mix`` is a probability vector over ``n_buckets`` buckets.

    :raises ConfigError: if length, sign or normalization do not fit.
    """
    if len(mix) != n_buckets:
        raise ConfigError(
            f"intents: segment_mix has {len(mix)} entries for {n_buckets} buckets"
        )
    if any(p < 0 for p in mix) or abs(sum(mix) - 1.0) > 1e-9:
        raise ConfigError(f"intents: segment_mix {list(mix)} is not normalized")
