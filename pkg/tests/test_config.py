#! /usr/bin/env python
# -*- coding: utf-8 -*-
# vim:fenc=utf-8
#
# Copyright (C) 2025 TU Dresden
#
# Distributed under terms of the MIT license.

import argparse
import io
import pprint

import pytest
import yaml

from valuerank.config import DEFAULTS, Config, ConfigError, check_segment_mix

from .fixtures import config


def test_config__empty(config):
    assert not config
    assert "test" not in config
    with pytest.raises(KeyError):
        assert config["test"]
    assert config.get("test") is None
    assert config.get("test", "foobar") == "foobar"
    assert str(config) == "{}"
    assert repr(config) == "<Config: {}>"


def test_config__add_config(config):
    conf2 = Config()  # also test singleton/borg behavior here
    assert not config
    assert not conf2
    config.add_config({"test": "foobar"})
    assert "test" in config
    assert "test" in conf2
    assert config["test"] == "foobar"
    assert conf2.get("test") == "foobar"
    assert str(conf2) == pprint.pformat({"test": "foobar"})


def test_config__add_config_merges_sections(config):
    config.add_defaults()
    config.add_config({"catalog": {"n_items": 10}})
    assert config["catalog"]["n_items"] == 10
    assert config["catalog"]["n_buckets"] == DEFAULTS["catalog"]["n_buckets"]
    assert DEFAULTS["catalog"]["n_items"] == 1000


def test_config__add_yaml_config(config):
    yaml_file = io.StringIO("test: foobar\n")
    config.add_yaml_config(yaml_file)
    assert config["test"] == "foobar"


def test_config__add_yaml_config_empty(config):
    config.add_yaml_config(io.StringIO(""))
    assert not config


def test_config__add_yaml_config_no_mapping(config):
    with pytest.raises(ConfigError):
        config.add_yaml_config(io.StringIO("- a\n- b\n"))


def test_config__add_args_config(config):
    args = argparse.Namespace(
        test="foobar", a_namespace=argparse.Namespace(snafu=42), nothing=None
    )
    config.add_args_config(args)
    assert config["test"] == "foobar"
    assert config["a_namespace"] == {"snafu": 42}
    assert "nothing" not in config


def test_config__dump(config):
    config.add_defaults()
    assert yaml.safe_load(config.dump()) == config.as_dict()


def test_config__hash(config):
    config.add_defaults()
    digest = config.hash()
    assert len(digest) == 64
    assert config.hash() == digest
    config.add_config({"click_model": {"examination_exponent": 1.5}})
    assert config.hash() != digest


def test_config__validate_defaults(config):
    config.add_defaults()
    config.validate()


@pytest.mark.parametrize(
    "override",
    [
        {"seed": None},
        {"seed": "7"},
        {"catalog": {"n_items": 3, "n_buckets": 5}},
        {"catalog": {"n_buckets": 0}},
        {"intents": {"segment_mix": [0.5, 0.5]}},
        {"simulation": {"page_size": 30}},
        {"simulation": {"n_sessions": -1}},
        {"training": {"delta_refresh": "never"}},
        {"training": {"epochs": 0}},
        {"catalog": {"n_itmes": 10}},
    ],
)
def test_config__validate_error(config, override):
    config.add_defaults()
    config.add_config(override)
    with pytest.raises(ConfigError):
        config.validate()


def test_check_segment_mix():
    check_segment_mix([0.2] * 5, 5)
    with pytest.raises(ConfigError):
        check_segment_mix([0.2] * 4, 5)
    with pytest.raises(ConfigError):
        check_segment_mix([0.5, 0.5, 0.5], 3)
    with pytest.raises(ConfigError):
        check_segment_mix([1.5, -0.5], 2)
