#! /usr/bin/env python
# -*- coding: utf-8 -*-
# vim:fenc=utf-8
#
# Copyright (C) 2025 TU Dresden
#
# Distributed under terms of the MIT license.

"""Simulate, train, evaluate and AB-test value-weighted ranking policies."""

import argparse
import json
import logging
import os
import sys
import typing

import pandas as pd  # type: ignore

from valuerank import eval as eval_
from valuerank import logs
from valuerank import policy
from valuerank import reward
from valuerank import sim
from valuerank.config import Config


logger = logging.getLogger(__name__)

SESSIONS = "sessions.jsonl"
HELDOUT = "heldout.jsonl"
GROUND_TRUTH = "ground_truth.json"
MANIFEST = "manifest.json"
PROPENSITY = "propensity.json"


def loglevel(value):
    """Type function to set the log level via command-line.

    :param value: either a name for a log level or their numeric representation
                  (as string).
    :type: str
    :returns: The (integer) log level.
    """
    if value.isdigit():
        level = int(value)
        if logging.getLevelName(level).startswith("Level "):
            raise ValueError(f'Invalid log level "{value}"')
    else:
        level = logging.getLevelName(value.upper())
        if isinstance(level, str):
            raise ValueError(f'Invalid log level "{value}"')
    logging.basicConfig(level=level)
    return level


def alpha_grid(value):
    """Type function for ``--alpha-grid``: comma-separated floats."""
    return eval_.check_alphas(float(a) for a in value.split(","))


def build_argparser():
    """Build argument parser for the ``valuerank`` CLI command."""
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "-v", "--verbosity", type=loglevel, default="WARNING", help="Sets the log level"
    )
    parser.add_argument(
        "-C",
        "--config",
        type=argparse.FileType("r", encoding="utf-8"),
        help="Config YAML file",
    )
    parser.add_argument("--seed", type=int, default=None, help="Master seed")
    parser.add_argument("--out", default=None, help="Output directory")
    parser.add_argument(
        "--threads", type=int, default=1, help="Maximum number of worker threads"
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("simulate", help="Simulate training and held-out logs")
    fit = commands.add_parser(
        "fit-propensity", help="Fit examination propensities from randomized logs"
    )
    fit.add_argument("--log", default=None, help="Randomized log (JSONL)")
    train = commands.add_parser("train", help="Train a policy under a reward spec")
    train.add_argument("--spec", required=True, help="Reward spec name")
    train.add_argument("--log", default=None, help="Training log (JSONL)")
    train.add_argument("--propensity", default=None, help="Fitted propensity JSON")
    evaluate = commands.add_parser("eval", help="Counterfactual evaluation")
    evaluate.add_argument("--spec", required=True, help="Reward spec name")
    evaluate.add_argument("--model", required=True, help="Model JSON to evaluate")
    evaluate.add_argument("--baseline", default=None, help="Baseline model JSON")
    evaluate.add_argument(
        "--eval-set",
        default=None,
        help="Prebuilt eval dataset instead of held-out logs",
    )
    evaluate.add_argument("--propensity", default=None, help="Fitted propensity JSON")
    abtest = commands.add_parser("abtest", help="Simulated AB test of two policies")
    abtest.add_argument(
        "--model", required=True, help="Treatment: model JSON or random|oracle"
    )
    abtest.add_argument(
        "--baseline", required=True, help="Control: model JSON or random|oracle"
    )
    sweep = commands.add_parser("sweep", help="Counterfactual alpha sweep")
    sweep.add_argument(
        "--acquisition", default=None, help="Acquisition model JSON (alpha = 0)"
    )
    sweep.add_argument(
        "--engagement", default=None, help="Engagement model JSON (alpha = 1)"
    )
    sweep.add_argument("--alpha-grid", type=alpha_grid, default=None)
    sweep.add_argument("--propensity", default=None, help="Fitted propensity JSON")
    commands.add_parser("print-config", help="Print the effective configuration")
    return parser


def get_config(args, pre_config: typing.Optional[typing.Mapping] = None):
    """Get :py:class:`valuerank.config.Config` object from embedded defaults,
    the configuration file and CLI arguments (CLI arguments take precedence
    over file configuration).

    :param args: Parsed CLI arguments.
    :type args: :py:class:`argparse.Namespace`
    """
    config = Config()
    config.add_defaults()
    if pre_config is not None:
        config.add_config(pre_config)
    if args.config:
        config.add_yaml_config(args.config)
        args.config.close()
    overrides = argparse.Namespace(
        seed=args.seed,
        output=argparse.Namespace(directory=args.out) if args.out else None,
        evaluation=(
            argparse.Namespace(alpha_grid=args.alpha_grid)
            if getattr(args, "alpha_grid", None)
            else None
        ),
    )
    config.add_args_config(overrides)
    config.validate()
    return config


def _out(config, name: str) -> str:
    return os.path.join(config["output"]["directory"], name)


def _require(path: str) -> str:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Missing artifact {path}")
    return path


def _write_json(obj, path: str):
    with open(path, "w", encoding="utf-8") as json_file:
        json.dump(obj, json_file, indent=2, sort_keys=True)
    logger.info("Wrote %s", path)


def _propensity(path: typing.Optional[str]) -> reward.RankDiscount:
    if path is None:
        return reward.LOG_DISCOUNT
    with open(_require(path), encoding="utf-8") as propensity_file:
        return reward.RankDiscount.from_dict(json.load(propensity_file))


def _spec(config, name: str) -> reward.RewardSpec:
    return reward.get_spec(name, config.get("rewards"))


def _sessions(path: str, spec: reward.RewardSpec, config) -> list[logs.SessionRecord]:
    sessions = logs.read_log(_require(path))
    if spec.label_source == reward.LabelSource.SOFT:
        truth = logs.read_ground_truth(_require(_out(config, GROUND_TRUTH)))
        sessions = logs.attach_soft_labels(sessions, truth)
    return sessions


def cmd_simulate(config, args):
    """Writes training and held-out logs, their ground truth and a
    provenance manifest."""
    simulation = config["simulation"]
    seed = config["seed"]
    catalog = sim.sample_catalog(seed=seed, **config["catalog"])
    logging_policy = sim.make_logging_policy(
        simulation["logging_policy"], simulation["logging_noise"]
    )
    n_sessions = simulation["n_sessions"]
    sessions, truth = sim.simulate_logs(
        logging_policy, n_sessions, config, seed, catalog, args.threads
    )
    heldout, heldout_truth = sim.simulate_logs(
        logging_policy,
        simulation["n_heldout_sessions"],
        config,
        seed,
        catalog,
        args.threads,
        first_session_id=n_sessions,
    )
    truth.update(heldout_truth)
    logs.write_log(sessions, _out(config, SESSIONS))
    logs.write_log(heldout, _out(config, HELDOUT))
    logs.write_ground_truth(truth, _out(config, GROUND_TRUTH))
    _write_json(
        {
            "config_hash": config.hash(),
            "seed": seed,
            "files": [SESSIONS, HELDOUT, GROUND_TRUTH],
            "n_sessions": len(sessions),
            "n_heldout_sessions": len(heldout),
        },
        _out(config, MANIFEST),
    )


def cmd_fit_propensity(config, args):
    """Fits the examination curve from a randomized log."""
    sessions = logs.read_log(_require(args.log or _out(config, SESSIONS)))
    fitted = reward.fit_propensity_curve(sessions)
    _write_json(fitted.to_dict(), _out(config, PROPENSITY))


def cmd_train(config, args):
    """Builds the training set under ``--spec``, trains, and writes the model
    and its loss trace."""
    spec = _spec(config, args.spec)
    training = config["training"]
    sessions = _sessions(args.log or _out(config, SESSIONS), spec, config)
    dataset = logs.build_training_set(
        sessions, spec, training["negatives_per_context"], config["seed"]
    )
    logs.write_dataset(dataset, _out(config, f"train_{args.spec}.jsonl"))
    if len(dataset) == 0:
        raise ValueError(f"No training contexts under spec {args.spec!r}")
    first = dataset[0]
    n_features = len(first.items[0].features) + len(first.context_features)
    train_config = policy.TrainConfig.from_mapping(training, config["seed"])
    scorer = policy.make_scorer(
        training["scorer"], n_features, training["hidden_width"], config["seed"]
    )
    if training["pointwise"]:
        result = policy.train_pointwise(dataset, train_config, scorer)
    else:
        propensity = (
            _propensity(args.propensity)
            if spec.label_source == reward.LabelSource.CLICKS
            else None
        )
        result = policy.train(
            dataset,
            scorer,
            train_config,
            propensity=propensity,
            idcg_normalize=spec.idcg_normalize,
            label_cap=spec.label_cap,
        )
    policy.save_policy(
        policy.Policy(result.scorer), _out(config, f"model_{args.spec}.json")
    )
    eval_.write_frame(
        pd.DataFrame(
            {"epoch": range(len(result.loss_trace)), "loss": result.loss_trace}
        ),
        _out(config, f"loss_{args.spec}.csv"),
    )


def _eval_set(config, spec, spec_name, eval_set_path=None) -> logs.ContextDataset:
    if eval_set_path is not None:
        return logs.read_dataset(_require(eval_set_path))
    heldout = _sessions(_out(config, HELDOUT), spec, config)
    return logs.build_eval_set(heldout, spec)


def cmd_eval(config, args):
    """Writes ``metrics.csv`` for the model, the baseline and the logging
    policy, and ``segments.csv`` if a baseline is given."""
    spec = _spec(config, args.spec)
    evaluation = config["evaluation"]
    propensity = _propensity(args.propensity)
    eval_set = _eval_set(config, spec, args.spec, args.eval_set)
    model = policy.load_policy(_require(args.model))
    baseline = policy.load_policy(_require(args.baseline)) if args.baseline else None

    def estimate(evaluated):
        return eval_.counterfactual_metric(
            eval_set,
            evaluated,
            spec,
            propensity=propensity,
            n_bootstrap=evaluation["n_bootstrap"],
            confidence=evaluation["confidence"],
            seed=config["seed"],
        )

    rows = [("model", estimate(model)), ("logging", estimate(None))]
    if baseline is not None:
        rows.append(("baseline", estimate(baseline)))
    frame = eval_.metrics_frame(e for _, e in rows)
    frame.insert(0, "policy", [name for name, _ in rows])
    eval_.write_frame(frame, _out(config, "metrics.csv"))
    if baseline is not None:
        lifts = eval_.segment_lift(
            eval_set,
            model,
            baseline,
            spec,
            propensity=propensity,
            n_bootstrap=evaluation["n_bootstrap"],
            confidence=evaluation["confidence"],
            seed=config["seed"],
        )
        eval_.write_frame(
            eval_.segments_frame(lifts, eval_.MetricKind.for_spec(spec)),
            _out(config, "segments.csv"),
        )


def _ranker(name: str, config) -> policy.BaseRanker:
    if name in ("random", "oracle", "oracle-noisy"):
        return sim.make_logging_policy(name, config["simulation"]["logging_noise"])
    return policy.load_policy(_require(name))


def cmd_abtest(config, args):
    """Writes ``ab_report.json`` for ``--model`` against ``--baseline``."""
    evaluation = config["evaluation"]
    report = sim.run_ab_test(
        _ranker(args.model, config),
        _ranker(args.baseline, config),
        evaluation["n_ab_sessions"],
        config,
        config["seed"],
        common_random_numbers=config["simulation"]["common_random_numbers"],
        n_bootstrap=evaluation["n_bootstrap"],
        confidence=evaluation["confidence"],
        threads=args.threads,
    )
    _write_json(report.to_dict(), _out(config, "ab_report.json"))


def cmd_sweep(config, args):
    """Writes ``sweep.csv`` over the configured alpha grid."""
    evaluation = config["evaluation"]
    f_acquisition = policy.load_policy(
        _require(args.acquisition or _out(config, "model_purchase.json"))
    ).scorer
    f_engagement = policy.load_policy(
        _require(args.engagement or _out(config, "model_engagement.json"))
    ).scorer
    eval_sets = {}
    for metric, name in eval_.METRIC_SPECS.items():
        spec = _spec(config, name)
        try:
            eval_sets[metric] = (spec, _eval_set(config, spec, name))
        except reward.FitError as exc:
            logger.warning("Skipping %s: %s", metric.value, exc)
    calibration = eval_sets[eval_.MetricKind.EXP_CLICKS][1]
    curve = eval_.alpha_sweep(
        f_acquisition,
        f_engagement,
        evaluation["alpha_grid"],
        eval_sets,
        calibration,
        propensity=_propensity(args.propensity),
        n_bootstrap=evaluation["n_bootstrap"],
        confidence=evaluation["confidence"],
        seed=config["seed"],
    )
    eval_.write_frame(curve.to_frame(), _out(config, "sweep.csv"))


def cmd_print_config(config, args):  # pylint: disable=unused-argument
    """Prints the effective configuration as YAML."""
    sys.stdout.write(config.dump())


COMMANDS = {
    "simulate": cmd_simulate,
    "fit-propensity": cmd_fit_propensity,
    "train": cmd_train,
    "eval": cmd_eval,
    "abtest": cmd_abtest,
    "sweep": cmd_sweep,
    "print-config": cmd_print_config,
}


def main(argv: typing.Optional[typing.Sequence[str]] = None) -> int:
    """Entry point.

    Parses CLI parameters, creates a config from them and runs the
    subcommand.

    :returns: Exit code, 1 on domain errors and missing artifacts.
    """
    parser = build_argparser()
    args = parser.parse_args(argv)
    try:
        config = get_config(args)
        os.makedirs(config["output"]["directory"], exist_ok=True)
        logger.info("Running %s with config %s", args.command, config.hash())
        COMMANDS[args.command](config, args)
    except (ValueError, OSError, RuntimeError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        return 1
    return 0


def sync_main():  # pragma: no cover
    """Synchronous entry point."""
    sys.exit(main())
