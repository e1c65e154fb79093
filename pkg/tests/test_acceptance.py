#! /usr/bin/env python
# -*- coding: utf-8 -*-
# vim:fenc=utf-8
#
# Copyright (C) 2025 TU Dresden
#
# Distributed under terms of the MIT license.

"""End-to-end runs at default scale: train on 5e4 simulated sessions,
compare policies offline on 2e4 held-out sessions and online in 2e4 paired
AB sessions. Run with ``pytest -m slow``."""

import copy

import pytest

from valuerank import eval as eval_
from valuerank import logs
from valuerank import policy
from valuerank import reward
from valuerank import sim
from valuerank.config import DEFAULTS

pytestmark = pytest.mark.slow

THREADS = 8
AB_SESSIONS = 20000


@pytest.fixture(scope="module")
def run_config():
    return copy.deepcopy(DEFAULTS)


@pytest.fixture(scope="module")
def catalog(run_config):
    return sim.sample_catalog(seed=run_config["seed"], **run_config["catalog"])


@pytest.fixture(scope="module")
def simulated(run_config, catalog):
    simulation = run_config["simulation"]
    logging_policy = sim.make_logging_policy(
        simulation["logging_policy"], simulation["logging_noise"]
    )
    n_sessions = simulation["n_sessions"]
    sessions, _ = sim.simulate_logs(
        logging_policy, n_sessions, run_config, run_config["seed"], catalog, THREADS
    )
    heldout, _ = sim.simulate_logs(
        logging_policy,
        simulation["n_heldout_sessions"],
        run_config,
        run_config["seed"],
        catalog,
        THREADS,
        first_session_id=n_sessions,
    )
    return sessions, heldout


def _train(run_config, sessions, spec):
    training = run_config["training"]
    dataset = logs.build_training_set(
        sessions, spec, training["negatives_per_context"], run_config["seed"]
    )
    scorer = policy.make_scorer(training["scorer"], sim.N_FEATURES)
    result = policy.train(
        dataset,
        scorer,
        policy.TrainConfig.from_mapping(training, run_config["seed"]),
        idcg_normalize=spec.idcg_normalize,
        label_cap=spec.label_cap,
    )
    return policy.Policy(result.scorer)


@pytest.fixture(scope="module")
def trained(run_config, simulated):
    sessions, _ = simulated
    specs = {
        name: reward.get_spec(name) for name in ("engagement", "purchase", "revenue")
    }
    specs["purchase_last_touch"] = reward.RewardSpec(
        reward.RewardKind.PURCHASE_COUNT, reward.Attribution.LAST_TOUCH
    )
    return {name: _train(run_config, sessions, spec) for name, spec in specs.items()}


def _ab_test(run_config, catalog, policy_a, policy_b):
    return sim.run_ab_test(
        policy_a,
        policy_b,
        AB_SESSIONS,
        run_config,
        run_config["seed"] + 1,
        catalog,
        common_random_numbers=True,
        threads=THREADS,
    )


def test_engagement_policy_trades_purchases_for_engagement(
    run_config, catalog, trained
):
    report = _ab_test(run_config, catalog, trained["engagement"], trained["purchase"])
    engagement = report.lifts["sessions_with_engagement"]
    purchases = report.lifts["sessions_with_purchase"]
    assert engagement.value > 0
    assert engagement.ci_low > 0
    assert purchases.value < 0
    assert purchases.ci_high < 0


def test_alpha_sweep_shape(run_config, simulated, trained):
    _, heldout = simulated
    specs = {m: reward.get_spec(name) for m, name in eval_.METRIC_SPECS.items()}
    eval_sets = {m: (s, logs.build_eval_set(heldout, s)) for m, s in specs.items()}
    curve = eval_.alpha_sweep(
        trained["purchase"].scorer,
        trained["engagement"].scorer,
        [0.0, 0.25, 0.5, 0.75, 1.0],
        eval_sets,
        eval_sets[eval_.MetricKind.EXP_CLICKS][1],
        seed=run_config["seed"],
    )

    def lift(metric, bucket, alpha=1.0):
        (point,) = [
            p
            for p in curve.points
            if p.metric == metric and p.bucket == bucket and p.alpha == alpha
        ]
        return point.lift.value

    clicks, purchases = eval_.MetricKind.EXP_CLICKS, eval_.MetricKind.EXP_PURCHASES
    assert lift(clicks, eval_.OVERALL) > lift(clicks, eval_.OVERALL, 0.0)
    assert lift(purchases, eval_.OVERALL) < lift(purchases, eval_.OVERALL, 0.0)
    highest = run_config["catalog"]["n_buckets"] - 1
    assert lift(clicks, highest) > lift(clicks, 0)


def test_all_touch_attribution_helps_high_price_intents(run_config, catalog, trained):
    report = _ab_test(
        run_config,
        catalog,
        trained["purchase"],
        trained["purchase_last_touch"],
    )
    highest = run_config["catalog"]["n_buckets"] - 1
    top = report.lifts[f"sessions_with_purchase[{highest}]"]
    bottom = report.lifts["sessions_with_purchase[0]"]
    assert top.value > 0
    assert top.ci_low > 0
    assert bottom is None or top.value > bottom.value


def test_value_aware_policy_shifts_revenue_to_high_price_intents(
    run_config, catalog, trained
):
    report = _ab_test(run_config, catalog, trained["revenue"], trained["purchase"])
    highest = run_config["catalog"]["n_buckets"] - 1
    bottom = report.lifts["total_revenue[0]"]
    top = report.lifts[f"total_revenue[{highest}]"]
    assert bottom.value < 0
    assert bottom.ci_high < 0
    assert top.value > 0
    assert top.ci_low > 0
