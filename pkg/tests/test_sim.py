#! /usr/bin/env python
# -*- coding: utf-8 -*-
# vim:fenc=utf-8
#
# Copyright (C) 2025 TU Dresden
#
# Distributed under terms of the MIT license.

import json

import numpy as np
import pytest
from scipy.special import expit

from valuerank import reward
from valuerank import sim
from valuerank.config import ConfigError

from .fixtures import catalog, small_config


def _intent(vector=(1.0, 0.0), target_price=10.0, depth=1, resolve=1.0, bucket=0):
    return sim.UserIntent(
        intent_vector=np.array(vector),
        price_intent_bucket=bucket,
        target_price=target_price,
        browse_depth=depth,
        purchase_resolve=resolve,
    )


def _candidates(relevance):
    n = len(relevance)
    return sim.CandidateSet(
        item_ids=np.arange(n),
        features=np.zeros((n, 4)),
        prices=np.full(n, 10.0),
        relevance=np.asarray(relevance, dtype=float),
    )


def test_sample_catalog(catalog):
    assert len(catalog) == 200
    assert np.bincount(catalog.buckets).tolist() == [40] * 5
    order = np.argsort(catalog.prices)
    assert np.all(np.diff(catalog.buckets[order]) >= 0)
    for item_id in range(len(catalog)):
        assert catalog.bucket_of_price(catalog.prices[item_id]) == catalog.buckets[item_id]
    item = catalog.item(3)
    assert item.features.shape == (catalog.n_latent + 1,)
    assert item.bucket == catalog.buckets[3]


def test_sample_catalog__deterministic(catalog):
    again = sim.sample_catalog(200, 5, seed=7)
    np.testing.assert_array_equal(again.prices, catalog.prices)
    np.testing.assert_array_equal(again.observed, catalog.observed)


def test_sample_catalog__single_item():
    catalog = sim.sample_catalog(1, 1, seed=7)
    assert len(catalog) == 1
    assert catalog.buckets.tolist() == [0]
    assert catalog.bucket_of_price(catalog.prices[0]) == 0


@pytest.mark.parametrize("n_items, n_buckets", [(3, 5), (10, 0)])
def test_sample_catalog__invalid(n_items, n_buckets):
    with pytest.raises(ConfigError):
        sim.sample_catalog(n_items, n_buckets, seed=0)


def test_sample_intent__segment_mix(catalog):
    mix = [0.5, 0.2, 0.1, 0.1, 0.1]
    rng = np.random.default_rng(1)
    intents = [sim.sample_intent(mix, rng, catalog) for _ in range(20000)]
    buckets = np.array([intent.price_intent_bucket for intent in intents])
    frequencies = np.bincount(buckets, minlength=5) / len(buckets)
    np.testing.assert_allclose(frequencies, mix, atol=0.02)
    depths = np.array([intent.browse_depth for intent in intents])
    assert depths.min() >= 1
    assert depths[buckets == 4].mean() > depths[buckets == 0].mean() + 2
    for intent in intents[:50]:
        bucket = intent.price_intent_bucket
        assert intent.purchase_resolve == pytest.approx(0.6 * 0.75**bucket)
        assert intent.target_price > 0
        assert np.linalg.norm(intent.intent_vector) == pytest.approx(1.0)


def test_sample_intent__single_bucket_mix(catalog):
    rng = np.random.default_rng(2)
    for _ in range(200):
        intent = sim.sample_intent([1.0, 0.0, 0.0, 0.0, 0.0], rng, catalog)
        assert intent.price_intent_bucket == 0


def test_sample_intent__invalid_mix(catalog):
    with pytest.raises(ConfigError):
        sim.sample_intent([0.5, 0.5], np.random.default_rng(0), catalog)


def test_relevance_prob():
    item = sim.Item(0, 10.0, np.array([1.0, 0.0]), np.zeros(3), 0)
    assert sim.relevance_prob(item, _intent()) == pytest.approx(expit(6.0 * 0.4))
    pricey = sim.Item(1, 20.0, np.array([1.0, 0.0]), np.zeros(3), 0)
    assert sim.relevance_prob(pricey, _intent()) == pytest.approx(
        expit(6.0 * 0.4) * np.exp(-np.log(2.0) ** 2)
    )
    cheap = sim.Item(2, 5.0, np.array([1.0, 0.0]), np.zeros(3), 0)
    assert sim.relevance_prob(cheap, _intent()) == pytest.approx(
        expit(6.0 * 0.4 + 1.5 * np.tanh(np.log(2.0)))
    )
    assert sim.relevance_prob(item, _intent(vector=(0.0, 1.0))) < 0.5


def test_relevance_probs__monotone_in_price():
    rng = np.random.default_rng(4)
    intent = _intent(vector=(0.6, 0.8), target_price=30.0)
    for _ in range(100):
        quality = np.tile(rng.normal(size=2), (20, 1))
        prices = np.sort(rng.lognormal(3.5, 1.0, 20))
        probs = sim.relevance_probs(quality, prices, intent)
        assert np.all(np.diff(probs) <= 1e-12)


def test_purchase_fit():
    params = sim.ClickModelParams()
    fit = params.purchase_fit([5.0, 10.0, 20.0], 10.0)
    assert fit.tolist() == pytest.approx([np.exp(-4.0 * np.log(2.0) ** 2), 1.0, 1.0])
    flat = sim.ClickModelParams(fit_sensitivity=0.0)
    assert flat.purchase_fit([1.0, 10.0], 10.0).tolist() == [1.0, 1.0]


@pytest.mark.parametrize(
    "field", ["price_sensitivity", "bargain_appeal", "fit_sensitivity"]
)
def test_click_model_params__negative(field):
    with pytest.raises(ConfigError):
        sim.ClickModelParams(**{field: -0.1})


def test_relevance_prob__dimension_mismatch():
    item = sim.Item(0, 10.0, np.array([1.0, 0.0, 0.0]), np.zeros(4), 0)
    with pytest.raises(ValueError):
        sim.relevance_prob(item, _intent())


def test_simulate_serp__irrelevant():
    rng = np.random.default_rng(0)
    params = sim.ClickModelParams()
    for _ in range(100):
        outcome = sim.simulate_serp(
            sim.OracleRanker(), _candidates([1e-12] * 6), _intent(), params, rng, 4
        )
        assert not outcome.clicked.any()
        assert outcome.purchased_item is None
        assert len(outcome.ranking) == 6
        assert len(outcome.examined) == 4


def test_simulate_serp__examination():
    rng = np.random.default_rng(3)
    params = sim.ClickModelParams()
    n_trials = 20000
    clicks = np.zeros(5)
    for _ in range(n_trials):
        outcome = sim.simulate_serp(
            sim.RandomRanker(),
            _candidates([1.0] * 5),
            _intent(resolve=0.0),
            params,
            rng,
        )
        assert outcome.purchased_item is None
        clicks += outcome.clicked
    np.testing.assert_allclose(clicks / n_trials, 1.0 / np.arange(1, 6), atol=0.02)


def test_simulate_serp__first_relevant_click_purchases():
    rng = np.random.default_rng(5)
    params = sim.ClickModelParams()
    relevance = [0.3, 0.9, 0.9, 0.2, 0.8]
    for _ in range(500):
        outcome = sim.simulate_serp(
            sim.RandomRanker(), _candidates(relevance), _intent(), params, rng
        )
        eligible = [
            int(outcome.ranking[slot])
            for slot in outcome.click_slots
            if relevance[outcome.ranking[slot]] > params.purchase_threshold
        ]
        assert outcome.purchased_item == (eligible[0] if eligible else None)


def test_simulate_serp__clicks_examined():
    rng = np.random.default_rng(8)
    params = sim.ClickModelParams(examination_exponent=1.5)
    for _ in range(2000):
        n = int(rng.integers(1, 12))
        candidates = sim.CandidateSet(
            np.arange(n), np.zeros((n, 4)), rng.lognormal(2.0, 1.0, n), rng.random(n)
        )
        outcome = sim.simulate_serp(
            sim.RandomRanker(), candidates, _intent(), params, rng, 6
        )
        assert not (outcome.clicked & ~outcome.examined).any()
        if outcome.purchased_item is not None:
            slot = outcome.impressed.tolist().index(outcome.purchased_item)
            assert outcome.clicked[slot]


def test_simulate_serp__bargains_rarely_convert():
    rng = np.random.default_rng(6)
    params = sim.ClickModelParams()
    candidates = sim.CandidateSet(
        np.arange(2), np.zeros((2, 4)), np.array([3.0, 10.0]), np.array([0.9, 0.9])
    )
    purchases = np.zeros(2)
    for _ in range(4000):
        outcome = sim.simulate_serp(
            sim.OracleRanker(), candidates, _intent(), params, rng
        )
        if outcome.purchased_item is not None:
            purchases[outcome.purchased_item] += 1
    # the bargain is ranked first
    assert purchases[0] < 0.05 * purchases[1]


def test_simulate_serp__empty():
    with pytest.raises(ValueError):
        sim.simulate_serp(
            sim.RandomRanker(),
            _candidates([]),
            _intent(),
            sim.ClickModelParams(),
            np.random.default_rng(0),
        )


def test_make_logging_policy(tmp_path):
    assert isinstance(sim.make_logging_policy("random"), sim.RandomRanker)
    assert sim.make_logging_policy("oracle").noise == 0.0
    assert sim.make_logging_policy("oracle-noisy", 0.4).noise == 0.4
    with pytest.raises(ConfigError):
        sim.make_logging_policy(str(tmp_path / "missing.json"))


def _intent_in(catalog, depth, resolve, bucket=0, seed=0):
    rng = np.random.default_rng(seed)
    vector = rng.normal(size=catalog.n_latent)
    return _intent(
        vector / np.linalg.norm(vector),
        float(np.median(catalog.prices)),
        depth,
        resolve,
        bucket,
    )


def test_simulate_session__depth(catalog):
    params = sim.ClickModelParams()
    simulation = sim.SimulationParams(n_candidates=15, page_size=8)
    session = sim.simulate_session(
        sim.OracleRanker(),
        _intent_in(catalog, 3, 0.0, bucket=2),
        catalog,
        params,
        np.random.default_rng(0),
        simulation,
    )
    assert session.purchase is None
    assert [q.query_id for q in session.queries] == [0, 1, 2]
    for index, query in enumerate(session.queries):
        assert len(query.candidates) == 15
        assert len(query.ranking) == 8
        assert query.context_features[0] == index
        assert query.context_features[2] == 2
    capped = sim.simulate_session(
        sim.OracleRanker(),
        _intent_in(catalog, 3, 0.0),
        catalog,
        params,
        np.random.default_rng(0),
        sim.SimulationParams(n_candidates=15, page_size=8, max_queries=2),
    )
    assert len(capped.queries) == 2


def test_simulate_session__ends_on_purchase(catalog):
    params = sim.ClickModelParams()
    rng = np.random.default_rng(1)
    purchases = 0
    for session_id in range(30):
        session = sim.simulate_session(
            sim.OracleRanker(),
            _intent_in(catalog, 5, 1.0, seed=session_id),
            catalog,
            params,
            rng,
            session_id=session_id,
        )
        if session.purchase is None:
            assert len(session.queries) == 5
        else:
            purchases += 1
            assert session.purchase.query_id == session.queries[-1].query_id
            assert session.purchase.item_id in session.queries[-1].clicked_items()
    assert purchases > 0


def test_simulate_logs__deterministic(small_config, catalog):
    first = sim.simulate_logs(sim.RandomRanker(), 40, small_config, 11, catalog)
    assert first == sim.simulate_logs(sim.RandomRanker(), 40, small_config, 11, catalog)
    threaded = sim.simulate_logs(
        sim.RandomRanker(), 40, small_config, 11, catalog, threads=4
    )
    assert threaded == first
    head, head_truth = sim.simulate_logs(
        sim.RandomRanker(), 25, small_config, 11, catalog
    )
    tail, tail_truth = sim.simulate_logs(
        sim.RandomRanker(), 15, small_config, 11, catalog, first_session_id=25
    )
    assert head + tail == first[0]
    assert {**head_truth, **tail_truth} == first[1]


def test_simulate_logs__ground_truth(small_config, catalog):
    sessions, truth = sim.simulate_logs(sim.OracleRanker(), 20, small_config, 2, catalog)
    assert sorted(truth) == [s.session_id for s in sessions]
    for session in sessions:
        entry = truth[session.session_id]
        assert entry["intent_bucket"] == session.intent_bucket
        for query in session.queries:
            for candidate in query.candidates:
                assert 0 < entry["relevance"][candidate.item_id] < 1


def test_simulate_logs__deeper_high_buckets(small_config, catalog):
    sessions, _ = sim.simulate_logs(sim.RandomRanker(), 300, small_config, 5, catalog)
    depth = {
        bucket: np.mean(
            [len(s.queries) for s in sessions if s.intent_bucket == bucket]
        )
        for bucket in (0, 4)
    }
    assert depth[4] > depth[0]


def test_run_ab_test__null(small_config, catalog):
    report = sim.run_ab_test(
        sim.OracleRanker(0.3),
        sim.OracleRanker(0.3),
        200,
        small_config,
        3,
        catalog,
        common_random_numbers=True,
        n_bootstrap=200,
    )
    assert report.arms["a"] == report.arms["b"]
    assert report.arms["a"].sessions == 200
    for lift in report.lifts.values():
        assert lift is None or (lift.value, lift.ci_low, lift.ci_high) == (0, 0, 0)
    json.dumps(report.to_dict())


def test_run_ab_test__oracle_beats_random(small_config, catalog):
    report = sim.run_ab_test(
        sim.OracleRanker(),
        sim.RandomRanker(),
        400,
        small_config,
        4,
        catalog,
        n_bootstrap=500,
    )
    lift = report.lifts["sessions_with_engagement"]
    assert lift.value > 0
    assert lift.ci_low > 0
    assert lift.contains(lift.value)
    buckets = report.arms["a"].per_bucket
    assert sum(b["sessions"] for b in buckets.values()) == 400


def test_run_ab_test__too_few_sessions(small_config, catalog):
    with pytest.raises(ValueError):
        sim.run_ab_test(sim.RandomRanker(), sim.RandomRanker(), 1, small_config, 0, catalog)


@pytest.mark.parametrize(
    "exponent",
    [
        pytest.param(0.7, marks=pytest.mark.slow),
        1.0,
        pytest.param(1.5, marks=pytest.mark.slow),
    ],
)
def test_simulate_logs__propensity_recovery(small_config, catalog, exponent):
    small_config["click_model"]["examination_exponent"] = exponent
    sessions, _ = sim.simulate_logs(
        sim.RandomRanker(), 10000, small_config, 17, catalog
    )
    fitted = reward.fit_propensity_curve(sessions)
    assert fitted.exponent == pytest.approx(exponent, abs=0.05)
