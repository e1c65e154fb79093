#! /usr/bin/env python
# -*- coding: utf-8 -*-
# vim:fenc=utf-8
#
# Copyright (C) 2025 TU Dresden
#
# Distributed under terms of the MIT license.

import pytest

from valuerank import logs
from valuerank import reward
from valuerank import sim

from .fixtures import catalog, make_query, make_session, small_config


def test_write_read_log(tmp_path, small_config, catalog):
    sessions, _ = sim.simulate_logs(sim.RandomRanker(), 100, small_config, 3, catalog)
    path = tmp_path / "sessions.jsonl"
    logs.write_log(sessions, path)
    assert logs.read_log(path) == sessions


def test_read_log__empty(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert logs.read_log(path) == []


def test_read_log__truncated(tmp_path):
    path = tmp_path / "sessions.jsonl"
    session = make_session(0, [make_query(0, [1, 2], clicks=[0])])
    logs.write_log([session, session], path)
    lines = path.read_text().splitlines()
    path.write_text(lines[0] + "\n" + lines[1][: len(lines[1]) // 2] + "\n")
    with pytest.raises(logs.LogParseError) as exc_info:
        logs.read_log(path)
    assert exc_info.value.lineno == 2
    assert ":2:" in str(exc_info.value)


def test_read_log__invalid_record(tmp_path):
    path = tmp_path / "sessions.jsonl"
    path.write_text('{"session_id": 1}\n')
    with pytest.raises(logs.LogParseError) as exc_info:
        logs.read_log(path)
    assert exc_info.value.lineno == 1


def test_session_record__purchase_needs_click():
    with pytest.raises(ValueError):
        make_session(0, [make_query(0, [1, 2])], purchase=(1, 10.0, 0))


def test_query_record__invalid():
    with pytest.raises(ValueError):
        logs.QueryRecord(0, [], [1], [], [])
    with pytest.raises(ValueError):
        make_query(0, [1, 2], clicks=[5])


def test_build_training_set__negatives():
    engagement = reward.get_spec("engagement")
    session = make_session(0, [make_query(0, list(range(11)), clicks=[0])])
    dataset = logs.build_training_set([session], engagement, 3, seed=1)
    assert len(dataset) == 1
    context = dataset[0]
    assert len(context.items) == 4
    assert context.items[0].item_id == 0
    assert context.labels().tolist() == [1.0, 0.0, 0.0, 0.0]
    assert context.context_weight == 1.0
    assert len(set(context.item_ids().tolist())) == 4


def test_build_training_set__availability():
    engagement = reward.get_spec("engagement")
    session = make_session(0, [make_query(0, [0, 1], clicks=[0])])
    dataset = logs.build_training_set([session], engagement, 3)
    assert len(dataset[0].items) == 2


def test_build_training_set__no_success():
    session = make_session(0, [make_query(0, [0, 1, 2])])
    for name in ("engagement", "purchase"):
        assert len(logs.build_training_set([session], reward.get_spec(name))) == 0


def test_build_training_set__empty():
    for name in ("engagement", "purchase", "revenue"):
        assert len(logs.build_training_set([], reward.get_spec(name))) == 0


def test_build_training_set__invalid_negatives():
    with pytest.raises(ValueError):
        logs.build_training_set([], reward.get_spec("engagement"), 0)


def test_build_training_set__seeded():
    engagement = reward.get_spec("engagement")
    sessions = [
        make_session(i, [make_query(0, list(range(20)), clicks=[0])]) for i in range(5)
    ]
    first = logs.build_training_set(sessions, engagement, 3, seed=4)
    assert first == logs.build_training_set(sessions, engagement, 3, seed=4)
    # shards concatenate to the full build
    shards = [
        logs.build_training_set(sessions[:2], engagement, 3, seed=4),
        logs.build_training_set(sessions[2:], engagement, 3, seed=4),
    ]
    ids = [c.item_ids().tolist() for shard in shards for c in shard]
    assert ids == [c.item_ids().tolist() for c in first]


def test_build_training_set__partial_labels():
    purchase = reward.get_spec("purchase")
    session = make_session(
        0, [make_query(0, [0, 1, 2, 3], clicks=[0, 1])], purchase=(1, 10.0, 0)
    )
    context = logs.build_training_set([session], purchase, 3)[0]
    labels = dict(zip(context.item_ids().tolist(), context.labels().tolist()))
    assert labels[1] == 1.0
    assert labels[0] == purchase.partial_label
    assert labels[2] == labels[3] == 0.0


def _all_touch_session():
    return make_session(
        0,
        [
            make_query(0, [0, 1, 2, 3, 4], n_impressed=3),
            make_query(1, [4, 5, 6], clicks=[0]),
        ],
        purchase=(4, 25.0, 1),
    )


def test_build_eval_set__unimpressed_purchase():
    purchase = reward.get_spec("purchase")
    dataset = logs.build_eval_set([_all_touch_session()], purchase)
    assert [c.query_id for c in dataset] == [0, 1]
    first = dataset[0]
    assert len(first.items) == 5
    item = first.items[4]
    assert item.item_id == 4
    assert item.logged_rank is None
    assert item.label == 1.0
    assert dataset.weights().tolist() == pytest.approx([0.5, 0.5])


def test_build_eval_set__keeps_candidates():
    engagement = reward.get_spec("engagement")
    session = make_session(0, [make_query(0, list(range(25)), 10, clicks=[0])])
    dataset = logs.build_eval_set([session], engagement)
    assert len(dataset[0].items) == 25
    assert dataset == logs.build_eval_set([session], engagement)


def test_build_eval_set__superset_of_training():
    purchase = reward.get_spec("purchase")
    sessions = [_all_touch_session()]
    training = logs.build_training_set(sessions, purchase, 2)
    evaluation = logs.build_eval_set(sessions, purchase)
    for train_context, eval_context in zip(training, evaluation):
        assert set(train_context.item_ids()) <= set(eval_context.item_ids())
        assert train_context.context_weight > 0


def test_build_training_set__soft_labels():
    soft = reward.RewardSpec(
        reward.RewardKind.ENGAGEMENT_COUNT,
        reward.Attribution.LAST_TOUCH,
        label_source=reward.LabelSource.SOFT,
    )
    session = make_session(0, [make_query(0, [0, 1, 2], clicks=[1])])
    with pytest.raises(ValueError):
        logs.build_eval_set([session], soft)
    truth = {
        0: {
            "intent_bucket": 0,
            "target_price": 10.0,
            "relevance": {0: 0.1, 1: 0.7, 2: 0.4},
        }
    }
    labeled = logs.attach_soft_labels([session], truth)
    assert session.queries[0].candidates[0].soft_relevance is None
    context = logs.build_eval_set(labeled, soft)[0]
    assert context.labels().tolist() == [0.1, 0.7, 0.4]


def test_write_read_dataset(tmp_path):
    dataset = logs.build_eval_set([_all_touch_session()], reward.get_spec("purchase"))
    path = tmp_path / "dataset.jsonl"
    logs.write_dataset(dataset, path)
    assert logs.read_dataset(path) == dataset


def test_read_dataset__missing_header(tmp_path):
    path = tmp_path / "dataset.jsonl"
    path.write_text('{"session_id": 0}\n')
    with pytest.raises(logs.LogParseError):
        logs.read_dataset(path)


def test_write_read_ground_truth(tmp_path):
    truth = {3: {"intent_bucket": 1, "target_price": 12.5, "relevance": {7: 0.25}}}
    path = tmp_path / "truth.json"
    logs.write_ground_truth(truth, path)
    assert logs.read_ground_truth(path) == truth
