# -*- coding: utf-8 -*-
# vim:fenc=utf-8
#
# Copyright (C) 2025 TU Dresden
#
# Distributed under terms of the MIT license.

import copy
import typing

import pytest

from valuerank.config import DEFAULTS, Config
from valuerank.logs import ItemRecord, Purchase, QueryRecord, SessionRecord
from valuerank import sim

SMALL_CONFIG = {
    "seed": 7,
    "catalog": {**DEFAULTS["catalog"], "n_items": 200},
    "intents": dict(DEFAULTS["intents"]),
    "click_model": dict(DEFAULTS["click_model"]),
    "simulation": {
        **DEFAULTS["simulation"],
        "n_sessions": 300,
        "n_heldout_sessions": 200,
        "n_candidates": 15,
        "page_size": 8,
    },
}


@pytest.fixture
def config():
    conf = Config()
    conf._sections.clear()  # pylint: disable=protected-access
    yield conf
    conf._sections.clear()  # pylint: disable=protected-access


@pytest.fixture
def small_config():
    return copy.deepcopy(SMALL_CONFIG)


@pytest.fixture
def catalog():
    return sim.sample_catalog(seed=7, **SMALL_CONFIG["catalog"])


def make_query(
    query_id: int,
    candidate_ids: typing.Sequence[int],
    n_impressed: typing.Optional[int] = None,
    clicks: typing.Sequence[int] = (),
    prices: typing.Optional[typing.Mapping[int, float]] = None,
    context_features: typing.Sequence[float] = (0.0, 0.0, 0.0),
) -> QueryRecord:
    """Query impressing the first ``n_impressed`` candidates in order.

    Item features are ``(item_id, 1.0)``.
    """
    if n_impressed is None:
        n_impressed = len(candidate_ids)
    prices = prices or {}
    return QueryRecord(
        query_id=query_id,
        candidates=[
            ItemRecord(
                item_id=item_id,
                features=[float(item_id), 1.0],
                price=prices.get(item_id, 10.0),
                impressed=i < n_impressed,
            )
            for i, item_id in enumerate(candidate_ids)
        ],
        ranking=list(candidate_ids[:n_impressed]),
        clicks=list(clicks),
        context_features=list(context_features),
    )


def make_session(
    session_id: int,
    queries: typing.Sequence[QueryRecord],
    purchase: typing.Optional[typing.Tuple[int, float, int]] = None,
    intent_bucket: int = 0,
) -> SessionRecord:
    """Session with an optional ``(item_id, price, query_id)`` purchase."""
    return SessionRecord(
        session_id=session_id,
        intent_bucket=intent_bucket,
        queries=list(queries),
        purchase=Purchase(*purchase) if purchase is not None else None,
    )


def clicked_sessions(n_sessions: int, n_candidates: int = 4, n_buckets: int = 1):
    """Single-query sessions clicking the top slot, spread over buckets."""
    return [
        make_session(
            i,
            [make_query(0, list(range(n_candidates)), clicks=[0])],
            intent_bucket=i % n_buckets,
        )
        for i in range(n_sessions)
    ]
