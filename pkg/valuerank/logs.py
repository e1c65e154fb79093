# -*- coding: utf-8 -*-
# vim:fenc=utf-8
#
# Copyright (C) 2025 TU Dresden
#
# Distributed under terms of the MIT license.

"""Logged session data and the datasets built from it."""

import copy
import dataclasses
import json
import logging
import os
import typing

import numpy as np

from . import reward


logger = logging.getLogger(__name__)

PathLike = typing.Union[str, "os.PathLike[str]"]


class LogParseError(ValueError):
    """Raised for a malformed line in a JSONL file.

    :param path: The file.
    :param lineno: 1-based number of the offending line.
    :param reason: What was wrong.
    """

    def __init__(self, path: PathLike, lineno: int, reason: str):
        super().__init__(f"{path}:{lineno}: {reason}")
        self.path = path
        self.lineno = lineno


@dataclasses.dataclass
class ItemRecord:
    """A retrieved candidate of one query."""

    item_id: int
    features: list[float]
    price: float
    impressed: bool
    soft_relevance: typing.Optional[float] = None

    def __post_init__(self):
        if self.price <= 0:
            raise ValueError(f"Item {self.item_id} has non-positive price")
        if self.soft_relevance is not None and not 0 <= self.soft_relevance <= 1:
            raise ValueError(
                f"Item {self.item_id} soft relevance {self.soft_relevance} "
                "not in [0, 1]"
            )


@dataclasses.dataclass
class QueryRecord:
    """One SERP: retrieved candidates, the impressed ranking and its clicks.

    :param ranking: ``item_id`` per impressed slot.
    :param clicks: Clicked slot indices, ascending.
    :param context_features: ``(query_index, prior_clicks, intent_bucket)``.
    """

    query_id: int
    candidates: list[ItemRecord]
    ranking: list[int]
    clicks: list[int]
    context_features: list[float]

    def __post_init__(self):
        ids = self.candidate_ids()
        if len(set(self.ranking)) != len(self.ranking):
            raise ValueError(f"Query {self.query_id} ranking has duplicates")
        if not set(self.ranking) <= set(ids):
            raise ValueError(f"Query {self.query_id} ranks unknown items")
        if any(not 0 <= slot < len(self.ranking) for slot in self.clicks):
            raise ValueError(f"Query {self.query_id} has clicks outside the page")

    def candidate_ids(self) -> list[int]:
        """``item_id`` of every candidate, in retrieval order."""
        return [candidate.item_id for candidate in self.candidates]

    def clicked_items(self) -> list[int]:
        """``item_id`` of every clicked slot."""
        return [self.ranking[slot] for slot in self.clicks]

    def slot_of(self, item_id: int) -> typing.Optional[int]:
        """0-based slot of an impressed item, ``None`` if not impressed."""
        try:
            return self.ranking.index(item_id)
        except ValueError:
            return None


@dataclasses.dataclass
class Purchase:
    """The single purchase of a session."""

    item_id: int
    price: float
    query_id: int


@dataclasses.dataclass
class SessionRecord:
    """One logged user journey."""

    session_id: int
    intent_bucket: int
    queries: list[QueryRecord]
    purchase: typing.Optional[Purchase] = None

    def __post_init__(self):
        if self.purchase is not None:
            query = self.query(self.purchase.query_id)
            if self.purchase.item_id not in query.clicked_items():
                raise ValueError(
                    f"Session {self.session_id} purchase of item "
                    f"{self.purchase.item_id} without a click"
                )

    def query(self, query_id: int) -> QueryRecord:
        """Looks up a query by id.

        :raises KeyError: if the session has no such query.
        """
        for query in self.queries:
            if query.query_id == query_id:
                return query
        raise KeyError(f"Session {self.session_id} has no query {query_id}")

    def to_dict(self) -> dict:
        """JSON-compatible representation, field names as attributes."""
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, session: typing.Mapping) -> "SessionRecord":
        """Inverse of :py:meth:`to_dict`."""
        purchase = session.get("purchase")
        return cls(
            session_id=session["session_id"],
            intent_bucket=session["intent_bucket"],
            queries=[
                QueryRecord(
                    query_id=query["query_id"],
                    candidates=[ItemRecord(**item) for item in query["candidates"]],
                    ranking=list(query["ranking"]),
                    clicks=list(query["clicks"]),
                    context_features=list(query["context_features"]),
                )
                for query in session["queries"]
            ],
            purchase=Purchase(**purchase) if purchase is not None else None,
        )


def write_log(sessions: typing.Iterable[SessionRecord], path: PathLike):
    """Writes one JSON object per session and line."""
    with open(path, "w", encoding="utf-8") as log_file:
        for session in sessions:
            log_file.write(json.dumps(session.to_dict()))
            log_file.write("\n")


def _read_jsonl(path: PathLike) -> typing.Iterator[typing.Tuple[int, typing.Any]]:
    with open(path, encoding="utf-8") as log_file:
        for lineno, line in enumerate(log_file, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogParseError(path, lineno, exc.msg) from exc


def read_log(path: PathLike) -> list[SessionRecord]:
    """Reads sessions written by :py:func:`write_log`.

    :raises LogParseError: with the line number of a malformed line.
    """
    sessions = []
    for lineno, obj in _read_jsonl(path):
        try:
            sessions.append(SessionRecord.from_dict(obj))
        except (KeyError, TypeError, ValueError) as exc:
            raise LogParseError(path, lineno, f"invalid session: {exc}") from exc
    return sessions


GroundTruth = typing.Dict[int, typing.Dict[str, typing.Any]]
"""Per session: ``intent_bucket``, ``target_price`` and ``relevance``, a
mapping of ``item_id`` to true relevance probability."""


def write_ground_truth(ground_truth: GroundTruth, path: PathLike):
    """Writes the simulator's relevance oracle as JSON."""
    with open(path, "w", encoding="utf-8") as truth_file:
        json.dump(
            {
                str(session_id): {
                    **truth,
                    "relevance": {
                        str(item_id): p for item_id, p in truth["relevance"].items()
                    },
                }
                for session_id, truth in ground_truth.items()
            },
            truth_file,
        )


def read_ground_truth(path: PathLike) -> GroundTruth:
    """Inverse of :py:func:`write_ground_truth`."""
    with open(path, encoding="utf-8") as truth_file:
        raw = json.load(truth_file)
    return {
        int(session_id): {
            **truth,
            "relevance": {int(i): p for i, p in truth["relevance"].items()},
        }
        for session_id, truth in raw.items()
    }


def attach_soft_labels(
    sessions: typing.Iterable[SessionRecord], ground_truth: GroundTruth
) -> list[SessionRecord]:
    """Copies of ``sessions`` with oracle relevance as soft labels.

    :raises KeyError: if the oracle lacks a session.
    """
    labeled = []
    for session in sessions:
        relevance = ground_truth[session.session_id]["relevance"]
        session = copy.deepcopy(session)
        for query in session.queries:
            for candidate in query.candidates:
                candidate.soft_relevance = relevance.get(candidate.item_id)
        labeled.append(session)
    return labeled


@dataclasses.dataclass
class ContextItem:
    """One item of a training or evaluation context."""

    item_id: int
    features: list[float]
    label: float
    logged_rank: typing.Optional[int] = None
    clicked: bool = False


@dataclasses.dataclass
class TrainingContext:
    """One weighted (session, query) term of the empirical reward.

    :param context_weight: :math:`\\hat{v}_{q,s}`.
    :param segment: Price-intent bucket of the session.
    """

    session_id: int
    query_id: int
    items: list[ContextItem]
    context_features: list[float]
    context_weight: float
    segment: int

    def __post_init__(self):
        if len(self.items) < 2:
            raise ValueError(
                f"Context ({self.session_id}, {self.query_id}) needs >= 2 items"
            )
        if self.context_weight < 0:
            raise ValueError("Context weight must not be negative")

    def item_ids(self) -> np.ndarray:
        """``item_id`` per item."""
        return np.array([item.item_id for item in self.items], dtype=int)

    def item_features(self) -> np.ndarray:
        """Item feature matrix, one row per item."""
        return np.array([item.features for item in self.items], dtype=float)

    def labels(self) -> np.ndarray:
        """Logged labels per item."""
        return np.array([item.label for item in self.items], dtype=float)

    def to_dict(self) -> dict:
        """JSON-compatible representation."""
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, context: typing.Mapping) -> "TrainingContext":
        """Inverse of :py:meth:`to_dict`."""
        return cls(
            **{
                **context,
                "items": [ContextItem(**item) for item in context["items"]],
            }
        )


@dataclasses.dataclass
class ContextDataset:
    """Contexts built under one reward spec.

    :param spec_tag: :py:meth:`reward.RewardSpec.tag` of the spec.
    """

    spec_tag: str
    contexts: list[TrainingContext] = dataclasses.field(default_factory=list)

    def __len__(self):
        return len(self.contexts)

    def __iter__(self):
        return iter(self.contexts)

    def __getitem__(self, index):
        return self.contexts[index]

    def weights(self) -> np.ndarray:
        """Context weights in dataset order."""
        return np.array([c.context_weight for c in self.contexts], dtype=float)

    def segments(self) -> list[int]:
        """Sorted distinct segments."""
        return sorted({c.segment for c in self.contexts})


def write_dataset(dataset: ContextDataset, path: PathLike):
    """Writes a header line with the spec tag, then one context per line."""
    with open(path, "w", encoding="utf-8") as dataset_file:
        dataset_file.write(json.dumps({"spec_tag": dataset.spec_tag}))
        dataset_file.write("\n")
        for context in dataset:
            dataset_file.write(json.dumps(context.to_dict()))
            dataset_file.write("\n")


def read_dataset(path: PathLike) -> ContextDataset:
    """Inverse of :py:func:`write_dataset`.

    :raises LogParseError: with the line number of a malformed line.
    """
    dataset = None
    for lineno, obj in _read_jsonl(path):
        if dataset is None:
            if not isinstance(obj, dict) or "spec_tag" not in obj:
                raise LogParseError(path, lineno, "missing spec_tag header")
            dataset = ContextDataset(obj["spec_tag"])
            continue
        try:
            dataset.contexts.append(TrainingContext.from_dict(obj))
        except (KeyError, TypeError, ValueError) as exc:
            raise LogParseError(path, lineno, f"invalid context: {exc}") from exc
    if dataset is None:
        raise LogParseError(path, 1, "empty dataset file")
    return dataset


def _item_label(
    candidate: ItemRecord,
    clicked: bool,
    success_item: int,
    spec: reward.RewardSpec,
) -> float:
    if candidate.item_id == success_item:
        return 1.0
    if not clicked:
        return 0.0
    if spec.kind == reward.RewardKind.ENGAGEMENT_COUNT:
        return 1.0
    return spec.partial_label


def _context_items(
    query: QueryRecord,
    success_item: int,
    spec: reward.RewardSpec,
    negatives: typing.Optional[int],
    rng: typing.Optional[np.random.Generator],
) -> list[ContextItem]:
    clicked_items = set(query.clicked_items())
    items = []
    engaged = []
    for candidate in query.candidates:
        slot = query.slot_of(candidate.item_id)
        clicked = candidate.item_id in clicked_items
        label = _item_label(candidate, clicked, success_item, spec)
        engaged.append(label > 0)
        if spec.label_source == reward.LabelSource.SOFT:
            if candidate.soft_relevance is None:
                raise ValueError(
                    f"Item {candidate.item_id} of query {query.query_id} has no "
                    "soft label; attach an oracle with attach_soft_labels()"
                )
            label = candidate.soft_relevance
        items.append(
            ContextItem(
                item_id=candidate.item_id,
                features=list(candidate.features),
                label=label,
                logged_rank=slot + 1 if slot is not None else None,
                clicked=clicked,
            )
        )
    if negatives is None:
        return items
    assert rng is not None
    positives = [item for item, pos in zip(items, engaged) if pos]
    pool = [
        item
        for item, pos in zip(items, engaged)
        if not pos and item.logged_rank is not None and not item.clicked
    ]
    n_negatives = min(negatives, len(pool))
    picked = sorted(rng.choice(len(pool), size=n_negatives, replace=False))
    return positives + [pool[i] for i in picked]


def _session_contexts(
    session: SessionRecord,
    spec: reward.RewardSpec,
    buckets: typing.Optional[reward.ValueBuckets],
    chain: typing.Optional[reward.MarkovChain],
    negatives: typing.Optional[int],
    rng: typing.Optional[np.random.Generator],
) -> list[TrainingContext]:
    event = reward.success_event(session, spec.kind)
    if event is None or reward.session_value(session, spec, buckets) <= 0:
        return []
    success_item, success_query = event
    attribution = reward.attribute(
        session, success_item, spec.attribution, chain, success_query
    )
    contexts = []
    for query in session.queries:
        if attribution.get(query.query_id, 0.0) <= 0:
            continue
        items = _context_items(query, success_item, spec, negatives, rng)
        if len(items) < 2:
            logger.debug(
                "Dropping context (%d, %d) with %d items",
                session.session_id,
                query.query_id,
                len(items),
            )
            continue
        contexts.append(
            TrainingContext(
                session_id=session.session_id,
                query_id=query.query_id,
                items=items,
                context_features=list(query.context_features),
                context_weight=reward.context_weight(
                    session, query.query_id, spec, buckets, attribution
                ),
                segment=session.intent_bucket,
            )
        )
    return contexts


def _corpus_fits(
    sessions: typing.Sequence[SessionRecord],
    spec: reward.RewardSpec,
    buckets: typing.Optional[reward.ValueBuckets],
    chain: typing.Optional[reward.MarkovChain],
):
    if not sessions:
        return buckets, chain
    if spec.kind == reward.RewardKind.REVENUE and buckets is None:
        buckets = reward.fit_value_buckets(sessions, spec.n_value_buckets)
    if spec.attribution == reward.Attribution.MARKOV_MULTI_TOUCH and chain is None:
        chain = reward.fit_markov_chain(sessions, spec.kind)
    return buckets, chain


def _finish(spec: reward.RewardSpec, contexts: list[TrainingContext]):
    if spec.self_normalize and contexts:
        normalized = reward.normalize_weights([c.context_weight for c in contexts])
        for context, weight in zip(contexts, normalized):
            context.context_weight = float(weight)
    logger.info("Built %d contexts under %s", len(contexts), spec.tag())
    return ContextDataset(spec.tag(), contexts)


def build_training_set(
    sessions: typing.Sequence[SessionRecord],
    spec: reward.RewardSpec,
    negatives_per_context: int = 3,
    seed: int = 0,
    buckets: typing.Optional[reward.ValueBuckets] = None,
    chain: typing.Optional[reward.MarkovChain] = None,
) -> ContextDataset:
    """Training contexts with sampled negatives.

    One context per (session, query) with positive attributed mass. Items are
    the positives plus up to ``negatives_per_context`` impressed unengaged
    items, sampled without replacement with a generator derived from
    ``(seed, session_id)`` so that shards built separately concatenate to
    the same contexts.

    :param buckets: Value buckets; fitted on ``sessions`` if needed and not
                    given.
    :param chain: Markov chain; fitted on ``sessions`` if needed and not
                  given.
    """
    if negatives_per_context < 1:
        raise ValueError("negatives_per_context must be >= 1")
    buckets, chain = _corpus_fits(sessions, spec, buckets, chain)
    contexts = []
    for session in sessions:
        rng = np.random.default_rng([seed, session.session_id])
        contexts.extend(
            _session_contexts(
                session, spec, buckets, chain, negatives_per_context, rng
            )
        )
    return _finish(spec, contexts)


def build_eval_set(
    sessions: typing.Sequence[SessionRecord],
    spec: reward.RewardSpec,
    buckets: typing.Optional[reward.ValueBuckets] = None,
    chain: typing.Optional[reward.MarkovChain] = None,
) -> ContextDataset:
    """Evaluation contexts keeping every retrieved candidate; otherwise as
    :py:func:`build_training_set`."""
    buckets, chain = _corpus_fits(sessions, spec, buckets, chain)
    contexts = []
    for session in sessions:
        contexts.extend(_session_contexts(session, spec, buckets, chain, None, None))
    return _finish(spec, contexts)
