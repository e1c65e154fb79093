# -*- coding: utf-8 -*-
# vim:fenc=utf-8
#
# Copyright (C) 2025 TU Dresden
#
# Distributed under terms of the MIT license.

"""Synthetic marketplace.

Users with a price intent issue queries; each query retrieves candidates
from an :py:class:`ItemCatalog`, a ranker orders them and a position-based
click model decides on examinations, clicks and the purchase.
"""

import concurrent.futures
import dataclasses
import logging
import typing

import numpy as np
from scipy.special import expit  # type: ignore

from . import policy as policy_
from . import stats
from .config import ConfigError, check_segment_mix
from .logs import GroundTruth, ItemRecord, Purchase, QueryRecord, SessionRecord


logger = logging.getLogger(__name__)

ITEM_FEATURES = (
    "text_match",
    "log_price",
    "price_hint_ratio",
    "price_hint_gap",
    "item_quality",
)
CONTEXT_FEATURES = ("query_index", "prior_clicks", "intent_bucket")
N_FEATURES = len(ITEM_FEATURES) + len(CONTEXT_FEATURES)


@dataclasses.dataclass(frozen=True)
class Item:
    """A catalog item.

    :param features: Noisy view of ``quality`` followed by the standardized
                     log price.
    """

    item_id: int
    price: float
    quality: np.ndarray
    features: np.ndarray
    bucket: int


@dataclasses.dataclass
class ItemCatalog:
    """All items as arrays indexed by ``item_id``.

    :param boundaries: Lowest price of buckets ``1 .. n_buckets - 1``.
    """

    prices: np.ndarray
    quality: np.ndarray
    observed: np.ndarray
    log_price_z: np.ndarray
    buckets: np.ndarray
    boundaries: np.ndarray
    n_buckets: int

    def __len__(self):
        return len(self.prices)

    @property
    def n_latent(self) -> int:
        """Dimension of quality and intent vectors."""
        return self.quality.shape[1]

    def item(self, item_id: int) -> Item:
        """Materializes one item."""
        return Item(
            item_id=item_id,
            price=float(self.prices[item_id]),
            quality=self.quality[item_id],
            features=np.append(self.observed[item_id], self.log_price_z[item_id]),
            bucket=int(self.buckets[item_id]),
        )

    def bucket_of_price(self, price: float) -> int:
        """Price bucket a price falls into."""
        return int(np.searchsorted(self.boundaries, price, side="right"))

    def bucket_items(self, bucket: int) -> np.ndarray:
        """``item_id`` s of one bucket."""
        return np.flatnonzero(self.buckets == bucket)


def sample_catalog(
    n_items: int,
    n_buckets: int,
    seed: int,
    n_latent: int = 8,
    feature_noise: float = 0.3,
    price_log_mean: float = 3.5,
    price_log_sigma: float = 1.0,
) -> ItemCatalog:
    """Samples a catalog with log-normal prices.

    Buckets are price-rank quantiles, so every bucket holds items as long as
    ``n_items >= n_buckets``.

    :raises ConfigError: for invalid sizes.
    """
    if not n_items >= n_buckets >= 1:
        raise ConfigError(
            f"catalog: need n_items >= n_buckets >= 1, got n_items={n_items}, "
            f"n_buckets={n_buckets}"
        )
    if n_latent < 1:
        raise ConfigError("catalog: n_latent must be positive")
    rng = np.random.default_rng(seed)
    prices = rng.lognormal(price_log_mean, price_log_sigma, n_items)
    directions = rng.normal(size=(n_items, n_latent))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    quality = directions * rng.uniform(0.5, 1.5, (n_items, 1))
    observed = quality + rng.normal(0.0, feature_noise, quality.shape)
    log_prices = np.log(prices)
    spread = log_prices.std()
    log_price_z = (log_prices - log_prices.mean()) / (spread if spread > 0 else 1.0)
    price_rank = np.empty(n_items, dtype=int)
    price_rank[np.argsort(prices, kind="stable")] = np.arange(n_items)
    buckets = price_rank * n_buckets // n_items
    boundaries = np.array([prices[buckets == b].min() for b in range(1, n_buckets)])
    logger.debug("Price bucket boundaries: %s", boundaries)
    return ItemCatalog(
        prices, quality, observed, log_price_z, buckets, boundaries, n_buckets
    )


@dataclasses.dataclass(frozen=True)
class IntentParams:
    """How intents depend on their price bucket."""

    depth_base: float = 1.0
    depth_slope: float = 1.0
    resolve_base: float = 0.6
    resolve_decay: float = 0.75
    query_noise: float = 0.35
    price_hint_noise: float = 0.25

    @classmethod
    def from_mapping(cls, intents: typing.Mapping) -> "IntentParams":
        """Picks the known keys of an ``intents`` config section."""
        return cls(**_known(cls, intents))


@dataclasses.dataclass(frozen=True)
class UserIntent:
    """Latent shopping intent of one session."""

    intent_vector: np.ndarray
    price_intent_bucket: int
    target_price: float
    browse_depth: int
    purchase_resolve: float

    def __post_init__(self):
        if self.browse_depth < 1:
            raise ValueError("browse_depth must be >= 1")
        if not 0 <= self.purchase_resolve <= 1:
            raise ValueError("purchase_resolve not in [0, 1]")
        if self.target_price <= 0:
            raise ValueError("target_price must be positive")


def sample_intent(
    segment_mix: typing.Optional[typing.Sequence[float]],
    rng: np.random.Generator,
    catalog: ItemCatalog,
    params: IntentParams = IntentParams(),
) -> UserIntent:
    """Draws a price bucket from ``segment_mix``, then an intent in it.

    Higher buckets browse longer (``1 + Poisson(depth_base + depth_slope *
    b)`` queries) and convert a relevant click less often
    (``resolve_base * resolve_decay ** b``). The target price is the price of
    a random item of the bucket with a small multiplicative jitter.

    :param segment_mix: Bucket probabilities, uniform if ``None``.
    :raises ConfigError: for a non-normalized mix.
    """
    if segment_mix is None:
        segment_mix = np.full(catalog.n_buckets, 1.0 / catalog.n_buckets)
    check_segment_mix(segment_mix, catalog.n_buckets)
    bucket = int(rng.choice(catalog.n_buckets, p=np.asarray(segment_mix)))
    vector = rng.normal(size=catalog.n_latent)
    vector /= np.linalg.norm(vector)
    anchor = rng.choice(catalog.bucket_items(bucket))
    return UserIntent(
        intent_vector=vector,
        price_intent_bucket=bucket,
        target_price=float(catalog.prices[anchor] * np.exp(rng.normal(0.0, 0.1))),
        browse_depth=1
        + int(rng.poisson(params.depth_base + params.depth_slope * bucket)),
        purchase_resolve=params.resolve_base * params.resolve_decay**bucket,
    )


@dataclasses.dataclass(frozen=True)
class ClickModelParams:
    """Position-based examination, relevance link and purchase fit.

    :param examination_exponent: :math:`\\eta` of :math:`e(r) = r^{-\\eta}`.
    :param price_sensitivity: Damping of items priced above the target.
    :param bargain_appeal: Logit boost of items priced below the target.
    :param fit_sensitivity: How fast the purchase chance of a clicked item
                            falls with its discount to the target price.
    """

    examination_exponent: float = 1.0
    relevance_sharpness: float = 6.0
    affinity_offset: float = 0.6
    price_sensitivity: float = 1.0
    bargain_appeal: float = 1.5
    fit_sensitivity: float = 4.0
    purchase_threshold: float = 0.5

    def __post_init__(self):
        if self.examination_exponent <= 0 or self.relevance_sharpness <= 0:
            raise ConfigError(
                "click_model: examination_exponent and relevance_sharpness must "
                "be positive"
            )
        if min(self.price_sensitivity, self.bargain_appeal, self.fit_sensitivity) < 0:
            raise ConfigError(
                "click_model: price_sensitivity, bargain_appeal and "
                "fit_sensitivity must not be negative"
            )

    def examination(self, ranks) -> np.ndarray:
        """:math:`e(r)` for 1-based ranks."""
        return np.asarray(ranks, dtype=float) ** -self.examination_exponent

    def purchase_fit(self, prices, target_price: float) -> np.ndarray:
        """Chance that a clicked item priced ``prices`` matches a buyer
        aiming at ``target_price``; 1 at or above the target."""
        gap = np.log(np.asarray(prices, dtype=float) / target_price)
        return np.exp(-self.fit_sensitivity * np.maximum(-gap, 0.0) ** 2)

    @classmethod
    def from_mapping(cls, click_model: typing.Mapping) -> "ClickModelParams":
        """Picks the known keys of a ``click_model`` config section."""
        return cls(**_known(cls, click_model))


def relevance_probs(
    quality: np.ndarray,
    prices: np.ndarray,
    intent: UserIntent,
    params: ClickModelParams = ClickModelParams(),
) -> np.ndarray:
    """Vectorized :py:func:`relevance_prob` over rows of ``quality``."""
    quality = np.atleast_2d(quality)
    if quality.shape[1] != len(intent.intent_vector):
        raise ValueError(
            f"Quality dimension {quality.shape[1]} does not match intent "
            f"dimension {len(intent.intent_vector)}"
        )
    affinity = quality @ intent.intent_vector
    gap = np.log(np.asarray(prices, dtype=float) / intent.target_price)
    logits = params.relevance_sharpness * (affinity - params.affinity_offset)
    logits = logits + params.bargain_appeal * np.tanh(np.maximum(-gap, 0.0))
    damping = np.exp(-params.price_sensitivity * np.maximum(gap, 0.0) ** 2)
    probs = expit(logits) * damping
    return np.clip(probs, 1e-12, 1.0 - 1e-12)


def relevance_prob(
    item: Item, intent: UserIntent, params: ClickModelParams = ClickModelParams()
) -> float:
    """:math:`P(R=1)`: logistic in the affinity of intent and quality.

    Items cheaper than the target price get a bounded logit boost, pricier
    ones are damped by their squared log price ratio to the target.

    :raises ValueError: on a dimension mismatch.
    """
    return float(relevance_probs(item.quality, [item.price], intent, params)[0])


@dataclasses.dataclass
class CandidateSet:
    """Candidates of one query with their logged features and true
    relevance."""

    item_ids: np.ndarray
    features: np.ndarray
    prices: np.ndarray
    relevance: np.ndarray

    def __len__(self):
        return len(self.item_ids)


@dataclasses.dataclass
class SERPOutcome:
    """What happened on one SERP.

    :param ranking: All candidate ``item_id`` s in ranked order.
    :param examined: Per impressed slot.
    :param clicked: Per impressed slot.
    """

    ranking: np.ndarray
    examined: np.ndarray
    clicked: np.ndarray
    purchased_item: typing.Optional[int] = None

    @property
    def impressed(self) -> np.ndarray:
        """``item_id`` per impressed slot."""
        return self.ranking[: len(self.examined)]

    @property
    def click_slots(self) -> list[int]:
        """0-based clicked slots."""
        return np.flatnonzero(self.clicked).tolist()


class RandomRanker(policy_.BaseRanker):
    """Uniformly random permutation, the randomized logging policy."""

    # pylint: disable=too-few-public-methods
    def rank_candidates(
        self, item_ids, item_features, context_features, relevance=None, rng=None
    ):
        if rng is None:
            raise ValueError("RandomRanker needs a random generator")
        return rng.permutation(len(item_ids))


class OracleRanker(policy_.BaseRanker):
    """Sorts by true relevance, optionally perturbed by Gaussian noise.

    :param noise: Standard deviation of the score noise.
    """

    # pylint: disable=too-few-public-methods
    def __init__(self, noise: float = 0.0):
        self.noise = noise

    def rank_candidates(
        self, item_ids, item_features, context_features, relevance=None, rng=None
    ):
        if relevance is None:
            raise ValueError("OracleRanker needs the true relevance")
        scores = np.asarray(relevance, dtype=float)
        if self.noise > 0:
            if rng is None:
                raise ValueError("A noisy OracleRanker needs a random generator")
            scores = scores + rng.normal(0.0, self.noise, len(scores))
        return policy_.argsort_scores(scores, item_ids)


def make_logging_policy(name: str, noise: float = 0.3) -> policy_.BaseRanker:
    """Logging policy by config name: ``random``, ``oracle``,
    ``oracle-noisy`` or a path to a model JSON file."""
    if name == "random":
        return RandomRanker()
    if name == "oracle":
        return OracleRanker()
    if name == "oracle-noisy":
        return OracleRanker(noise)
    try:
        return policy_.load_policy(name)
    except OSError as exc:
        raise ConfigError(f"simulation: cannot load logging policy {name}") from exc


def simulate_serp(
    policy: policy_.BaseRanker,
    candidates: CandidateSet,
    intent: UserIntent,
    params: ClickModelParams,
    rng: np.random.Generator,
    page_size: typing.Optional[int] = None,
    context_features: typing.Sequence[float] = (),
) -> SERPOutcome:
    """Ranks the candidates and draws the user's reaction.

    The item at rank ``r`` is examined with probability :math:`e(r)` and
    clicked if examined and relevant. The first clicked item whose relevance
    exceeds the purchase threshold and whose resolve draw succeeds is
    purchased; the resolve chance is scaled by
    :py:meth:`ClickModelParams.purchase_fit`.

    :param page_size: Impressed slots, all candidates if ``None``.
    :raises ValueError: for an empty candidate set.
    """
    if len(candidates) == 0:
        raise ValueError("Cannot rank an empty candidate set")
    order = np.asarray(
        policy.rank_candidates(
            candidates.item_ids,
            candidates.features,
            np.asarray(context_features, dtype=float),
            relevance=candidates.relevance,
            rng=rng,
        )
    )
    n_slots = len(order) if page_size is None else min(page_size, len(order))
    page = order[:n_slots]
    relevance = candidates.relevance[page]
    examined = rng.random(n_slots) < params.examination(np.arange(1, n_slots + 1))
    clicked = examined & (rng.random(n_slots) < relevance)
    fit = params.purchase_fit(candidates.prices[page], intent.target_price)
    resolved = rng.random(n_slots) < intent.purchase_resolve * fit
    eligible = np.flatnonzero(
        clicked & (relevance > params.purchase_threshold) & resolved
    )
    purchased = int(candidates.item_ids[page[eligible[0]]]) if eligible.size else None
    return SERPOutcome(candidates.item_ids[order], examined, clicked, purchased)


@dataclasses.dataclass(frozen=True)
class SimulationParams:
    """Retrieval and page layout.

    :param n_candidates: Candidates retrieved per query (K).
    :param page_size: Impressed slots per SERP (N).
    :param max_queries: Cap on browse depth, none if ``None``.
    """

    n_candidates: int = 25
    page_size: int = 10
    retrieval_noise: float = 0.3
    max_queries: typing.Optional[int] = None

    @classmethod
    def from_mapping(cls, simulation: typing.Mapping) -> "SimulationParams":
        """Picks the known keys of a ``simulation`` config section."""
        return cls(**_known(cls, simulation))


def _known(cls, section: typing.Mapping) -> dict:
    names = {field.name for field in dataclasses.fields(cls)}
    return {k: v for k, v in section.items() if k in names}


def _retrieve(
    catalog: ItemCatalog,
    intent: UserIntent,
    query_index: int,
    intents: IntentParams,
    simulation: SimulationParams,
    click_model: ClickModelParams,
    rng: np.random.Generator,
) -> CandidateSet:
    noise = rng.normal(0.0, intents.query_noise, catalog.n_latent)
    query = intent.intent_vector + noise
    query /= np.linalg.norm(query)
    price_hint = intent.target_price * np.exp(rng.normal(0.0, intents.price_hint_noise))
    text_match = catalog.observed @ query
    noisy = text_match + rng.normal(0.0, simulation.retrieval_noise, len(catalog))
    n_candidates = min(simulation.n_candidates, len(catalog))
    top = np.argpartition(-noisy, n_candidates - 1)[:n_candidates]
    top = top[np.lexsort((top, -noisy[top]))]
    prices = catalog.prices[top]
    features = np.column_stack(
        [
            text_match[top],
            catalog.log_price_z[top],
            np.log(prices / price_hint),
            np.abs(np.log(prices / price_hint)),
            np.linalg.norm(catalog.observed[top], axis=1),
        ]
    )
    logger.debug("Query %d retrieved %d candidates", query_index, n_candidates)
    return CandidateSet(
        top,
        features,
        prices,
        relevance_probs(catalog.quality[top], prices, intent, click_model),
    )


@dataclasses.dataclass(frozen=True)
class Simulator:
    """Everything a session needs besides the ranker and the intent."""

    catalog: ItemCatalog
    intents: IntentParams = IntentParams()
    click_model: ClickModelParams = ClickModelParams()
    simulation: SimulationParams = SimulationParams()
    segment_mix: typing.Optional[typing.Sequence[float]] = None

    @classmethod
    def from_config(
        cls, config, catalog: typing.Optional[ItemCatalog] = None
    ) -> "Simulator":
        """Builds a simulator from config sections, sampling the catalog
        with the config seed unless one is given."""
        if catalog is None:
            catalog = sample_catalog(
                seed=config.get("seed"), **config.get("catalog", {})
            )
        intents = config.get("intents", {})
        return cls(
            catalog,
            IntentParams.from_mapping(intents),
            ClickModelParams.from_mapping(config.get("click_model", {})),
            SimulationParams.from_mapping(config.get("simulation", {})),
            intents.get("segment_mix"),
        )

    def sample_intent(self, rng: np.random.Generator) -> UserIntent:
        """:py:func:`sample_intent` with this simulator's settings."""
        return sample_intent(self.segment_mix, rng, self.catalog, self.intents)

    def run_session(
        self,
        policy: policy_.BaseRanker,
        intent: UserIntent,
        rng: np.random.Generator,
        session_id: int = 0,
    ) -> typing.Tuple[SessionRecord, dict]:
        """Simulates a session and its ground-truth entry."""
        n_queries = intent.browse_depth
        if self.simulation.max_queries is not None:
            n_queries = min(n_queries, self.simulation.max_queries)
        queries: list[QueryRecord] = []
        relevance: dict[int, float] = {}
        purchase = None
        prior_clicks = 0
        for query_index in range(n_queries):
            candidates = _retrieve(
                self.catalog,
                intent,
                query_index,
                self.intents,
                self.simulation,
                self.click_model,
                rng,
            )
            context = [
                float(query_index),
                float(prior_clicks),
                float(intent.price_intent_bucket),
            ]
            outcome = simulate_serp(
                policy,
                candidates,
                intent,
                self.click_model,
                rng,
                self.simulation.page_size,
                context,
            )
            impressed = set(outcome.impressed.tolist())
            queries.append(
                QueryRecord(
                    query_id=query_index,
                    candidates=[
                        ItemRecord(
                            item_id=int(item_id),
                            features=features.tolist(),
                            price=float(price),
                            impressed=int(item_id) in impressed,
                        )
                        for item_id, features, price in zip(
                            candidates.item_ids, candidates.features, candidates.prices
                        )
                    ],
                    ranking=outcome.impressed.tolist(),
                    clicks=outcome.click_slots,
                    context_features=context,
                )
            )
            relevance.update(
                zip(candidates.item_ids.tolist(), candidates.relevance.tolist())
            )
            prior_clicks += len(outcome.click_slots)
            if outcome.purchased_item is not None:
                purchase = Purchase(
                    item_id=outcome.purchased_item,
                    price=float(self.catalog.prices[outcome.purchased_item]),
                    query_id=query_index,
                )
                break
        truth = {
            "intent_bucket": intent.price_intent_bucket,
            "target_price": intent.target_price,
            "relevance": relevance,
        }
        record = SessionRecord(
            session_id=session_id,
            intent_bucket=intent.price_intent_bucket,
            queries=queries,
            purchase=purchase,
        )
        return record, truth


def simulate_session(
    policy: policy_.BaseRanker,
    intent: UserIntent,
    catalog: ItemCatalog,
    params: ClickModelParams,
    rng: np.random.Generator,
    simulation: SimulationParams = SimulationParams(),
    intents: IntentParams = IntentParams(),
    session_id: int = 0,
) -> SessionRecord:
    """One user journey of up to ``browse_depth`` queries, ending early on a
    purchase."""
    simulator = Simulator(catalog, intents, params, simulation)
    return simulator.run_session(policy, intent, rng, session_id)[0]


def _session_rng(seed: int, session_id: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, session_id, stream]))


def _map_sessions(function, session_ids, threads: int = 1) -> list:
    if threads <= 1:
        return [function(session_id) for session_id in session_ids]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(function, session_ids))


def simulate_logs(
    policy: policy_.BaseRanker,
    n_sessions: int,
    config,
    seed: int,
    catalog: typing.Optional[ItemCatalog] = None,
    threads: int = 1,
    first_session_id: int = 0,
) -> typing.Tuple[list[SessionRecord], GroundTruth]:
    """Logs ``n_sessions`` sessions of ``policy``.

    Session ``i`` draws from its own generator derived from ``(seed, i)``,
    so shards generated separately or on ``threads`` workers concatenate to
    the same log.

    :param config: :py:class:`valuerank.config.Config` or a mapping of the
                   same sections.
    :returns: The sessions and their ground truth.
    """
    simulator = Simulator.from_config(config, catalog)

    def session(session_id):
        rng = _session_rng(seed, session_id)
        intent = simulator.sample_intent(rng)
        return simulator.run_session(policy, intent, rng, session_id)

    session_ids = range(first_session_id, first_session_id + n_sessions)
    results = _map_sessions(session, session_ids, threads)
    logger.info("Simulated %d sessions", len(results))
    return [r[0] for r in results], {r[0].session_id: r[1] for r in results}


@dataclasses.dataclass
class ArmSummary:
    """Totals of one AB-test arm."""

    sessions: int
    sessions_with_engagement: int
    serps: int
    serps_with_engagement: int
    sessions_with_purchase: int
    total_revenue: float
    per_bucket: dict[int, dict[str, float]]


AB_METRICS = (
    "sessions_with_engagement",
    "serps_with_engagement",
    "sessions_with_purchase",
    "total_revenue",
)


def _session_metrics(session: SessionRecord) -> list[float]:
    engaged_serps = sum(1 for query in session.queries if query.clicks)
    purchase = session.purchase
    return [
        float(engaged_serps > 0),
        float(engaged_serps),
        float(purchase is not None),
        purchase.price if purchase is not None else 0.0,
    ]


def _summarize(metrics: np.ndarray, serps: np.ndarray, buckets: np.ndarray, n_buckets):
    return ArmSummary(
        sessions=len(metrics),
        sessions_with_engagement=int(metrics[:, 0].sum()),
        serps=int(serps.sum()),
        serps_with_engagement=int(metrics[:, 1].sum()),
        sessions_with_purchase=int(metrics[:, 2].sum()),
        total_revenue=float(metrics[:, 3].sum()),
        per_bucket={
            b: {
                "sessions": int(np.sum(buckets == b)),
                "sessions_with_purchase": int(metrics[buckets == b, 2].sum()),
                "revenue": float(metrics[buckets == b, 3].sum()),
            }
            for b in range(n_buckets)
        },
    )


@dataclasses.dataclass
class ABReport:
    """Outcome of :py:func:`run_ab_test`.

    :param lifts: Lift of arm ``a`` over arm ``b`` per metric name; ``None``
                  where arm ``b``'s total is zero.
    """

    arms: dict[str, ArmSummary]
    lifts: dict[str, typing.Optional[stats.Lift]]

    def to_dict(self) -> dict:
        """JSON-compatible representation."""
        return {
            "arms": {
                name: {
                    **dataclasses.asdict(arm),
                    "per_bucket": {str(b): v for b, v in arm.per_bucket.items()},
                }
                for name, arm in self.arms.items()
            },
            "lifts": {
                name: lift.to_dict() if lift is not None else None
                for name, lift in self.lifts.items()
            },
        }


def run_ab_test(
    policy_a: policy_.BaseRanker,
    policy_b: policy_.BaseRanker,
    n_sessions: int,
    config,
    seed: int,
    catalog: typing.Optional[ItemCatalog] = None,
    common_random_numbers: bool = False,
    n_bootstrap: int = stats.DEFAULT_N_BOOTSTRAP,
    confidence: float = stats.DEFAULT_CONFIDENCE,
    threads: int = 1,
) -> ABReport:
    """Paired AB test: every sampled intent is served once by each arm.

    Both arms see the same intent stream. Query, retrieval and click
    randomness is independent per arm unless ``common_random_numbers`` is
    set, in which case both arms replay the same random stream.

    :raises ValueError: if ``n_sessions < 2``.
    """
    if n_sessions < 2:
        raise ValueError("An AB test needs at least 2 sessions")
    simulator = Simulator.from_config(config, catalog)
    streams = {"a": 1, "b": 1 if common_random_numbers else 2}
    arms = {"a": policy_a, "b": policy_b}

    def session(session_id):
        intent = simulator.sample_intent(_session_rng(seed, session_id))
        rows = []
        for name, ranker in arms.items():
            rng = _session_rng(seed, session_id, streams[name])
            record, _ = simulator.run_session(ranker, intent, rng, session_id)
            rows.append((_session_metrics(record), len(record.queries)))
        return intent.price_intent_bucket, rows

    results = _map_sessions(session, range(n_sessions), threads)
    buckets = np.array([bucket for bucket, _ in results])
    metrics = {
        name: np.array([rows[i][0] for _, rows in results])
        for i, name in enumerate(arms)
    }
    serps = {
        name: np.array([rows[i][1] for _, rows in results])
        for i, name in enumerate(arms)
    }
    n_buckets = simulator.catalog.n_buckets

    def lift(a, b):
        return stats.paired_lift(a, b, n_bootstrap, confidence, seed)

    lifts = {
        metric: lift(metrics["a"][:, i], metrics["b"][:, i])
        for i, metric in enumerate(AB_METRICS)
    }
    for bucket in range(n_buckets):
        mask = buckets == bucket
        if not mask.any():
            continue
        lifts[f"sessions_with_purchase[{bucket}]"] = lift(
            metrics["a"][mask, 2], metrics["b"][mask, 2]
        )
        lifts[f"total_revenue[{bucket}]"] = lift(
            metrics["a"][mask, 3], metrics["b"][mask, 3]
        )
    logger.info("AB test over %d paired sessions done", n_sessions)
    return ABReport(
        {
            name: _summarize(metrics[name], serps[name], buckets, n_buckets)
            for name in arms
        },
        lifts,
    )
