# -*- coding: utf-8 -*-
# vim:fenc=utf-8
#
# Copyright (C) 2025 TU Dresden
#
# Distributed under terms of the MIT license.

"""Empirical marketplace expected-reward machinery.

Rank discounts and fitted propensities, in-session success attribution,
session value distributions, variance reduction of context weights and the
per-query DCG reward estimate.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import logging
import typing

import numpy as np

if typing.TYPE_CHECKING:  # pragma: no cover
    from .logs import QueryRecord, SessionRecord, TrainingContext


logger = logging.getLogger(__name__)

DEFAULT_CLIPPING_CAP = 10.0
DEFAULT_LABEL_CAP = 10.0
DEFAULT_PARTIAL_LABEL = 0.2
DEFAULT_N_VALUE_BUCKETS = 5

AttributionDistribution = typing.Dict[int, float]
"""Probability mass over the ``query_id`` s of one session."""


class FitError(RuntimeError):
    """Raised when a corpus-level fit has too little data."""


class RewardKind(enum.Enum):
    """Strategic reward choice of the marketplace.

    - :py:attr:`ENGAGEMENT_COUNT`: sessions with at least one click
    - :py:attr:`PURCHASE_COUNT`: sessions with a purchase
    - :py:attr:`REVENUE`: purchases valued by the revenue share of their
      price bucket
    """

    ENGAGEMENT_COUNT = "engagement_count"
    PURCHASE_COUNT = "purchase_count"
    REVENUE = "revenue"


class Attribution(enum.Enum):
    """In-session success attribution scheme."""

    LAST_TOUCH = "last_touch"
    ALL_TOUCH = "all_touch"
    MARKOV_MULTI_TOUCH = "markov_multi_touch"


class LabelSource(enum.Enum):
    """Where item labels of training contexts come from."""

    CLICKS = "clicks"
    SOFT = "soft"


@dataclasses.dataclass(frozen=True)
class RewardSpec:
    """The reward a ranking policy is trained and evaluated for.

    :param kind: What a session is worth.
    :param attribution: How session success is spread over its queries.
    :param clipping_cap: Cap on raw context weights, ``None`` disables
                         clipping.
    :param self_normalize: Normalize context weights over a dataset to sum
                           to 1.
    :param idcg_normalize: Divide per-query rewards and swap deltas by the
                           ideal DCG.
    :param n_value_buckets: Number of value buckets for
                            :py:attr:`RewardKind.REVENUE`.
    :param label_source: Logged clicks or oracle soft labels.
    :param partial_label: Label of clicked but not purchased items under
                          purchase-based kinds.
    :param label_cap: Cap on inverse-propensity debiased labels.
    """

    kind: RewardKind
    attribution: Attribution
    clipping_cap: typing.Optional[float] = DEFAULT_CLIPPING_CAP
    self_normalize: bool = True
    idcg_normalize: bool = True
    n_value_buckets: int = DEFAULT_N_VALUE_BUCKETS
    label_source: LabelSource = LabelSource.CLICKS
    partial_label: float = DEFAULT_PARTIAL_LABEL
    label_cap: float = DEFAULT_LABEL_CAP

    def __post_init__(self):
        if self.kind == RewardKind.REVENUE and self.n_value_buckets < 1:
            raise ValueError("Revenue reward requires n_value_buckets >= 1")
        if self.clipping_cap is not None and self.clipping_cap <= 0:
            raise ValueError(f"clipping_cap {self.clipping_cap} must be positive")
        if not 0.0 <= self.partial_label <= 1.0:
            raise ValueError(f"partial_label {self.partial_label} not in [0, 1]")
        if self.label_cap <= 0:
            raise ValueError(f"label_cap {self.label_cap} must be positive")

    def to_dict(self) -> dict:
        """JSON-compatible representation."""
        return {
            field.name: (
                getattr(self, field.name).value
                if isinstance(getattr(self, field.name), enum.Enum)
                else getattr(self, field.name)
            )
            for field in dataclasses.fields(self)
        }

    @classmethod
    def from_dict(cls, spec: typing.Mapping) -> "RewardSpec":
        """Builds a spec from :py:meth:`to_dict` output or a config section.

        :raises ValueError: for unknown fields or enum values.
        """
        known = {field.name for field in dataclasses.fields(cls)}
        unknown = set(spec) - known
        if unknown:
            raise ValueError(f"Unknown reward spec fields: {sorted(unknown)}")
        values = dict(spec)
        for name, enum_type in (
            ("kind", RewardKind),
            ("attribution", Attribution),
            ("label_source", LabelSource),
        ):
            if name in values and not isinstance(values[name], enum_type):
                values[name] = enum_type(values[name])
        return cls(**values)

    def tag(self) -> str:
        """Identifier of this spec attached to datasets built with it."""
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        digest = hashlib.sha1(canonical.encode("utf-8")).hexdigest()[:10]
        return f"{self.kind.value}/{self.attribution.value}/{digest}"


SPEC_PRESETS: dict[str, RewardSpec] = {
    "engagement": RewardSpec(RewardKind.ENGAGEMENT_COUNT, Attribution.LAST_TOUCH),
    "purchase": RewardSpec(RewardKind.PURCHASE_COUNT, Attribution.ALL_TOUCH),
    "revenue": RewardSpec(RewardKind.REVENUE, Attribution.ALL_TOUCH),
}


def get_spec(
    name: str, custom: typing.Optional[typing.Mapping[str, typing.Mapping]] = None
) -> RewardSpec:
    """Looks up a named reward spec.

    :param name: Name of a preset or of a custom spec.
    :param custom: (Optional) named field mappings; an entry named like a
                   preset overrides fields of that preset.
    :raises ValueError: listing valid names if ``name`` is unknown.
    """
    custom = custom or {}
    if name in custom:
        base = SPEC_PRESETS[name].to_dict() if name in SPEC_PRESETS else {}
        base.update(custom[name])
        return RewardSpec.from_dict(base)
    try:
        return SPEC_PRESETS[name]
    except KeyError as exc:
        valid = sorted(set(SPEC_PRESETS) | set(custom))
        raise ValueError(
            f"Unknown reward spec {name!r}; valid names: {', '.join(valid)}"
        ) from exc


def rank_discount(r: int) -> float:
    """Vanilla log rank discount :math:`1 / \\log_2(1 + r)`.

    >>> rank_discount(3)
    0.5

    :param r: 1-based rank.
    :raises ValueError: if ``r < 1``.
    """
    if r < 1:
        raise ValueError(f"Rank {r} must be >= 1")
    return float(1.0 / np.log2(1.0 + r))


class DiscountKind(enum.Enum):
    """Origin of a :py:class:`RankDiscount`."""

    LOG = "log"
    FITTED = "fitted"


@dataclasses.dataclass(frozen=True)
class RankDiscount:
    """Per-rank discount or examination propensity.

    :param kind: :py:attr:`DiscountKind.LOG` for :py:func:`rank_discount`,
                 :py:attr:`DiscountKind.FITTED` for a fitted power law.
    :param fitted_curve: Fitted values for ranks ``1..len(fitted_curve)``,
                         ``fitted_curve[0] == 1``.
    :param exponent: Fitted power-law exponent, used beyond the curve.
    """

    kind: DiscountKind = DiscountKind.LOG
    fitted_curve: typing.Optional[typing.Tuple[float, ...]] = None
    exponent: typing.Optional[float] = None

    def __post_init__(self):
        if self.kind == DiscountKind.FITTED:
            if not self.fitted_curve or self.exponent is None:
                raise ValueError("Fitted discount needs a curve and an exponent")
            curve = np.asarray(self.fitted_curve)
            if abs(curve[0] - 1.0) > 1e-12 or np.any(np.diff(curve) > 0):
                raise ValueError("Fitted discount must start at 1 and not increase")

    def __call__(self, r: int) -> float:
        if r < 1:
            raise ValueError(f"Rank {r} must be >= 1")
        if self.kind == DiscountKind.LOG:
            return rank_discount(r)
        assert self.fitted_curve is not None and self.exponent is not None
        if r <= len(self.fitted_curve):
            return self.fitted_curve[r - 1]
        return float(r ** (-self.exponent))

    def values(self, n_ranks: int) -> np.ndarray:
        """Discounts for ranks ``1..n_ranks``."""
        ranks = np.arange(1, n_ranks + 1, dtype=float)
        if self.kind == DiscountKind.LOG:
            return 1.0 / np.log2(1.0 + ranks)
        return np.array([self(int(r)) for r in ranks])

    def to_dict(self) -> dict:
        """JSON-compatible representation."""
        return {
            "kind": self.kind.value,
            "fitted_curve": (
                list(self.fitted_curve) if self.fitted_curve is not None else None
            ),
            "exponent": self.exponent,
        }

    @classmethod
    def from_dict(cls, discount: typing.Mapping) -> "RankDiscount":
        """Inverse of :py:meth:`to_dict`."""
        curve = discount.get("fitted_curve")
        return cls(
            kind=DiscountKind(discount["kind"]),
            fitted_curve=tuple(curve) if curve is not None else None,
            exponent=discount.get("exponent"),
        )


LOG_DISCOUNT = RankDiscount()


def fit_propensity_curve(
    randomized_logs: typing.Iterable[SessionRecord],
) -> RankDiscount:
    """Fits examination propensities :math:`e(r) = r^{-\\eta}` from logs of a
    uniformly random logging policy.

    Under random placement the click-through rate at rank ``r`` is ``e(r)``
    times the average relevance, so the least-squares slope of log CTR over
    log rank estimates ``-eta``.

    :raises FitError: if fewer than two ranks received clicks.
    """
    impressions: dict[int, int] = {}
    clicks: dict[int, int] = {}
    for session in randomized_logs:
        for query in session.queries:
            for slot in range(len(query.ranking)):
                impressions[slot + 1] = impressions.get(slot + 1, 0) + 1
            for slot in query.clicks:
                clicks[slot + 1] = clicks.get(slot + 1, 0) + 1
    ranks = sorted(r for r in clicks if clicks[r] > 0)
    if len(ranks) < 2:
        raise FitError(f"Need clicks on at least 2 ranks, got {len(ranks)}")
    log_rank = np.log(np.array(ranks, dtype=float))
    log_ctr = np.log(np.array([clicks[r] / impressions[r] for r in ranks]))
    slope, _ = np.polyfit(log_rank, log_ctr, 1)
    exponent = float(max(-slope, 0.0))
    n_ranks = max(impressions)
    curve = tuple(float(r ** (-exponent)) for r in range(1, n_ranks + 1))
    logger.info("Fitted examination exponent %.4f over %d ranks", exponent, n_ranks)
    return RankDiscount(DiscountKind.FITTED, curve, exponent)


def success_event(
    session: SessionRecord, kind: RewardKind
) -> typing.Optional[typing.Tuple[int, int]]:
    """The ``(item_id, query_id)`` of a session's success event.

    For :py:attr:`RewardKind.ENGAGEMENT_COUNT` this is the last click (the
    lowest clicked slot of the last query with clicks), otherwise the
    purchase.

    :returns: ``None`` if the session has no success event under ``kind``.
    """
    if kind == RewardKind.ENGAGEMENT_COUNT:
        for query in reversed(session.queries):
            if query.clicks:
                return query.ranking[max(query.clicks)], query.query_id
        return None
    if session.purchase is None:
        return None
    return session.purchase.item_id, session.purchase.query_id


def _success_query(session: SessionRecord, success_item: int) -> int:
    if session.purchase is not None and session.purchase.item_id == success_item:
        return session.purchase.query_id
    for query in reversed(session.queries):
        if any(query.ranking[slot] == success_item for slot in query.clicks):
            return query.query_id
    return session.queries[-1].query_id


def _last_touch(query_id: int) -> AttributionDistribution:
    return {query_id: 1.0}


def attribute(
    session: SessionRecord,
    success_item: int,
    scheme: Attribution,
    chain: typing.Optional["MarkovChain"] = None,
    success_query: typing.Optional[int] = None,
) -> AttributionDistribution:
    """Spreads a session's success over its queries.

    Only queries up to and including the success query are touch points.

    :param session: The logged session.
    :param success_item: Item the success event is attributed to.
    :param scheme: Attribution scheme.
    :param chain: Corpus-level chain, required for
                  :py:attr:`Attribution.MARKOV_MULTI_TOUCH`.
    :param success_query: (Optional) query of the success event; derived
                          from the purchase or the clicks if not given.
    :returns: Normalized mass per ``query_id``.
    """
    if not session.queries:
        raise ValueError(f"Session {session.session_id} has no queries")
    if success_query is None:
        success_query = _success_query(session, success_item)
    touch_points: list[QueryRecord] = []
    for query in session.queries:
        touch_points.append(query)
        if query.query_id == success_query:
            break
    if scheme == Attribution.LAST_TOUCH:
        return _last_touch(success_query)
    if scheme == Attribution.ALL_TOUCH:
        retrieving = [
            query.query_id
            for query in touch_points
            if success_item in query.candidate_ids()
        ]
        if not retrieving:
            logger.warning(
                "Item %d never retrieved in session %s, falling back to last touch",
                success_item,
                session.session_id,
            )
            return _last_touch(success_query)
        return {query_id: 1.0 / len(retrieving) for query_id in retrieving}
    if scheme == Attribution.MARKOV_MULTI_TOUCH:
        if chain is None:
            raise ValueError("Markov multi-touch attribution needs a fitted chain")
        effects = chain.removal_effects()
        masses = {
            query.query_id: effects.get(
                query_state(query, index, len(session.queries)), 0.0
            )
            for index, query in enumerate(touch_points)
        }
        total = sum(masses.values())
        if total <= 0:
            logger.warning(
                "All removal effects zero in session %s, falling back to last touch",
                session.session_id,
            )
            return _last_touch(success_query)
        return {
            query_id: mass / total for query_id, mass in masses.items() if mass > 0
        }
    raise ValueError(f"Unknown attribution scheme {scheme}")  # pragma: no cover


START = "start"
CONVERSION = "conversion"
NULL = "null"
_POSITION_BINS = ("early", "middle", "late")


def query_state(query: QueryRecord, index: int, n_queries: int) -> str:
    """Markov state of the ``index``-th query of an ``n_queries`` session:
    whether it was clicked and its relative position in the session."""
    position = _POSITION_BINS[min(len(_POSITION_BINS) * index // n_queries, 2)]
    return f"{'click' if query.clicks else 'skip'}:{position}"


def converted(session: SessionRecord, kind: RewardKind) -> bool:
    """Whether a session reached success under ``kind``."""
    return success_event(session, kind) is not None


@dataclasses.dataclass
class MarkovChain:
    """First-order chain over query states with ``conversion`` and ``null``
    absorbing states.

    :param kind: Reward kind that defines conversion.
    :param counts: Transition counts ``counts[from][to]``.
    """

    kind: RewardKind
    counts: dict[str, dict[str, int]] = dataclasses.field(default_factory=dict)
    _effects: typing.Optional[dict[str, float]] = dataclasses.field(
        default=None, init=False, repr=False, compare=False
    )

    def add_session(self, session: SessionRecord):
        """Counts the transitions of one session."""
        previous = START
        n_queries = len(session.queries)
        for index, query in enumerate(session.queries):
            state = query_state(query, index, n_queries)
            self._count(previous, state)
            previous = state
        self._count(previous, CONVERSION if converted(session, self.kind) else NULL)
        self._effects = None

    def _count(self, source: str, target: str):
        row = self.counts.setdefault(source, {})
        row[target] = row.get(target, 0) + 1

    def merge(self, other: "MarkovChain") -> "MarkovChain":
        """Sum of the transition counts of two chains."""
        if other.kind != self.kind:
            raise ValueError("Cannot merge chains of different reward kinds")
        merged = MarkovChain(self.kind, {k: dict(v) for k, v in self.counts.items()})
        for source, row in other.counts.items():
            for target, count in row.items():
                merged.counts.setdefault(source, {})
                merged.counts[source][target] = (
                    merged.counts[source].get(target, 0) + count
                )
        return merged

    def transition_matrix(self) -> typing.Tuple[list[str], np.ndarray]:
        """Row-stochastic transition matrix, absorbing states last."""
        targets = {t for row in self.counts.values() for t in row}
        transient = sorted(({START} | set(self.counts) | targets) - {CONVERSION, NULL})
        states = transient + [CONVERSION, NULL]
        index = {state: i for i, state in enumerate(states)}
        matrix = np.zeros((len(states), len(states)))
        for source in states:
            row = self.counts.get(source, {})
            total = sum(row.values())
            if total > 0:
                for target, count in row.items():
                    matrix[index[source], index[target]] = count / total
            else:
                matrix[index[source], index[source]] = 1.0
        return states, matrix

    @staticmethod
    def _conversion_probability(states: list[str], matrix: np.ndarray) -> float:
        n_transient = len(states) - 2
        q = matrix[:n_transient, :n_transient]
        r = matrix[:n_transient, states.index(CONVERSION)]
        identity = np.eye(n_transient)
        try:
            absorbed = np.linalg.solve(identity - q, r)
        except np.linalg.LinAlgError:
            absorbed = np.linalg.lstsq(identity - q, r, rcond=None)[0]
        return float(absorbed[states.index(START)])

    def removal_effects(self) -> dict[str, float]:
        """Relative drop of the conversion probability from ``start`` when
        transitions into a state are redirected to ``null``."""
        if self._effects is not None:
            return self._effects
        states, matrix = self.transition_matrix()
        baseline = self._conversion_probability(states, matrix)
        effects = {}
        null = states.index(NULL)
        for i, state in enumerate(states):
            if state in (START, CONVERSION, NULL):
                continue
            removed = matrix.copy()
            removed[:, null] += removed[:, i]
            removed[:, i] = 0.0
            removed[i, :] = 0.0
            removed[i, null] = 1.0
            if baseline > 0:
                after = self._conversion_probability(states, removed)
                effects[state] = max(0.0, (baseline - after) / baseline)
            else:
                effects[state] = 0.0
        self._effects = effects
        return effects

    def to_dict(self) -> dict:
        """JSON-compatible representation."""
        return {"kind": self.kind.value, "counts": self.counts}

    @classmethod
    def from_dict(cls, chain: typing.Mapping) -> "MarkovChain":
        """Inverse of :py:meth:`to_dict`."""
        return cls(
            RewardKind(chain["kind"]),
            {source: dict(row) for source, row in chain["counts"].items()},
        )


def fit_markov_chain(
    sessions: typing.Iterable[SessionRecord], kind: RewardKind
) -> MarkovChain:
    """Fits a :py:class:`MarkovChain` on a corpus in a single pass."""
    chain = MarkovChain(kind)
    for session in sessions:
        if session.queries:
            chain.add_session(session)
    return chain


@dataclasses.dataclass(frozen=True)
class ValueBuckets:
    """Price buckets cut so that each holds about the same revenue.

    :param boundaries: Ascending lower price boundaries of buckets ``1..k-1``.
    :param revenue_share: Share of the total revenue per bucket.
    :param converting_session_count: Converting sessions per bucket.
    """

    boundaries: typing.Tuple[float, ...]
    revenue_share: typing.Tuple[float, ...]
    converting_session_count: typing.Tuple[int, ...]

    def __post_init__(self):
        if np.any(np.diff(self.boundaries) <= 0):
            raise ValueError(f"Boundaries {self.boundaries} not strictly ascending")
        if len(self.revenue_share) != len(self.boundaries) + 1:
            raise ValueError("Need one revenue share per bucket")
        if abs(sum(self.revenue_share) - 1.0) > 1e-9:
            raise ValueError(f"Revenue shares {self.revenue_share} do not sum to 1")

    def __len__(self):
        return len(self.revenue_share)

    def bucket_of(self, price: float) -> int:
        """Index of the bucket ``price`` falls in."""
        return int(np.searchsorted(self.boundaries, price, side="right"))

    def to_dict(self) -> dict:
        """JSON-compatible representation."""
        return {
            "boundaries": list(self.boundaries),
            "revenue_share": list(self.revenue_share),
            "converting_session_count": list(self.converting_session_count),
        }

    @classmethod
    def from_dict(cls, buckets: typing.Mapping) -> "ValueBuckets":
        """Inverse of :py:meth:`to_dict`."""
        return cls(
            tuple(buckets["boundaries"]),
            tuple(buckets["revenue_share"]),
            tuple(buckets["converting_session_count"]),
        )


def fit_value_buckets(sessions: typing.Iterable[SessionRecord], k: int) -> ValueBuckets:
    """Cuts the empirical revenue distribution into ``k`` buckets.

    Purchases are sorted by price; bucket ``i`` starts at the first price
    where cumulative revenue reaches ``i/k`` of the total.

    :raises FitError: if there are fewer than ``k`` purchases.
    """
    if k < 1:
        raise ValueError(f"Need k >= 1 value buckets, got {k}")
    prices = np.sort(
        [session.purchase.price for session in sessions if session.purchase]
    )
    if len(prices) < k:
        raise FitError(f"Need at least {k} purchases, got {len(prices)}")
    cumulative = np.cumsum(prices)
    total = cumulative[-1]
    cuts = [
        prices[np.searchsorted(cumulative, total * i / k, side="left")]
        for i in range(1, k)
    ]
    boundaries = np.unique(cuts)
    if len(boundaries) < len(cuts):
        logger.warning(
            "Collapsed %d duplicate value bucket boundaries",
            len(cuts) - len(boundaries),
        )
    assignment = np.searchsorted(boundaries, prices, side="right")
    n_buckets = len(boundaries) + 1
    revenue = np.bincount(assignment, weights=prices, minlength=n_buckets)
    counts = np.bincount(assignment, minlength=n_buckets)
    shares = revenue / total
    logger.debug("Value bucket boundaries %s, shares %s", boundaries, shares)
    return ValueBuckets(
        tuple(float(b) for b in boundaries),
        tuple(float(s) for s in shares),
        tuple(int(c) for c in counts),
    )


def session_value(
    session: SessionRecord,
    spec: RewardSpec,
    buckets: typing.Optional[ValueBuckets] = None,
) -> float:
    """Session value :math:`\\hat{P}(s)` under ``spec``."""
    if spec.kind == RewardKind.ENGAGEMENT_COUNT:
        return 1.0 if any(query.clicks for query in session.queries) else 0.0
    if session.purchase is None:
        return 0.0
    if spec.kind == RewardKind.PURCHASE_COUNT:
        return 1.0
    if buckets is None:
        raise ValueError("Revenue session values need fitted value buckets")
    bucket = buckets.bucket_of(session.purchase.price)
    count = buckets.converting_session_count[bucket]
    if count == 0:
        return 0.0
    return buckets.revenue_share[bucket] / count


def clip(weight: float, cap: typing.Optional[float]) -> float:
    """Truncates ``weight`` at ``cap`` (no-op for ``cap=None``)."""
    return weight if cap is None else min(weight, cap)


def context_weight(
    session: SessionRecord,
    query_id: int,
    spec: RewardSpec,
    buckets: typing.Optional[ValueBuckets],
    attribution: AttributionDistribution,
) -> float:
    """Raw, clipped weight of one (session, query) context: session value
    times attributed mass. Self-normalization happens dataset-wide in
    :py:func:`normalize_weights`."""
    raw = session_value(session, spec, buckets) * attribution.get(query_id, 0.0)
    return clip(raw, spec.clipping_cap)


def normalize_weights(weights: typing.Sequence[float]) -> np.ndarray:
    """Self-normalizes non-negative weights to sum to 1.

    >>> normalize_weights([2, 3, 5]).tolist()
    [0.2, 0.3, 0.5]

    :raises ValueError: if a weight is negative or all are zero.
    """
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0):
        raise ValueError("Weights must not be negative")
    total = weights.sum()
    if not total > 0:
        raise ValueError("Cannot normalize weights without a positive entry")
    return weights / total


def dcg(
    ranking: typing.Sequence[int],
    relevance: typing.Sequence[float],
    discount: RankDiscount = LOG_DISCOUNT,
) -> float:
    """Unnormalized :math:`\\sum_r \\ell(r) \\hat{r}(\\pi^{-1}(r))`."""
    ranked = np.asarray(relevance, dtype=float)[np.asarray(ranking, dtype=int)]
    return float(np.dot(discount.values(len(ranked)), ranked))


def ideal_dcg(
    relevance: typing.Sequence[float],
    discount: RankDiscount = LOG_DISCOUNT,
    n_slots: typing.Optional[int] = None,
) -> float:
    """Maximum DCG over permutations, reached by sorting descending."""
    ideal = np.sort(np.asarray(relevance, dtype=float))[::-1]
    if n_slots is not None:
        ideal = ideal[:n_slots]
    return float(np.dot(discount.values(len(ideal)), ideal))


def per_query_expected_reward(
    ranking: typing.Sequence[int],
    relevance: typing.Sequence[float],
    discount: RankDiscount = LOG_DISCOUNT,
    idcg_normalize: bool = False,
) -> float:
    """DCG estimate of the expected reward of one ranked query.

    :param ranking: Item indices into ``relevance`` in slot order; may be
                    shorter than ``relevance`` (only top slots shown).
    :param relevance: Relevance estimate per item index.
    :param discount: Rank discount.
    :param idcg_normalize: Divide by the ideal DCG over the same number of
                           slots (0 stays 0).
    :raises ValueError: on an empty ranking.
    """
    if len(ranking) == 0:
        raise ValueError("Cannot evaluate an empty ranking")
    if len(ranking) > len(relevance):
        raise ValueError("Ranking is longer than the relevance vector")
    value = dcg(ranking, relevance, discount)
    if idcg_normalize:
        ideal = ideal_dcg(relevance, discount, n_slots=len(ranking))
        return value / ideal if ideal > 0 else 0.0
    return value


def debias_labels(
    context: TrainingContext,
    propensity: RankDiscount = LOG_DISCOUNT,
    cap: float = DEFAULT_LABEL_CAP,
) -> np.ndarray:
    """Inverse-propensity weighted labels of a context.

    Clicked items are divided by the propensity of their logged rank and
    capped; all other labels (zeros and attributed counterfactual positives)
    are kept as they are.

    :raises ValueError: if a clicked item lacks its logged rank.
    """
    labels = np.empty(len(context.items))
    for i, item in enumerate(context.items):
        if item.clicked:
            if item.logged_rank is None:
                raise ValueError(
                    f"Clicked item {item.item_id} in session {context.session_id} "
                    f"query {context.query_id} has no logged rank"
                )
            labels[i] = min(item.label / propensity(item.logged_rank), cap)
        else:
            labels[i] = item.label
    return labels
