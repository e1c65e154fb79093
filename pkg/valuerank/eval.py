# -*- coding: utf-8 -*-
# vim:fenc=utf-8
#
# Copyright (C) 2025 TU Dresden
#
# Distributed under terms of the MIT license.

"""Counterfactual evaluation of ranking policies on held-out logs."""

import dataclasses
import enum
import logging
import os
import typing

import numpy as np
import pandas as pd  # type: ignore

from . import policy as policy_
from . import reward
from . import stats
from .logs import ContextDataset, SessionRecord, TrainingContext


logger = logging.getLogger(__name__)

Evaluable = typing.Optional[typing.Union[policy_.Policy, policy_.ScoringFunction]]
"""A policy or bare scorer; ``None`` stands for the logging policy."""

OVERALL = "all"


class SpecMismatchError(ValueError):
    """Raised when a dataset was built under a different reward spec."""


class MetricKind(enum.Enum):
    """Counterfactual metric, one per reward kind."""

    EXP_CLICKS = "ExpClicks"
    EXP_PURCHASES = "ExpPurchases"
    EXP_REVENUE = "ExpRevenue"

    @classmethod
    def for_spec(cls, spec: reward.RewardSpec) -> "MetricKind":
        """Metric estimated under ``spec``."""
        return {
            reward.RewardKind.ENGAGEMENT_COUNT: cls.EXP_CLICKS,
            reward.RewardKind.PURCHASE_COUNT: cls.EXP_PURCHASES,
            reward.RewardKind.REVENUE: cls.EXP_REVENUE,
        }[spec.kind]


METRIC_SPECS = {
    MetricKind.EXP_CLICKS: "engagement",
    MetricKind.EXP_PURCHASES: "purchase",
    MetricKind.EXP_REVENUE: "revenue",
}
"""Reward-spec preset behind each metric."""


@dataclasses.dataclass(frozen=True)
class MetricEstimate:
    """Point estimate with a session-bootstrap percentile interval."""

    metric: MetricKind
    value: float
    n_contexts: int
    ci_low: float
    ci_high: float

    def to_dict(self) -> dict:
        """JSON-compatible representation."""
        return {**dataclasses.asdict(self), "metric": self.metric.value}


def logged_order(context: TrainingContext) -> np.ndarray:
    """The logging policy's order of a context: impressed items by logged
    rank, then the other candidates in context order."""
    impressed = [
        (item.logged_rank, i)
        for i, item in enumerate(context.items)
        if item.logged_rank is not None
    ]
    rest = [i for i, item in enumerate(context.items) if item.logged_rank is None]
    return np.array([i for _, i in sorted(impressed)] + rest, dtype=int)


def context_order(policy: Evaluable, context: TrainingContext) -> np.ndarray:
    """Item indices of ``context`` in the order ``policy`` ranks them."""
    if policy is None:
        return logged_order(context)
    return policy_.rank(
        policy, context.item_ids(), context.item_features(), context.context_features
    )


def check_spec(eval_set: ContextDataset, spec: reward.RewardSpec):
    """:raises SpecMismatchError: if ``eval_set`` was built under another
    spec."""
    if eval_set.spec_tag != spec.tag():
        raise SpecMismatchError(
            f"Dataset built under {eval_set.spec_tag}, evaluated under {spec.tag()}"
        )


def _labels(
    context: TrainingContext,
    spec: reward.RewardSpec,
    propensity: reward.RankDiscount,
) -> np.ndarray:
    if spec.label_source == reward.LabelSource.SOFT:
        return context.labels()
    return reward.debias_labels(context, propensity, spec.label_cap)


def context_rewards(
    eval_set: ContextDataset,
    policy: Evaluable,
    spec: reward.RewardSpec,
    discount: reward.RankDiscount = reward.LOG_DISCOUNT,
    propensity: reward.RankDiscount = reward.LOG_DISCOUNT,
    page_size: typing.Optional[int] = None,
) -> np.ndarray:
    """Unweighted per-query expected reward of each context under
    ``policy``."""
    rewards = np.empty(len(eval_set))
    for i, context in enumerate(eval_set):
        order = context_order(policy, context)
        if page_size is not None:
            order = order[:page_size]
        rewards[i] = reward.per_query_expected_reward(
            order, _labels(context, spec, propensity), discount, spec.idcg_normalize
        )
    return rewards


class _Sessions:
    """Per-session reduction of per-context columns."""

    def __init__(self, eval_set: ContextDataset):
        ids = np.array([c.session_id for c in eval_set], dtype=int)
        self.session_ids, self.index = np.unique(ids, return_inverse=True)
        self.weights = eval_set.weights()
        segments = np.array([c.segment for c in eval_set], dtype=int)
        self.segments = np.zeros(len(self.session_ids), dtype=int)
        self.segments[self.index] = segments

    def __len__(self):
        return len(self.session_ids)

    def sums(self, values: np.ndarray) -> np.ndarray:
        """Per-session sums of a per-context column."""
        return np.bincount(self.index, weights=values, minlength=len(self))


def _estimate(
    metric: MetricKind,
    weighted: np.ndarray,
    sessions: _Sessions,
    self_normalize: bool,
    n_bootstrap: int,
    confidence: float,
    seed: int,
    n_contexts: int,
) -> MetricEstimate:
    numerator = sessions.sums(weighted)
    denominator = sessions.sums(sessions.weights)
    sums = stats.resampled_sums(
        np.column_stack([numerator, denominator]),
        n_bootstrap,
        np.random.default_rng(seed),
    )
    if self_normalize:
        value = float(numerator.sum() / denominator.sum())
        with np.errstate(divide="ignore", invalid="ignore"):
            replicates = sums[:, 0] / sums[:, 1]
    else:
        value = float(numerator.sum())
        replicates = sums[:, 0]
    low, high = stats.percentile_interval(replicates, confidence)
    return MetricEstimate(
        metric, value, n_contexts, min(low, value), max(high, value)
    )


def counterfactual_metric(
    eval_set: ContextDataset,
    policy: Evaluable,
    spec: reward.RewardSpec,
    discount: reward.RankDiscount = reward.LOG_DISCOUNT,
    propensity: reward.RankDiscount = reward.LOG_DISCOUNT,
    n_bootstrap: int = stats.DEFAULT_N_BOOTSTRAP,
    confidence: float = stats.DEFAULT_CONFIDENCE,
    seed: int = 0,
    page_size: typing.Optional[int] = None,
) -> MetricEstimate:
    """Counterfactual estimate of ``policy``'s value under ``spec``:
    :math:`\\sum_{s,q} \\hat{v}_{q,s} \\ell_q(\\pi, \\hat{r})`.

    Every context is re-ranked by ``policy`` and scored against its
    (propensity-debiased) logged labels. Sessions are the bootstrap unit.
    Under a self-normalizing spec the estimate and every replicate are
    divided by their weight total.

    :param policy: Policy to evaluate; ``None`` replays the logging policy.
    :param propensity: Examination propensity for label debiasing.
    :param page_size: (Optional) only score the top slots.
    :raises SpecMismatchError: if ``eval_set`` was built under another spec.
    :raises ValueError: for an empty ``eval_set``.
    """
    check_spec(eval_set, spec)
    if len(eval_set) == 0:
        raise ValueError("Cannot evaluate on an empty eval set")
    rewards = context_rewards(eval_set, policy, spec, discount, propensity, page_size)
    return _estimate(
        MetricKind.for_spec(spec),
        eval_set.weights() * rewards,
        _Sessions(eval_set),
        spec.self_normalize,
        n_bootstrap,
        confidence,
        seed,
        len(eval_set),
    )


@dataclasses.dataclass(frozen=True)
class SegmentLift:
    """Lift of policy A over policy B in one price bucket."""

    bucket: int
    n_sessions: int
    estimate_a: float
    estimate_b: float
    lift: stats.Lift


def segment_lift(
    eval_set: ContextDataset,
    policy_a: Evaluable,
    policy_b: Evaluable,
    spec: reward.RewardSpec,
    discount: reward.RankDiscount = reward.LOG_DISCOUNT,
    propensity: reward.RankDiscount = reward.LOG_DISCOUNT,
    n_bootstrap: int = stats.DEFAULT_N_BOOTSTRAP,
    confidence: float = stats.DEFAULT_CONFIDENCE,
    seed: int = 0,
) -> dict[int, SegmentLift]:
    """Per price bucket :math:`(m_a - m_b) / m_b`.

    Buckets are the sessions' logged price intents and partition the
    sessions. A bucket whose baseline metric is zero has no lift and is
    left out.

    :raises SpecMismatchError: if ``eval_set`` was built under another spec.
    """
    check_spec(eval_set, spec)
    if len(eval_set) == 0:
        raise ValueError("Cannot evaluate on an empty eval set")
    sessions = _Sessions(eval_set)
    weights = eval_set.weights()
    totals = {
        name: sessions.sums(
            weights * context_rewards(eval_set, p, spec, discount, propensity)
        )
        for name, p in (("a", policy_a), ("b", policy_b))
    }
    lifts = {}
    for bucket in np.unique(sessions.segments).tolist():
        mask = sessions.segments == bucket
        lift = stats.paired_lift(
            totals["a"][mask], totals["b"][mask], n_bootstrap, confidence, seed
        )
        if lift is None:
            logger.info("No lift in bucket %d: zero baseline", bucket)
            continue
        lifts[bucket] = SegmentLift(
            bucket,
            int(mask.sum()),
            float(totals["a"][mask].sum()),
            float(totals["b"][mask].sum()),
            lift,
        )
    return lifts


def segments_frame(lifts: typing.Mapping[int, SegmentLift], metric: MetricKind):
    """:py:class:`pandas.DataFrame` with one row per bucket."""
    return pd.DataFrame(
        [
            {
                "metric": metric.value,
                "bucket": s.bucket,
                "n_sessions": s.n_sessions,
                "estimate_a": s.estimate_a,
                "estimate_b": s.estimate_b,
                "lift": s.lift.value,
                "ci_low": s.lift.ci_low,
                "ci_high": s.lift.ci_high,
            }
            for s in lifts.values()
        ],
        columns=[
            "metric",
            "bucket",
            "n_sessions",
            "estimate_a",
            "estimate_b",
            "lift",
            "ci_low",
            "ci_high",
        ],
    )


@dataclasses.dataclass(frozen=True)
class SweepPoint:
    """One (alpha, metric, bucket) cell of a sweep.

    :param lift: Lift over the ``alpha = 0`` policy, ``None`` if undefined.
    """

    alpha: float
    metric: MetricKind
    bucket: typing.Union[int, str]
    estimate: MetricEstimate
    lift: typing.Optional[stats.Lift]


SWEEP_COLUMNS = ["alpha", "metric", "bucket", "estimate", "lift", "ci_low", "ci_high"]


@dataclasses.dataclass
class SweepCurve:
    """Estimates and lifts along the mixing weight."""

    alphas: list[float]
    points: list[SweepPoint]

    def to_frame(self):
        """:py:class:`pandas.DataFrame` with :py:data:`SWEEP_COLUMNS`; lift and
        interval are NaN where the lift is undefined."""
        return pd.DataFrame(
            [
                {
                    "alpha": p.alpha,
                    "metric": p.metric.value,
                    "bucket": p.bucket,
                    "estimate": p.estimate.value,
                    "lift": p.lift.value if p.lift else np.nan,
                    "ci_low": p.lift.ci_low if p.lift else np.nan,
                    "ci_high": p.lift.ci_high if p.lift else np.nan,
                }
                for p in self.points
            ],
            columns=SWEEP_COLUMNS,
        )

    def overall(self, metric: MetricKind) -> list[SweepPoint]:
        """Points over all buckets for one metric, in alpha order."""
        return [p for p in self.points if p.metric == metric and p.bucket == OVERALL]


def _bucket_subset(eval_set: ContextDataset, mask: np.ndarray) -> ContextDataset:
    return ContextDataset(
        eval_set.spec_tag, [c for c, keep in zip(eval_set, mask) if keep]
    )


def check_alphas(alphas: typing.Iterable[float]) -> list[float]:
    """Sorted unique grid.

    :raises ValueError: if a value is outside [0, 1] or the grid is empty.
    """
    grid = sorted(set(float(a) for a in alphas))
    if not grid:
        raise ValueError("Empty alpha grid")
    if grid[0] < 0 or grid[-1] > 1:
        raise ValueError(f"alpha grid {grid} not within [0, 1]")
    return grid


def alpha_sweep(
    f_acquisition: policy_.ScoringFunction,
    f_engagement: policy_.ScoringFunction,
    alphas: typing.Iterable[float],
    eval_sets: typing.Mapping[
        MetricKind, typing.Tuple[reward.RewardSpec, ContextDataset]
    ],
    calibration_dataset: ContextDataset,
    discount: reward.RankDiscount = reward.LOG_DISCOUNT,
    propensity: reward.RankDiscount = reward.LOG_DISCOUNT,
    n_bootstrap: int = stats.DEFAULT_N_BOOTSTRAP,
    confidence: float = stats.DEFAULT_CONFIDENCE,
    seed: int = 0,
) -> SweepCurve:
    """Evaluates :py:func:`policy.mix` along ``alphas`` for every metric,
    overall and per bucket, baselined against ``alpha = 0``.

    :param eval_sets: Reward spec and eval set per metric.
    """
    grid = check_alphas(alphas)
    baseline = policy_.mix(f_acquisition, f_engagement, 0.0, calibration_dataset)
    prepared = {}
    for metric, (spec, eval_set) in eval_sets.items():
        check_spec(eval_set, spec)
        if len(eval_set) == 0:
            raise ValueError(f"Empty eval set for {metric.value}")
        context_segments = np.array([c.segment for c in eval_set], dtype=int)
        parts: list[typing.Tuple[typing.Union[int, str], ContextDataset]] = [
            (OVERALL, eval_set)
        ]
        parts += [
            (bucket, _bucket_subset(eval_set, context_segments == bucket))
            for bucket in np.unique(context_segments).tolist()
        ]
        prepared[metric] = spec, [
            (
                bucket,
                subset,
                _Sessions(subset),
                context_rewards(subset, baseline, spec, discount, propensity),
            )
            for bucket, subset in parts
        ]
    points = []
    for alpha in grid:
        mixed = policy_.mix(f_acquisition, f_engagement, alpha, calibration_dataset)
        for metric, (spec, bucket_parts) in prepared.items():
            for bucket, subset, sessions, base in bucket_parts:
                weights = subset.weights()
                weighted = weights * context_rewards(
                    subset, mixed, spec, discount, propensity
                )
                estimate = _estimate(
                    metric,
                    weighted,
                    sessions,
                    spec.self_normalize,
                    n_bootstrap,
                    confidence,
                    seed,
                    len(subset),
                )
                lift = stats.paired_lift(
                    sessions.sums(weighted),
                    sessions.sums(weights * base),
                    n_bootstrap,
                    confidence,
                    seed,
                )
                points.append(SweepPoint(alpha, metric, bucket, estimate, lift))
        logger.info("Swept alpha %.3f", alpha)
    return SweepCurve(grid, points)


def ranking_disagreement(
    policy_a: Evaluable, policy_b: Evaluable, dataset: ContextDataset
) -> float:
    """Fraction of contexts on which two policies order items differently."""
    if len(dataset) == 0:
        raise ValueError("Cannot compare rankings on an empty dataset")
    differ = sum(
        not np.array_equal(context_order(policy_a, c), context_order(policy_b, c))
        for c in dataset
    )
    return differ / len(dataset)


def metrics_frame(estimates: typing.Iterable[MetricEstimate]):
    """:py:class:`pandas.DataFrame` with one row per estimate."""
    return pd.DataFrame(
        [e.to_dict() for e in estimates],
        columns=["metric", "value", "n_contexts", "ci_low", "ci_high"],
    )


def write_frame(frame, path: typing.Union[str, "os.PathLike[str]"]):
    """Writes a report frame as CSV without the index."""
    frame.to_csv(path, index=False)
    logger.info("Wrote %s", path)


def expected_clicks(
    relevance: typing.Sequence[float],
    examination: typing.Callable[[int], float],
    page_size: typing.Optional[int] = None,
) -> float:
    """Closed-form expected clicks :math:`\\sum_r e(r) P(R=1 | \\pi^{-1}(r))`.

    :param relevance: True relevance in slot order.
    """
    relevance = list(relevance)
    n_slots = len(relevance) if page_size is None else min(page_size, len(relevance))
    return float(sum(examination(r + 1) * relevance[r] for r in range(n_slots)))


def _candidate_order(policy, query) -> np.ndarray:
    return policy_.rank(
        policy,
        np.array(query.candidate_ids(), dtype=int),
        np.array([c.features for c in query.candidates], dtype=float),
        query.context_features,
    )


def on_policy_expected_clicks(
    sessions: typing.Iterable[SessionRecord],
    ground_truth: typing.Mapping[int, typing.Mapping],
    policy: typing.Union[policy_.Policy, policy_.ScoringFunction],
    examination: typing.Callable[[int], float],
    page_size: int,
) -> float:
    """Mean closed-form expected clicks per SERP of ``policy`` re-ranking the
    logged candidates, from the simulator's ground truth."""
    totals = []
    for session in sessions:
        relevance = ground_truth[session.session_id]["relevance"]
        for query in session.queries:
            ids = query.candidate_ids()
            order = _candidate_order(policy, query)
            ranked = [relevance[ids[i]] for i in order]
            totals.append(expected_clicks(ranked, examination, page_size))
    if not totals:
        raise ValueError("No queries to evaluate")
    return float(np.mean(totals))


def ipw_expected_clicks(
    sessions: typing.Iterable[SessionRecord],
    policy: typing.Union[policy_.Policy, policy_.ScoringFunction],
    examination: typing.Callable[[int], float],
    page_size: int,
) -> float:
    """Self-normalized inverse-propensity estimate of ``policy``'s expected
    clicks per SERP from logs of a uniformly random logging policy.

    A logged click at rank ``r_log`` on an item the target places at
    ``r <= page_size`` contributes :math:`e(r) / e(r_{log})`; the total is
    normalized by the number of such impressions, scaled to ``page_size``
    slots.

    :raises ValueError: if no logged impression lands on the target page.
    """
    weighted_clicks = 0.0
    matched = 0
    for session in sessions:
        for query in session.queries:
            ids = query.candidate_ids()
            target_rank = np.empty(len(ids), dtype=int)
            target_rank[_candidate_order(policy, query)] = np.arange(1, len(ids) + 1)
            clicked = set(query.clicks)
            for slot, item_id in enumerate(query.ranking):
                r = int(target_rank[ids.index(item_id)])
                if r > page_size:
                    continue
                matched += 1
                if slot in clicked:
                    weighted_clicks += examination(r) / examination(slot + 1)
    if matched == 0:
        raise ValueError("No logged impression lands on the target page")
    return page_size * weighted_clicks / matched
