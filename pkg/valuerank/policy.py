# -*- coding: utf-8 -*-
# vim:fenc=utf-8
#
# Copyright (C) 2025 TU Dresden
#
# Distributed under terms of the MIT license.

"""Scoring functions, ranking policies and their trainers."""

import abc
import dataclasses
import enum
import json
import logging
import os
import typing

import numpy as np
from scipy.special import expit, log_expit  # type: ignore

from . import reward
from .logs import ContextDataset, TrainingContext


logger = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    """Raised when training diverges."""


def make_inputs(item_features, context_features) -> np.ndarray:
    """Concatenates each item's features with the context features.

    :returns: Array of shape ``(n_items, n_item_features + n_context_features)``.
    """
    item_features = np.atleast_2d(np.asarray(item_features, dtype=float))
    context_features = np.asarray(context_features, dtype=float).ravel()
    return np.hstack(
        [item_features, np.tile(context_features, (item_features.shape[0], 1))]
    )


def context_inputs(context: TrainingContext) -> np.ndarray:
    """Scorer inputs of every item of ``context``."""
    return make_inputs(context.item_features(), context.context_features)


class ScoringFunction(abc.ABC):
    """An item scoring function :math:`f` over concatenated item and context
    features.

    :param n_features: Input dimension.
    """

    kind: str = ""

    def __init__(self, n_features: int):
        if n_features < 1:
            raise ValueError(f"Need at least one feature, got {n_features}")
        self.n_features = n_features

    def _check(self, inputs: np.ndarray) -> np.ndarray:
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        if inputs.shape[1] != self.n_features:
            raise ValueError(
                f"{type(self).__name__} expects {self.n_features} features, "
                f"got {inputs.shape[1]}"
            )
        return inputs

    @abc.abstractmethod
    def scores(self, inputs: np.ndarray) -> np.ndarray:
        """Scores of a batch of inputs.

        :param inputs: Array of shape ``(n, n_features)``.
        :returns: Array of shape ``(n,)``.
        :raises ValueError: on a dimension mismatch.
        """
        raise NotImplementedError

    @abc.abstractmethod
    def backward(self, inputs: np.ndarray, grad_scores: np.ndarray) -> np.ndarray:
        """Chain rule from score gradients to the flat parameter gradient."""
        raise NotImplementedError

    @abc.abstractmethod
    def get_params(self) -> np.ndarray:
        """Copy of the parameters as a flat vector."""
        raise NotImplementedError

    @abc.abstractmethod
    def set_params(self, params: np.ndarray):
        """Sets the parameters from a flat vector."""
        raise NotImplementedError

    @abc.abstractmethod
    def to_dict(self) -> dict:
        """JSON-compatible representation including ``kind``."""
        raise NotImplementedError

    def copy(self) -> "ScoringFunction":
        """Independent copy."""
        return load_scorer(self.to_dict())


class LinearScorer(ScoringFunction):
    """:math:`f(x) = w^T x + b`.

    :param weights: (Optional) initial weights, zeros by default.
    :param bias: (Optional) initial bias.
    """

    kind = "linear"

    def __init__(
        self,
        n_features: int,
        weights: typing.Optional[typing.Sequence[float]] = None,
        bias: float = 0.0,
    ):
        super().__init__(n_features)
        self.weights = (
            np.zeros(n_features)
            if weights is None
            else np.array(weights, dtype=float).ravel()
        )
        if self.weights.shape != (n_features,):
            raise ValueError(f"Weights must have shape ({n_features},)")
        self.bias = float(bias)

    def scores(self, inputs):
        return self._check(inputs) @ self.weights + self.bias

    def backward(self, inputs, grad_scores):
        inputs = self._check(inputs)
        return np.append(inputs.T @ grad_scores, np.sum(grad_scores))

    def get_params(self):
        return np.append(self.weights, self.bias)

    def set_params(self, params):
        self.weights = np.array(params[:-1], dtype=float)
        self.bias = float(params[-1])

    def to_dict(self):
        return {
            "kind": self.kind,
            "n_features": self.n_features,
            "weights": self.weights.tolist(),
            "bias": self.bias,
        }

    @classmethod
    def from_dict(cls, scorer: typing.Mapping) -> "LinearScorer":
        """Inverse of :py:meth:`to_dict`."""
        return cls(scorer["n_features"], scorer["weights"], scorer["bias"])


class MLPScorer(ScoringFunction):
    """One hidden ``tanh`` layer: :math:`f(x) = w_2^T \\tanh(W_1^T x + b_1) + b_2`.

    :param hidden_width: Hidden units.
    :param seed: Seed of the scaled Gaussian initialization.
    """

    kind = "mlp1"
    DEFAULT_HIDDEN_WIDTH = 16

    def __init__(
        self, n_features: int, hidden_width: int = DEFAULT_HIDDEN_WIDTH, seed: int = 0
    ):
        super().__init__(n_features)
        if hidden_width < 1:
            raise ValueError(f"Need a positive hidden width, got {hidden_width}")
        rng = np.random.default_rng(seed)
        self.hidden_width = hidden_width
        self.w1 = rng.normal(0.0, 1.0 / np.sqrt(n_features), (n_features, hidden_width))
        self.b1 = np.zeros(hidden_width)
        self.w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden_width), hidden_width)
        self.b2 = 0.0

    def _hidden(self, inputs):
        return np.tanh(inputs @ self.w1 + self.b1)

    def scores(self, inputs):
        return self._hidden(self._check(inputs)) @ self.w2 + self.b2

    def backward(self, inputs, grad_scores):
        inputs = self._check(inputs)
        hidden = self._hidden(inputs)
        grad_hidden = np.outer(grad_scores, self.w2) * (1.0 - hidden**2)
        return np.concatenate(
            [
                (inputs.T @ grad_hidden).ravel(),
                grad_hidden.sum(axis=0),
                hidden.T @ grad_scores,
                [np.sum(grad_scores)],
            ]
        )

    def get_params(self):
        return np.concatenate([self.w1.ravel(), self.b1, self.w2, [self.b2]])

    def set_params(self, params):
        n_w1 = self.n_features * self.hidden_width
        h = self.hidden_width
        params = np.asarray(params, dtype=float)
        self.w1 = params[:n_w1].reshape(self.n_features, h).copy()
        self.b1 = params[n_w1 : n_w1 + h].copy()
        self.w2 = params[n_w1 + h : n_w1 + 2 * h].copy()
        self.b2 = float(params[-1])

    def to_dict(self):
        return {
            "kind": self.kind,
            "n_features": self.n_features,
            "hidden_width": self.hidden_width,
            "params": self.get_params().tolist(),
        }

    @classmethod
    def from_dict(cls, scorer: typing.Mapping) -> "MLPScorer":
        """Inverse of :py:meth:`to_dict`."""
        mlp = cls(scorer["n_features"], scorer["hidden_width"])
        mlp.set_params(np.array(scorer["params"]))
        return mlp


class HybridScorer(ScoringFunction):
    """:math:`(1 - \\alpha) z(f_P) + \\alpha z(f_C)` with ``z`` standardizing
    each component by constants frozen at construction.

    :param means: Component means ``(acquisition, engagement)``.
    :param scales: Component standard deviations, positive.
    """

    kind = "hybrid"

    def __init__(
        self,
        f_acquisition: ScoringFunction,
        f_engagement: ScoringFunction,
        alpha: float,
        means: typing.Sequence[float],
        scales: typing.Sequence[float],
    ):
        if f_acquisition.n_features != f_engagement.n_features:
            raise ValueError("Hybrid components differ in input dimension")
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha {alpha} not in [0, 1]")
        if min(scales) <= 0:
            raise ValueError(f"Standardization scales {scales} must be positive")
        super().__init__(f_acquisition.n_features)
        self.f_acquisition = f_acquisition
        self.f_engagement = f_engagement
        self.alpha = float(alpha)
        self.means = tuple(float(m) for m in means)
        self.scales = tuple(float(s) for s in scales)

    def scores(self, inputs):
        z_acquisition = (self.f_acquisition.scores(inputs) - self.means[0]) / (
            self.scales[0]
        )
        z_engagement = (self.f_engagement.scores(inputs) - self.means[1]) / (
            self.scales[1]
        )
        return (1.0 - self.alpha) * z_acquisition + self.alpha * z_engagement

    def backward(self, inputs, grad_scores):
        grad_scores = np.asarray(grad_scores, dtype=float)
        weights = ((1.0 - self.alpha) / self.scales[0], self.alpha / self.scales[1])
        return np.concatenate(
            [
                self.f_acquisition.backward(inputs, grad_scores * weights[0]),
                self.f_engagement.backward(inputs, grad_scores * weights[1]),
            ]
        )

    def get_params(self):
        return np.concatenate(
            [self.f_acquisition.get_params(), self.f_engagement.get_params()]
        )

    def set_params(self, params):
        params = np.asarray(params, dtype=float)
        split = len(self.f_acquisition.get_params())
        if len(params) != split + len(self.f_engagement.get_params()):
            raise ValueError(f"Hybrid expects {len(self.get_params())} parameters")
        # components may be shared with other policies
        self.f_acquisition = self.f_acquisition.copy()
        self.f_engagement = self.f_engagement.copy()
        self.f_acquisition.set_params(params[:split])
        self.f_engagement.set_params(params[split:])

    def to_dict(self):
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "means": list(self.means),
            "scales": list(self.scales),
            "f_acquisition": self.f_acquisition.to_dict(),
            "f_engagement": self.f_engagement.to_dict(),
        }

    @classmethod
    def from_dict(cls, scorer: typing.Mapping) -> "HybridScorer":
        """Inverse of :py:meth:`to_dict`."""
        return cls(
            load_scorer(scorer["f_acquisition"]),
            load_scorer(scorer["f_engagement"]),
            scorer["alpha"],
            scorer["means"],
            scorer["scales"],
        )


SCORERS: dict[str, typing.Type[ScoringFunction]] = {
    LinearScorer.kind: LinearScorer,
    MLPScorer.kind: MLPScorer,
    HybridScorer.kind: HybridScorer,
}


def load_scorer(scorer: typing.Mapping) -> ScoringFunction:
    """Restores a scorer from its :py:meth:`ScoringFunction.to_dict` output.

    :raises ValueError: for an unknown ``kind``.
    """
    try:
        cls = SCORERS[scorer["kind"]]
    except KeyError as exc:
        raise ValueError(f"Unknown scorer kind {scorer.get('kind')!r}") from exc
    return cls.from_dict(scorer)  # type: ignore[attr-defined]


def make_scorer(
    kind: str, n_features: int, hidden_width: int = 16, seed: int = 0
) -> ScoringFunction:
    """Initial scorer for training.

    :param kind: ``"linear"`` or ``"mlp1"``.
    """
    if kind == LinearScorer.kind:
        return LinearScorer(n_features)
    if kind == MLPScorer.kind:
        return MLPScorer(n_features, hidden_width, seed)
    raise ValueError(f"Cannot train a scorer of kind {kind!r}")


def score(scorer: ScoringFunction, item_features, context_features) -> float:
    """Score of one item in a context.

    :raises ValueError: on a dimension mismatch.
    """
    return float(scorer.scores(make_inputs(item_features, context_features))[0])


def argsort_scores(scores, item_ids) -> np.ndarray:
    """Indices sorting ``scores`` descending, ties by ascending ``item_id``."""
    return np.lexsort((np.asarray(item_ids), -np.asarray(scores, dtype=float)))


def ranks_from_scores(scores, item_ids) -> np.ndarray:
    """1-based rank of each item under :py:func:`argsort_scores`."""
    order = argsort_scores(scores, item_ids)
    ranks = np.empty(len(order), dtype=int)
    ranks[order] = np.arange(1, len(order) + 1)
    return ranks


class BaseRanker(abc.ABC):
    """Anything that orders the candidates of a SERP."""

    # pylint: disable=too-few-public-methods
    @abc.abstractmethod
    def rank_candidates(
        self,
        item_ids: np.ndarray,
        item_features: np.ndarray,
        context_features: np.ndarray,
        relevance: typing.Optional[np.ndarray] = None,
        rng: typing.Optional[np.random.Generator] = None,
    ) -> np.ndarray:
        """Orders candidates.

        :param item_ids: Candidate ``item_id`` s.
        :param item_features: Candidate features, one row per candidate.
        :param context_features: Context features of the SERP.
        :param relevance: True relevance, only used by simulator oracles.
        :param rng: Randomness, only used by stochastic rankers.
        :returns: Candidate indices in slot order.
        """
        raise NotImplementedError


class Policy(BaseRanker):
    """Deterministic policy :math:`\\pi_f = \\mathrm{argSort}(f)`."""

    def __init__(self, scorer: ScoringFunction):
        self.scorer = scorer

    def rank_candidates(
        self, item_ids, item_features, context_features, relevance=None, rng=None
    ):
        return rank(self, item_ids, item_features, context_features)

    def to_dict(self) -> dict:
        """JSON-compatible representation of the scorer."""
        return self.scorer.to_dict()

    @classmethod
    def from_dict(cls, policy: typing.Mapping) -> "Policy":
        """Inverse of :py:meth:`to_dict`."""
        return cls(load_scorer(policy))


def save_policy(policy: Policy, path: typing.Union[str, "os.PathLike[str]"]):
    """Writes a policy as JSON."""
    with open(path, "w", encoding="utf-8") as policy_file:
        json.dump(policy.to_dict(), policy_file)


def load_policy(path: typing.Union[str, "os.PathLike[str]"]) -> Policy:
    """Reads a policy written by :py:func:`save_policy`."""
    with open(path, encoding="utf-8") as policy_file:
        return Policy.from_dict(json.load(policy_file))


def rank(
    policy: typing.Union[Policy, ScoringFunction],
    item_ids,
    item_features,
    context_features,
) -> np.ndarray:
    """Ranks items by descending score, ties by ascending ``item_id``.

    :returns: Item indices in slot order.
    """
    scorer = policy.scorer if isinstance(policy, Policy) else policy
    if len(item_ids) == 0:
        raise ValueError("Cannot rank zero items")
    scores = scorer.scores(make_inputs(item_features, context_features))
    return argsort_scores(scores, item_ids)


def swap_deltas(
    ranks: np.ndarray,
    labels: np.ndarray,
    discount: reward.RankDiscount = reward.LOG_DISCOUNT,
    idcg_normalize: bool = False,
) -> np.ndarray:
    """Change of the per-query DCG estimate from swapping the slots of
    ``(i, j)``, kept only for pairs with ``labels[i] > labels[j]``.

    :param ranks: 1-based rank per item.
    :param labels: Label per item.
    :returns: Matrix ``delta[i, j]``.
    """
    ranks = np.asarray(ranks, dtype=int)
    labels = np.asarray(labels, dtype=float)
    position = discount.values(int(ranks.max()))[ranks - 1]
    gain = np.maximum(labels[:, np.newaxis] - labels[np.newaxis, :], 0.0)
    deltas = np.abs(position[:, np.newaxis] - position[np.newaxis, :]) * gain
    if idcg_normalize:
        ideal = reward.ideal_dcg(labels, discount)
        if ideal > 0:
            deltas /= ideal
    return deltas


def _lambda_terms(
    scorer: ScoringFunction,
    inputs: np.ndarray,
    item_ids: np.ndarray,
    labels: np.ndarray,
    weight: float,
    discount: reward.RankDiscount,
    idcg_normalize: bool,
    ranks: typing.Optional[np.ndarray] = None,
) -> typing.Tuple[float, np.ndarray, np.ndarray]:
    scores = scorer.scores(inputs)
    if ranks is None:
        ranks = ranks_from_scores(scores, item_ids)
    deltas = swap_deltas(ranks, labels, discount, idcg_normalize)
    margins = scores[:, np.newaxis] - scores[np.newaxis, :]
    loss = weight * float(np.sum(deltas * -log_expit(margins)))
    pair_grad = -weight * deltas * expit(-margins)
    grad_scores = pair_grad.sum(axis=1) - pair_grad.sum(axis=0)
    return loss, scorer.backward(inputs, grad_scores), ranks


def lambda_loss(
    scorer: ScoringFunction,
    context: TrainingContext,
    discount: reward.RankDiscount = reward.LOG_DISCOUNT,
    idcg_normalize: bool = True,
    labels: typing.Optional[np.ndarray] = None,
) -> float:
    """Weighted LambdaLoss of one context with swap deltas taken at the
    scorer's current ranking.

    :param labels: (Optional) labels to use instead of the logged ones, e.g.
                   :py:func:`reward.debias_labels` output.
    """
    labels = context.labels() if labels is None else labels
    loss, _, _ = _lambda_terms(
        scorer,
        context_inputs(context),
        context.item_ids(),
        labels,
        context.context_weight,
        discount,
        idcg_normalize,
    )
    return loss


def lambda_gradient(
    scorer: ScoringFunction,
    context: TrainingContext,
    discount: reward.RankDiscount = reward.LOG_DISCOUNT,
    idcg_normalize: bool = True,
    labels: typing.Optional[np.ndarray] = None,
) -> np.ndarray:
    """Parameter gradient of :py:func:`lambda_loss`.

    The ranking is recomputed from the current scores (the E-step); swap
    deltas are constants of the gradient.
    """
    labels = context.labels() if labels is None else labels
    _, grad, _ = _lambda_terms(
        scorer,
        context_inputs(context),
        context.item_ids(),
        labels,
        context.context_weight,
        discount,
        idcg_normalize,
    )
    return grad


def pointwise_loss(
    scorer: ScoringFunction,
    context: TrainingContext,
    labels: typing.Optional[np.ndarray] = None,
) -> float:
    """Weighted binary cross-entropy between ``sigmoid(f)`` and the labels."""
    loss, _ = _pointwise_terms(scorer, context_inputs(context), context, labels)
    return loss


def pointwise_gradient(
    scorer: ScoringFunction,
    context: TrainingContext,
    labels: typing.Optional[np.ndarray] = None,
) -> np.ndarray:
    """Parameter gradient of :py:func:`pointwise_loss`."""
    _, grad = _pointwise_terms(scorer, context_inputs(context), context, labels)
    return grad


def _pointwise_terms(scorer, inputs, context, labels=None):
    labels = context.labels() if labels is None else labels
    scores = scorer.scores(inputs)
    weight = context.context_weight
    # -y log(sigmoid(s)) - (1 - y) log(1 - sigmoid(s))
    loss = weight * float(np.sum(-log_expit(-scores) - labels * scores))
    return loss, scorer.backward(inputs, weight * (expit(scores) - labels))


class DeltaRefresh(enum.Enum):
    """When swap deltas are recomputed from the current scores."""

    PER_MINIBATCH = "per_minibatch"
    PER_EPOCH = "per_epoch"


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    """Minibatch gradient descent settings."""

    learning_rate: float = 0.5
    epochs: int = 20
    minibatch_size: int = 256
    seed: int = 0
    l2_penalty: float = 1e-4
    delta_refresh: DeltaRefresh = DeltaRefresh.PER_MINIBATCH

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 1 or self.minibatch_size < 1:
            raise ValueError("Learning rate, epochs and minibatch size must be > 0")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must not be negative")

    @classmethod
    def from_mapping(cls, training: typing.Mapping, seed: int = 0) -> "TrainConfig":
        """Picks the known keys of a ``training`` config section."""
        known = {field.name for field in dataclasses.fields(cls)}
        values = {k: v for k, v in training.items() if k in known}
        values.setdefault("seed", seed)
        if "delta_refresh" in values:
            values["delta_refresh"] = DeltaRefresh(values["delta_refresh"])
        return cls(**values)


@dataclasses.dataclass
class TrainResult:
    """Trained scorer and its per-epoch training loss."""

    scorer: ScoringFunction
    loss_trace: list[float]


_Objective = typing.Callable[
    [ScoringFunction, int, typing.Optional[np.ndarray]],
    typing.Tuple[float, np.ndarray, typing.Optional[np.ndarray]],
]


def _full_objective(
    n_contexts: int, scorer: ScoringFunction, config: TrainConfig, objective: _Objective
) -> float:
    params = scorer.get_params()
    total = 0.5 * config.l2_penalty * float(params @ params)
    return total + sum(objective(scorer, i, None)[0] for i in range(n_contexts))


def _descend(
    n_contexts: int,
    scorer: ScoringFunction,
    config: TrainConfig,
    objective: _Objective,
    refresh_ranks: bool,
) -> list[float]:
    rng = np.random.default_rng(config.seed)
    trace = []
    for epoch in range(config.epochs):
        frozen: list[typing.Optional[np.ndarray]] = [None] * n_contexts
        if refresh_ranks:
            for i in range(n_contexts):
                frozen[i] = objective(scorer, i, None)[2]
        order = rng.permutation(n_contexts)
        for batch, start in enumerate(range(0, n_contexts, config.minibatch_size)):
            params = scorer.get_params()
            grad = config.l2_penalty * params
            batch_loss = 0.0
            for i in order[start : start + config.minibatch_size]:
                loss, context_grad, _ = objective(scorer, i, frozen[i])
                batch_loss += loss
                grad = grad + context_grad
            if not np.isfinite(batch_loss) or not np.all(np.isfinite(grad)):
                raise TrainingError(
                    f"Non-finite loss {batch_loss} in epoch {epoch}, "
                    f"minibatch {batch}"
                )
            scorer.set_params(params - config.learning_rate * grad)
        epoch_loss = _full_objective(n_contexts, scorer, config, objective)
        if not np.isfinite(epoch_loss):
            raise TrainingError(f"Non-finite loss {epoch_loss} after epoch {epoch}")
        logger.debug("Epoch %d loss %.6g", epoch, epoch_loss)
        trace.append(epoch_loss)
    return trace


def _weighted_contexts(dataset: ContextDataset) -> list[TrainingContext]:
    if len(dataset) == 0:
        raise ValueError("Cannot train on an empty dataset")
    contexts = [c for c in dataset if c.context_weight > 0]
    if len(contexts) < len(dataset):
        logger.debug("Skipping %d zero-weight contexts", len(dataset) - len(contexts))
    return contexts


def train(
    dataset: ContextDataset,
    scorer_init: ScoringFunction,
    config: TrainConfig,
    discount: reward.RankDiscount = reward.LOG_DISCOUNT,
    propensity: typing.Optional[reward.RankDiscount] = reward.LOG_DISCOUNT,
    idcg_normalize: bool = True,
    label_cap: float = reward.DEFAULT_LABEL_CAP,
) -> TrainResult:
    """Minimizes :math:`\\sum_{s,q} \\hat{v}_{q,s} \\ell_q(\\pi_f, \\hat{r})`
    with the value-weighted LambdaLoss.

    :param discount: Rank discount of the per-query reward.
    :param propensity: Propensity for inverse-propensity label debiasing;
                       ``None`` uses labels as logged (soft labels).
    :raises TrainingError: on a non-finite loss.
    """
    contexts = _weighted_contexts(dataset)
    inputs = [context_inputs(c) for c in contexts]
    item_ids = [c.item_ids() for c in contexts]
    labels = [
        (
            reward.debias_labels(c, propensity, label_cap)
            if propensity is not None
            else c.labels()
        )
        for c in contexts
    ]
    scorer = scorer_init.copy()

    def objective(current, i, ranks):
        return _lambda_terms(
            current,
            inputs[i],
            item_ids[i],
            labels[i],
            contexts[i].context_weight,
            discount,
            idcg_normalize,
            ranks,
        )

    trace = _descend(
        len(contexts),
        scorer,
        config,
        objective,
        refresh_ranks=config.delta_refresh == DeltaRefresh.PER_EPOCH,
    )
    return TrainResult(scorer, trace)


def train_pointwise(
    dataset: ContextDataset,
    config: TrainConfig,
    scorer_init: typing.Optional[ScoringFunction] = None,
) -> TrainResult:
    """Minimizes the weighted cross-entropy
    :math:`\\sum_{s,q} \\hat{v}_{q,s} \\sum_d D(f(d) \\| \\hat{r}_d)`, the
    calibrated-probability baseline.

    :raises ValueError: if a label is outside [0, 1].
    :raises TrainingError: on a non-finite loss.
    """
    contexts = _weighted_contexts(dataset)
    for context in contexts:
        labels = context.labels()
        if np.any((labels < 0) | (labels > 1)):
            raise ValueError(
                f"Context ({context.session_id}, {context.query_id}) has labels "
                "outside [0, 1]"
            )
    inputs = [context_inputs(c) for c in contexts]
    if scorer_init is None:
        n_features = inputs[0].shape[1] if inputs else 1
        scorer_init = LinearScorer(n_features)
    scorer = scorer_init.copy()

    def objective(current, i, _ranks):
        loss, grad = _pointwise_terms(current, inputs[i], contexts[i])
        return loss, grad, None

    trace = _descend(len(contexts), scorer, config, objective, refresh_ranks=False)
    return TrainResult(scorer, trace)


def mix(
    f_acquisition: ScoringFunction,
    f_engagement: ScoringFunction,
    alpha: float,
    calibration_dataset: ContextDataset,
) -> Policy:
    """Hybrid policy ranking by
    :math:`(1 - \\alpha) z(f_P) + \\alpha z(f_C)`.

    Standardization constants are the component score means and standard
    deviations over every item of ``calibration_dataset``.

    :raises ValueError: if ``alpha`` is outside [0, 1] or a component has
                        zero score variance on the calibration data.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha {alpha} not in [0, 1]")
    if len(calibration_dataset) == 0:
        raise ValueError("Cannot calibrate on an empty dataset")
    inputs = np.vstack([context_inputs(c) for c in calibration_dataset])
    means, scales = [], []
    components = (("acquisition", f_acquisition), ("engagement", f_engagement))
    for name, component in components:
        component_scores = component.scores(inputs)
        scale = float(np.std(component_scores))
        if not scale > 1e-12:
            raise ValueError(f"Degenerate {name} scores on the calibration dataset")
        means.append(float(np.mean(component_scores)))
        scales.append(scale)
    return Policy(HybridScorer(f_acquisition, f_engagement, alpha, means, scales))
