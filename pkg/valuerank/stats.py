# -*- coding: utf-8 -*-
# vim:fenc=utf-8
#
# Copyright (C) 2025 TU Dresden
#
# Distributed under terms of the MIT license.

"""Session-level bootstrap helpers.

All statistics in :py:mod:`valuerank` are functions of per-session column
sums, so a bootstrap replicate is fully described by how often each session
was drawn. Replicates are drawn as multinomial count vectors and reduced with
a matrix product.
"""

import dataclasses
import typing

import numpy as np

DEFAULT_N_BOOTSTRAP = 1000
DEFAULT_CONFIDENCE = 0.95
_CHUNK = 100


@dataclasses.dataclass(frozen=True)
class Lift:
    """Relative lift :math:`(A - B) / B` with a bootstrap interval."""

    value: float
    ci_low: float
    ci_high: float

    def contains(self, value: float) -> bool:
        """``True`` if ``value`` lies in the closed interval."""
        return self.ci_low <= value <= self.ci_high

    def to_dict(self) -> dict:
        """JSON-compatible representation."""
        return dataclasses.asdict(self)


def resampled_sums(
    columns: np.ndarray,
    n_bootstrap: int = DEFAULT_N_BOOTSTRAP,
    rng: typing.Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Column sums over bootstrap resamples of the rows (sessions).

    :param columns: Array of shape ``(n_sessions, k)``.
    :param n_bootstrap: Number of replicates.
    :param rng: Random generator; a fresh unseeded one if ``None``.
    :returns: Array of shape ``(n_bootstrap, k)``.
    """
    columns = np.asarray(columns, dtype=float)
    if columns.ndim == 1:
        columns = columns[:, np.newaxis]
    if rng is None:
        rng = np.random.default_rng()
    n_rows = columns.shape[0]
    if n_rows == 0:
        raise ValueError("Cannot bootstrap an empty sample")
    uniform = np.full(n_rows, 1.0 / n_rows)
    sums = np.empty((n_bootstrap, columns.shape[1]))
    for start in range(0, n_bootstrap, _CHUNK):
        stop = min(start + _CHUNK, n_bootstrap)
        counts = rng.multinomial(n_rows, uniform, size=stop - start)
        sums[start:stop] = counts @ columns
    return sums


def percentile_interval(
    replicates: np.ndarray, confidence: float = DEFAULT_CONFIDENCE
) -> typing.Tuple[float, float]:
    """Percentile interval of bootstrap replicates, ignoring NaN replicates."""
    if not 0 < confidence < 1:
        raise ValueError(f"confidence {confidence} not in (0, 1)")
    tail = 100.0 * (1.0 - confidence) / 2.0
    finite = replicates[np.isfinite(replicates)]
    if finite.size == 0:
        return float("nan"), float("nan")
    low, high = np.percentile(finite, [tail, 100.0 - tail])
    return float(low), float(high)


def relative_lift(a_total, b_total):
    """:math:`(A - B) / B`, elementwise; NaN where ``B <= 0``."""
    a_total = np.asarray(a_total, dtype=float)
    b_total = np.asarray(b_total, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(b_total > 0, (a_total - b_total) / b_total, np.nan)


def paired_lift(
    a: np.ndarray,
    b: np.ndarray,
    n_bootstrap: int = DEFAULT_N_BOOTSTRAP,
    confidence: float = DEFAULT_CONFIDENCE,
    seed: int = 0,
) -> typing.Optional[Lift]:
    """Lift of the total of ``a`` over the total of ``b``.

    ``a`` and ``b`` hold one value per session for the same sessions, so both
    arms are resampled with the same session draw.

    :returns: ``None`` if the total of ``b`` is not positive, i.e. the lift is
              undefined.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"Paired samples differ in shape: {a.shape} vs {b.shape}")
    if b.sum() <= 0:
        return None
    value = float(relative_lift(a.sum(), b.sum()))
    sums = resampled_sums(
        np.column_stack([a, b]), n_bootstrap, np.random.default_rng(seed)
    )
    low, high = percentile_interval(relative_lift(sums[:, 0], sums[:, 1]), confidence)
    return Lift(value, min(low, value), max(high, value))
