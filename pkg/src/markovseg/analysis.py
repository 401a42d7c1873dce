"""Posterior summaries: marginal tables, credible intervals, and
segment-length distributions.

Credible intervals are percentile intervals with linear interpolation.
Changepoint positions additionally get symmetric probability intervals:
starting from the rounded posterior mean position, the interval grows one
position on each side per step (collecting whatever mass is available
there) until it holds the requested level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import GEOMETRIC, NEGBIN
from .likelihood import MARKOV
from .sampler import PosteriorSamples

SEGMENT_MEMBERSHIP = "segment_membership"
CHANGEPOINT_POSITION = "changepoint_position"


@dataclass(frozen=True)
class MarginalTable:
    """Posterior marginal probabilities for one sequence.

    ``segment_membership``: values[t, i] = P(position t+1 lies in segment
    i+1), shape (T, K+1). ``changepoint_position``: values[i, t] =
    P(tau_{i+1} = t), shape (K, T+1) over positions 0..T.
    """

    sequence_id: str
    kind: str
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in (SEGMENT_MEMBERSHIP, CHANGEPOINT_POSITION):
            raise ValueError(f"unknown marginal kind {self.kind!r}")

    def rows(self):
        """(sequence_id, position, segment_or_index, probability) tuples.

        Positions are 1-based for membership rows and 0-based changepoint
        positions for position rows; the third column is the 1-based
        segment or changepoint index.
        """
        if self.kind == SEGMENT_MEMBERSHIP:
            T, S = self.values.shape
            for t in range(T):
                for i in range(S):
                    yield (self.sequence_id, t + 1, i + 1, self.values[t, i])
        else:
            K, P = self.values.shape
            for i in range(K):
                for t in range(P):
                    yield (self.sequence_id, t, i + 1, self.values[i, t])


def segment_marginals(samples: PosteriorSamples, sequence_id: str) -> MarginalTable:
    """Fraction of draws assigning each position of a sequence to each
    segment; rows sum to 1."""
    l = samples.sequence_index(sequence_id)
    T = samples.sequence_lengths[l]
    K = samples.K
    N = samples.n_draws
    tau = samples.tau[:, l, :]
    counts = np.zeros((T, K + 1))
    positions = np.arange(1, T + 1)
    pos_index = positions - 1
    for j in range(N):
        segs = np.searchsorted(tau[j], positions, side="left")
        counts[pos_index, segs] += 1.0
    return MarginalTable(sequence_id, SEGMENT_MEMBERSHIP, counts / N)


def changepoint_marginals(samples: PosteriorSamples, sequence_id: str) -> MarginalTable:
    """Relative frequency of each changepoint sitting at each position 0..T."""
    l = samples.sequence_index(sequence_id)
    T = samples.sequence_lengths[l]
    K = samples.K
    N = samples.n_draws
    values = np.zeros((K, T + 1))
    for i in range(K):
        values[i] = np.bincount(samples.tau[:, l, i], minlength=T + 1) / N
    return MarginalTable(sequence_id, CHANGEPOINT_POSITION, values)


def credible_interval(draws: np.ndarray, level: float = 0.95) -> tuple[float, float]:
    """Equal-tailed percentile interval with linear interpolation."""
    if not (0.0 < level < 1.0):
        raise ValueError(f"level must lie in (0, 1), got {level}")
    half = 100.0 * (1.0 - level) / 2.0
    lo, hi = np.percentile(np.asarray(draws, dtype=np.float64), [half, 100.0 - half])
    return (float(lo), float(hi))


@dataclass(frozen=True)
class SummaryRow:
    name: str
    mean: float
    lower: float
    upper: float


@dataclass(frozen=True)
class SummaryTable:
    """Posterior means and credible intervals for every sampled parameter,
    plus the chain's acceptance rates."""

    level: float
    parameters: tuple[SummaryRow, ...]
    acceptance: dict

    def by_name(self, name: str) -> SummaryRow:
        for row in self.parameters:
            if row.name == name:
                return row
        raise KeyError(f"no parameter {name!r}")

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "parameters": [
                {"name": r.name, "mean": r.mean, "lower": r.lower, "upper": r.upper}
                for r in self.parameters
            ],
            "acceptance": dict(self.acceptance),
        }


def param_summary(samples: PosteriorSamples, level: float = 0.95) -> SummaryTable:
    """Summarize every duration parameter and emission entry."""
    rows = []

    def add(name, draws):
        lo, hi = credible_interval(draws, level)
        rows.append(SummaryRow(name, float(np.mean(draws)), lo, hi))

    cfg = samples.config
    if cfg.duration == NEGBIN:
        for i in range(samples.K):
            add(f"r{i + 1}", samples.theta[:, i, 0])
            add(f"b{i + 1}", samples.theta[:, i, 1])
    elif cfg.duration == GEOMETRIC:
        for i in range(samples.K):
            add(f"p{i + 1}", samples.theta[:, i])
    n = samples.n
    for g in range(samples.G):
        if cfg.emission == MARKOV:
            for a in range(n):
                for b in range(n):
                    add(f"Q{g + 1}[{a + 1},{b + 1}]", samples.blocks[:, g, a, b])
        else:
            for b in range(n):
                add(f"P{g + 1}[{b + 1}]", samples.blocks[:, g, b])
    return SummaryTable(level, tuple(rows), samples.acceptance_rates)


def symmetric_probability_interval(row: np.ndarray, level: float = 0.95
                                   ) -> tuple[int, int, float]:
    """Smallest symmetric expansion around the rounded mean position that
    holds at least ``level`` probability.

    ``row`` is a pmf over positions 0..T. Each step widens the interval by
    one position on both sides, skipping sides that have run off the
    support. Returns (lo, hi, mean).
    """
    row = np.asarray(row, dtype=np.float64)
    if not (0.0 < level < 1.0):
        raise ValueError(f"level must lie in (0, 1), got {level}")
    if np.any(row < 0) or abs(float(row.sum()) - 1.0) > 1e-6:
        raise ValueError("row must be a probability vector")
    T = len(row) - 1
    mean = float(np.dot(np.arange(T + 1), row))
    center = min(max(int(math.floor(mean + 0.5)), 0), T)
    lo = hi = center
    mass = float(row[center])
    while mass < level and (lo > 0 or hi < T):
        if lo > 0:
            lo -= 1
            mass += float(row[lo])
        if hi < T:
            hi += 1
            mass += float(row[hi])
    return (lo, hi, mean)


def changepoint_intervals(samples: PosteriorSamples, sequence_id: str,
                          level: float = 0.95) -> list[dict]:
    """Symmetric probability interval per changepoint of one sequence."""
    table = changepoint_marginals(samples, sequence_id)
    out = []
    for i in range(samples.K):
        lo, hi, mean = symmetric_probability_interval(table.values[i], level)
        out.append({"sequence_id": sequence_id, "changepoint": i + 1,
                    "mean": mean, "lower": lo, "upper": hi, "level": level})
    return out


def segment_length_posterior(samples: PosteriorSamples, sequence_id: str
                             ) -> list[dict]:
    """Quartile table (min, q1, median, q3, max) of each segment's length."""
    l = samples.sequence_index(sequence_id)
    T = samples.sequence_lengths[l]
    K = samples.K
    tau = samples.tau[:, l, :]
    bounds = np.concatenate([
        np.zeros((samples.n_draws, 1), dtype=np.int64),
        tau,
        np.full((samples.n_draws, 1), T, dtype=np.int64),
    ], axis=1)
    lengths = np.diff(bounds, axis=1)  # (N, K+1)
    out = []
    for i in range(K + 1):
        q0, q1, q2, q3, q4 = np.percentile(lengths[:, i], [0, 25, 50, 75, 100])
        out.append({
            "sequence_id": sequence_id, "segment": i + 1,
            "min": float(q0), "q1": float(q1), "median": float(q2),
            "q3": float(q3), "max": float(q4),
        })
    return out
