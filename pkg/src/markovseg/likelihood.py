"""Piecewise-homogeneous sequence likelihoods.

A changepoint vector (tau_1 <= ... <= tau_K) partitions positions 1..T into
K+1 segments: position j belongs to segment i when tau_{i-1} < j <= tau_i
(tau_0 = 0, tau_{K+1} = T). Zero-length segments are legal and simply own
no positions. Within segment i the sequence follows the i-th parameter
block: a transition matrix row-indexed by y_{j-1} (``markov``) or a single
emission probability vector ignoring y_{j-1} (``iid``). The first position
of a segment conditions on the last value of the previous segment using the
new segment's block.

Missing observations are never imputed; they are summed out exactly by a
forward recursion over the hidden values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .data import CategoricalSequence

MARKOV = "markov"
IID = "iid"
EMISSIONS = (MARKOV, IID)

_SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class ChangepointVector:
    """Ordered changepoint positions 0 <= tau_1 <= ... <= tau_K."""

    tau: tuple[int, ...]

    def __post_init__(self):
        tau = tuple(int(t) for t in self.tau)
        object.__setattr__(self, "tau", tau)
        prev = 0
        for t in tau:
            if t < prev:
                raise ValueError(f"changepoints must be non-decreasing and >= 0: {tau}")
            prev = t

    @property
    def K(self) -> int:
        return len(self.tau)

    def validate_for(self, T: int) -> None:
        if self.tau and self.tau[-1] > T:
            raise ValueError(f"changepoint {self.tau[-1]} exceeds T={T}")

    def segment_lengths(self, T: int) -> tuple[int, ...]:
        """Lengths of the K+1 segments, including zero-length ones."""
        self.validate_for(T)
        bounds = (0,) + self.tau + (T,)
        return tuple(bounds[i + 1] - bounds[i] for i in range(len(bounds) - 1))


def segment_index(j: int, tauvec: ChangepointVector) -> int:
    """1-based segment of position j: the smallest i with j <= tau_i, else K+1."""
    if j < 1:
        raise ValueError(f"position must be >= 1, got {j}")
    for i, t in enumerate(tauvec.tau):
        if j <= t:
            return i + 1
    return tauvec.K + 1


def position_segments(tau, T: int) -> np.ndarray:
    """0-based segment index for every position 1..T, vectorized."""
    tau_arr = np.asarray(tau, dtype=np.int64)
    return np.searchsorted(tau_arr, np.arange(1, T + 1), side="left")


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TransitionMatrixSet:
    """Per-segment emission parameters with optional tying.

    ``groups`` holds the distinct parameter blocks; ``segment_groups`` maps
    each of the K+1 segments (0-based) to a group id, so tied segments
    reference identical parameters by construction. Markov blocks are (n, n)
    row-stochastic matrices; iid blocks are probability vectors of length n.
    """

    emission: str
    groups: tuple[np.ndarray, ...]
    segment_groups: tuple[int, ...]

    def __post_init__(self):
        if self.emission not in EMISSIONS:
            raise ValueError(f"unknown emission family {self.emission!r}")
        groups = tuple(_as_readonly(g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        seg = tuple(int(g) for g in self.segment_groups)
        object.__setattr__(self, "segment_groups", seg)
        if len(seg) < 1:
            raise ValueError("need at least one segment")
        G = len(groups)
        if sorted(set(seg)) != list(range(G)):
            raise ValueError(
                f"segment_groups must reference every group 0..{G - 1} exactly: {seg}"
            )
        ndim = 2 if self.emission == MARKOV else 1
        n = groups[0].shape[-1]
        for g in groups:
            if g.ndim != ndim or g.shape != ((n, n) if ndim == 2 else (n,)):
                raise ValueError(f"block shape {g.shape} inconsistent with n={n}")
            rows = g if ndim == 2 else g[None, :]
            if np.any(rows < 0.0):
                raise ValueError("probabilities must be non-negative")
            if np.any(np.abs(rows.sum(axis=1) - 1.0) > _SIMPLEX_TOL):
                raise ValueError("rows must sum to 1 within 1e-12")

    @property
    def n(self) -> int:
        return self.groups[0].shape[-1]

    @property
    def K(self) -> int:
        return len(self.segment_groups) - 1

    @property
    def G(self) -> int:
        return len(self.groups)

    def block(self, segment: int) -> np.ndarray:
        """Parameter block of a 0-based segment index."""
        return self.groups[self.segment_groups[segment]]

    def log_groups(self) -> np.ndarray:
        """Stacked log parameters, shape (G, n, n) or (G, n); log 0 = -inf."""
        stacked = np.stack(self.groups)
        with np.errstate(divide="ignore"):
            return np.log(stacked)

    @classmethod
    def untied(cls, blocks, emission: str = MARKOV) -> "TransitionMatrixSet":
        """One independent group per segment."""
        blocks = tuple(blocks)
        return cls(emission, blocks, tuple(range(len(blocks))))

    @classmethod
    def uniform(cls, n: int, K: int, emission: str = MARKOV,
                segment_groups=None) -> "TransitionMatrixSet":
        """All blocks uniform over the alphabet (the sampler's start state)."""
        if segment_groups is None:
            segment_groups = tuple(range(K + 1))
        G = max(segment_groups) + 1
        shape = (n, n) if emission == MARKOV else (n,)
        return cls(emission, tuple(np.full(shape, 1.0 / n) for _ in range(G)),
                   tuple(segment_groups))


def tie_ends_groups(K: int) -> tuple[int, ...]:
    """Segment-to-group map sharing one block between the first and last
    segments. Rejected for K=1, where it would erase the changepoint."""
    if K == 1:
        raise ValueError("tying first and last segments is incompatible with K=1")
    if K == 0:
        return (0,)
    return (0,) + tuple(range(1, K)) + (0,)


def _codes_of(seq: CategoricalSequence) -> np.ndarray:
    return seq.codes()


def _loglik_observed(codes: np.ndarray, tau, seg_groups, log_groups: np.ndarray,
                     emission: str) -> float:
    """Log likelihood for a fully observed code array (no -1 entries)."""
    T = len(codes) - 1
    segs = position_segments(tau, T)
    gidx = np.asarray(seg_groups, dtype=np.int64)[segs]
    if emission == MARKOV:
        vals = log_groups[gidx, codes[:-1], codes[1:]]
    else:
        vals = log_groups[gidx, codes[1:]]
    total = float(vals.sum())
    return total if total == total else float("-inf")  # NaN only from inf - inf


def _loglik_marginal(codes: np.ndarray, tau, seg_groups, log_groups: np.ndarray,
                     emission: str) -> float:
    """Marginal log likelihood with missing values summed out exactly."""
    T = len(codes) - 1
    segs = position_segments(tau, T)
    sg = np.asarray(seg_groups, dtype=np.int64)
    if emission == IID:
        total = 0.0
        for j in range(1, T + 1):
            v = log_groups[sg[segs[j - 1]]]
            o = codes[j]
            total += float(v[o]) if o >= 0 else float(logsumexp(v))
        return total
    # Markov: forward recursion over the value at each position.
    z = None  # log weights over the current position's value
    prev = codes[0]
    for j in range(1, T + 1):
        M = log_groups[sg[segs[j - 1]]]
        if z is None:
            w = M[prev]
        else:
            w = logsumexp(z[:, None] + M, axis=0)
        o = codes[j]
        if o >= 0:
            z = np.full_like(w, -np.inf)
            z[o] = w[o]
        else:
            z = w
    return float(logsumexp(z))


def log_likelihood(seq: CategoricalSequence, tauvec: ChangepointVector,
                   params: TransitionMatrixSet) -> float:
    """Exact log likelihood of a fully observed sequence.

    Zero-probability transitions yield -inf rather than an exception.
    """
    if seq.has_missing:
        raise ValueError(
            f"sequence {seq.id!r} contains missing values; use "
            "log_likelihood_marginal_missing"
        )
    tauvec.validate_for(seq.T)
    if tauvec.K != params.K:
        raise ValueError(f"tau has K={tauvec.K} but params have K={params.K}")
    return _loglik_observed(_codes_of(seq), tauvec.tau, params.segment_groups,
                            params.log_groups(), params.emission)


def log_likelihood_marginal_missing(seq: CategoricalSequence,
                                    tauvec: ChangepointVector,
                                    params: TransitionMatrixSet) -> float:
    """Log likelihood with missing entries marginalized out.

    Equals ``log_likelihood`` exactly when the sequence has no missing
    values; a fully missing sequence yields 0 (probability one).
    """
    tauvec.validate_for(seq.T)
    if tauvec.K != params.K:
        raise ValueError(f"tau has K={tauvec.K} but params have K={params.K}")
    return _loglik_marginal(_codes_of(seq), tauvec.tau, params.segment_groups,
                            params.log_groups(), params.emission)


def transition_counts(seq: CategoricalSequence, tauvec: ChangepointVector,
                      n: int) -> np.ndarray:
    """Per-segment transition count matrices, shape (K+1, n, n).

    Transitions with a missing endpoint are excluded; zero-length segments
    produce all-zero blocks.
    """
    tauvec.validate_for(seq.T)
    codes = _codes_of(seq)
    T = seq.T
    segs = position_segments(tauvec.tau, T)
    prev, cur = codes[:-1], codes[1:]
    ok = (prev >= 0) & (cur >= 0)
    counts = np.zeros((tauvec.K + 1, n, n), dtype=np.int64)
    np.add.at(counts, (segs[ok], prev[ok], cur[ok]), 1)
    return counts
