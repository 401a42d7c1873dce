"""Synthetic dataset generation from the generative model.

Each sequence draws its changepoints sequentially from the truncated
negative binomial prior, its initial state uniformly over the alphabet,
and its values from the per-segment transition matrices. Named presets
reproduce the simulation studies used throughout the test-suite: binary
sequences of length 200 with one or two changepoints, and 3- and 4-letter
variants of the single-changepoint setting.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CategoricalSequence, SequenceDataset
from .distributions import NEGBIN, DurationTable
from .likelihood import ChangepointVector, position_segments


@dataclass(frozen=True)
class SimulationSpec:
    """Generative configuration for one homogeneous block of sequences.

    ``theta`` holds (r_i, b_i) per changepoint; ``matrices`` the K+1
    per-segment transition matrices, rows indexed by the previous value.
    """

    n: int
    K: int
    L: int
    lengths: tuple[int, ...]
    theta: tuple[tuple[float, float], ...]
    matrices: tuple
    seed: int = 0
    id_prefix: str = "s"
    id_offset: int = 0

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if len(self.lengths) != self.L:
            raise ValueError(f"need {self.L} lengths, got {len(self.lengths)}")
        if any(t < 1 for t in self.lengths):
            raise ValueError("sequence lengths must be >= 1")
        if len(self.theta) != self.K:
            raise ValueError(f"need {self.K} (r, b) pairs, got {len(self.theta)}")
        if len(self.matrices) != self.K + 1:
            raise ValueError(f"need {self.K + 1} matrices, got {len(self.matrices)}")
        mats = tuple(np.asarray(m, dtype=np.float64) for m in self.matrices)
        object.__setattr__(self, "matrices", mats)
        for m in mats:
            if m.shape != (self.n, self.n):
                raise ValueError(f"matrix shape {m.shape} != ({self.n}, {self.n})")
            if np.any(m < 0) or np.any(np.abs(m.sum(axis=1) - 1.0) > 1e-9):
                raise ValueError("matrices must be row-stochastic")

    @classmethod
    def fixed_length(cls, n, K, L, T, theta, matrices, seed=0, id_prefix="s",
                     id_offset=0) -> "SimulationSpec":
        return cls(n, K, L, (T,) * L, tuple(tuple(t) for t in theta),
                   tuple(matrices), seed, id_prefix, id_offset)


def simulate_dataset(spec: SimulationSpec,
                     rng: np.random.Generator | None = None
                     ) -> tuple[SequenceDataset, list[ChangepointVector]]:
    """Simulate sequences and return them with their true changepoints.

    Draw order per sequence: K changepoints, then y0, then the T values,
    so outputs are bit-reproducible for a given seed.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    cum_rows = [np.cumsum(m, axis=1) for m in spec.matrices]
    sequences = []
    truths = []
    width = max(2, len(str(spec.id_offset + spec.L)))
    for idx in range(spec.L):
        T = spec.lengths[idx]
        tau = []
        prev = 0
        for i in range(spec.K):
            table = DurationTable.build(NEGBIN, spec.theta[i], T)
            prev = table.sample(rng, prev)
            tau.append(prev)
        segs = position_segments(tau, T)
        y0 = int(rng.integers(1, spec.n + 1))
        values = []
        state = y0 - 1
        for j in range(T):
            row = cum_rows[segs[j]][state]
            state = int(np.searchsorted(row, rng.random(), side="right"))
            state = min(state, spec.n - 1)
            values.append(state + 1)
        sid = f"{spec.id_prefix}{spec.id_offset + idx + 1:0{width}d}"
        sequences.append(CategoricalSequence(sid, y0, tuple(values)))
        truths.append(ChangepointVector(tuple(tau)))
    return SequenceDataset(spec.n, tuple(sequences)), truths


def _diag2(d1: float, d2: float) -> list[list[float]]:
    return [[d1, 1.0 - d1], [1.0 - d2, d2]]


_T = 200
_THETA1 = ((0.5, 0.8),)
_SEG1 = _diag2(0.8, 0.8)
_SEG_LAST = _diag2(0.5, 0.4)
_SEG_MID = _diag2(0.2, 0.2)

def _equal_offdiag(diag: tuple[float, ...]) -> list[list[float]]:
    """Matrix with the given diagonal and the remaining row mass spread
    equally over the off-diagonal entries."""
    n = len(diag)
    rows = []
    for k, d in enumerate(diag):
        off = (1.0 - d) / (n - 1)
        rows.append([d if c == k else off for c in range(n)])
    return rows


#: Matrices for the 3- and 4-letter single-changepoint presets.
_SEG1_N3 = _equal_offdiag((0.8, 0.8, 0.8))
_SEG2_N3 = [
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [0.35, 0.30, 0.35],
    [0.375, 0.375, 0.25],
]
_SEG1_N4 = _equal_offdiag((0.8, 0.8, 0.8, 0.8))
_SEG2_N4 = _equal_offdiag((0.25, 0.20, 0.15, 0.10))

PRESETS = ("scenario1", "scenario2", "scenario3", "scenario4", "scenario5")


def scenario_specs(name: str, seed: int = 0) -> list[SimulationSpec]:
    """Component specs for a named preset; multi-block presets get
    sub-seeds derived from the master seed."""
    def sub(k):
        return int(np.random.SeedSequence([seed, k]).generate_state(1)[0])

    if name == "scenario1":
        return [SimulationSpec.fixed_length(2, 1, 10, _T, _THETA1,
                                            (_SEG1, _SEG_LAST), seed)]
    if name in ("scenario2", "scenario3"):
        two_cp = SimulationSpec.fixed_length(
            2, 2, 20 if name == "scenario2" else 10, _T,
            ((0.5, 0.8), (0.75, 0.8)), (_SEG1, _SEG_MID, _SEG_LAST),
            sub(0), id_offset=0)
        one_cp = SimulationSpec.fixed_length(
            2, 1, 10 if name == "scenario2" else 20, _T, _THETA1,
            (_SEG1, _SEG_LAST), sub(1), id_offset=two_cp.L)
        return [two_cp, one_cp]
    if name == "scenario4":
        return [SimulationSpec.fixed_length(3, 1, 10, _T, _THETA1,
                                            (_SEG1_N3, _SEG2_N3), seed)]
    if name == "scenario5":
        return [SimulationSpec.fixed_length(4, 1, 10, _T, _THETA1,
                                            (_SEG1_N4, _SEG2_N4), seed)]
    raise ValueError(f"unknown preset {name!r}; expected one of {PRESETS}")


def simulate_scenario(name: str, seed: int = 0
                      ) -> tuple[SequenceDataset, list[ChangepointVector]]:
    """Simulate a named preset, concatenating its component blocks."""
    specs = scenario_specs(name, seed)
    all_seqs = []
    truths = []
    for spec in specs:
        ds, t = simulate_dataset(spec)
        all_seqs.extend(ds.sequences)
        truths.extend(t)
    return SequenceDataset(specs[0].n, tuple(all_seqs)), truths
