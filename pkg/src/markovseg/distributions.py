"""Duration priors over changepoint positions and Dirichlet utilities.

A changepoint tau_i lives on the integer support {tau_prev, ..., T}
(zero-length segments are allowed, so tau_i == tau_prev is valid). Three
prior families are supported:

* ``negbin``: truncated negative binomial with per-changepoint parameters
  theta_i = (r_i, b_i), both in (0, 1). The shape parameter gamma is set
  by mean-matching, r*T = gamma*(1-b)/b, so the untruncated mean sits at
  a fraction r of the sequence length.
* ``geometric``: truncated geometric with success probability p_i.
* ``uniform``: uniform over the support, requiring no parameters.

All pmfs are normalized exactly over the finite support by log-sum-exp.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

NEGBIN = "negbin"
GEOMETRIC = "geometric"
UNIFORM = "uniform"
FAMILIES = (NEGBIN, GEOMETRIC, UNIFORM)

# Proposal-derived parameters are clamped this far from {0, 1} so that
# log densities stay finite.
EPS = 1e-9


def _check_family(family: str) -> None:
    if family not in FAMILIES:
        raise ValueError(f"unknown duration family {family!r}; expected one of {FAMILIES}")


def _check_unit_open(name: str, x: float) -> None:
    if not (0.0 < x < 1.0):
        raise ValueError(f"{name} must lie strictly inside (0, 1), got {x}")


def gamma_of(theta, T: int) -> float:
    """Shape parameter of the negative binomial duration prior.

    Solves r*T = gamma*(1-b)/b for gamma, i.e. the untruncated prior mean
    equals r*T.
    """
    r, b = theta
    _check_unit_open("r", r)
    _check_unit_open("b", b)
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    return r * T * b / (1.0 - b)


def duration_log_weights(family: str, theta, T: int) -> np.ndarray:
    """Log pmf over positions 0..T, up to an additive constant.

    Normalizing a suffix {tau_prev..T} of these weights yields the exact
    truncated pmf for any tau_prev, so one table serves every conditioning
    point.
    """
    _check_family(family)
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    taus = np.arange(T + 1, dtype=np.float64)
    if family == NEGBIN:
        g = gamma_of(theta, T)
        b = float(theta[1])
        return gammaln(taus + g) - gammaln(taus + 1.0) + taus * math.log1p(-b)
    if family == GEOMETRIC:
        p = float(theta)
        _check_unit_open("p", p)
        return taus * math.log1p(-p)
    return np.zeros(T + 1)


def suffix_log_norm(logw: np.ndarray) -> np.ndarray:
    """Z[s] = logsumexp(logw[s:]) for every suffix start s."""
    return np.logaddexp.accumulate(logw[::-1])[::-1]


@dataclass(frozen=True)
class DurationTable:
    """Precomputed duration prior for one changepoint at one sequence length.

    ``logw`` holds unnormalized log weights over 0..T and ``logz`` the
    suffix normalizers, so log pmf(tau | tau_prev) = logw[tau] - logz[tau_prev]
    costs O(1).
    """

    family: str
    theta: object
    T: int
    logw: np.ndarray
    logz: np.ndarray

    @classmethod
    def build(cls, family: str, theta, T: int) -> "DurationTable":
        logw = duration_log_weights(family, theta, T)
        return cls(family, theta, T, logw, suffix_log_norm(logw))

    def _check_support(self, tau: int, tau_prev: int) -> None:
        if not (0 <= tau_prev <= self.T):
            raise ValueError(f"tau_prev={tau_prev} outside [0, {self.T}]")
        if not (tau_prev <= tau <= self.T):
            raise ValueError(
                f"tau={tau} outside support [{tau_prev}, {self.T}]"
            )

    def log_pmf(self, tau: int, tau_prev: int) -> float:
        self._check_support(tau, tau_prev)
        return float(self.logw[tau] - self.logz[tau_prev])

    def pmf(self, tau_prev: int) -> np.ndarray:
        """Normalized pmf over the support {tau_prev..T}."""
        self._check_support(tau_prev, tau_prev)
        return np.exp(self.logw[tau_prev:] - self.logz[tau_prev])

    def sample(self, rng: np.random.Generator, tau_prev: int) -> int:
        """Exact inverse-CDF draw from the truncated pmf."""
        p = self.pmf(tau_prev)
        c = np.cumsum(p)
        idx = int(np.searchsorted(c, rng.random(), side="right"))
        return tau_prev + min(idx, len(c) - 1)

    def sample_many(self, rng: np.random.Generator, tau_prev, size: int) -> np.ndarray:
        """Vectorized inverse-CDF draws; tau_prev may be a scalar or an array
        of per-draw conditioning points."""
        prev = np.broadcast_to(np.asarray(tau_prev, dtype=np.int64), (size,))
        w = np.exp(self.logw - self.logw.max())
        cum = np.concatenate([[0.0], np.cumsum(w)])
        base = cum[prev]
        span = cum[-1] - base
        u = rng.random(size)
        out = np.searchsorted(cum, base + u * span, side="right") - 1
        out = np.minimum(out, self.T).astype(np.int64)
        # Suffix weights can underflow to zero when the prior mass sits far
        # below tau_prev; fall back to per-draw normalized sampling there.
        bad = span <= 0.0
        if np.any(bad):
            for k in np.nonzero(bad)[0]:
                out[k] = self.sample(rng, int(prev[k]))
        return out


def duration_log_pmf(tau: int, tau_prev: int, T: int, theta, family: str) -> float:
    """Exact log pmf of a changepoint at tau given the previous one."""
    return DurationTable.build(family, theta, T).log_pmf(tau, tau_prev)


def sample_duration(rng: np.random.Generator, tau_prev: int, T: int, theta,
                    family: str) -> int:
    """Draw one changepoint position from the truncated prior."""
    return DurationTable.build(family, theta, T).sample(rng, tau_prev)


@dataclass(frozen=True)
class ChangepointPriorParams:
    """Per-changepoint duration prior parameters.

    ``values`` holds one entry per changepoint: (r_i, b_i) pairs for
    ``negbin``, p_i floats for ``geometric``, and nothing for ``uniform``.
    """

    family: str
    K: int
    values: tuple

    def __post_init__(self):
        _check_family(self.family)
        if self.K < 0:
            raise ValueError(f"K must be >= 0, got {self.K}")
        expected = 0 if self.family == UNIFORM else self.K
        if len(self.values) != expected:
            raise ValueError(
                f"{self.family} prior needs {expected} parameter entries, "
                f"got {len(self.values)}"
            )
        for v in self.values:
            if self.family == NEGBIN:
                r, b = v
                _check_unit_open("r", r)
                _check_unit_open("b", b)
            else:
                _check_unit_open("p", v)

    def theta(self, i: int):
        """Parameters of changepoint i (0-based); None for the uniform family."""
        if not (0 <= i < self.K):
            raise IndexError(f"changepoint index {i} outside 0..{self.K - 1}")
        return None if self.family == UNIFORM else self.values[i]


def changepoint_prior_log(tau, T: int, params: ChangepointPriorParams) -> float:
    """Joint log prior of an ordered changepoint vector.

    The product of truncated duration pmfs, each conditioned on the
    previous changepoint (tau_0 = 0).
    """
    tau = tuple(int(t) for t in tau)
    if len(tau) != params.K:
        raise ValueError(f"expected {params.K} changepoints, got {len(tau)}")
    total = 0.0
    prev = 0
    for i, t in enumerate(tau):
        total += duration_log_pmf(t, prev, T, params.theta(i), params.family)
        prev = t
    return total


def dirichlet_log_density(x, alpha) -> float:
    """Log density of a Dirichlet distribution at a point on the open simplex."""
    x = np.asarray(x, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    if x.shape != alpha.shape:
        raise ValueError(f"shape mismatch: x {x.shape} vs alpha {alpha.shape}")
    if np.any(alpha <= 0.0):
        raise ValueError("alpha entries must be positive")
    if np.any(x <= 0.0):
        raise ValueError("x must lie on the open simplex (strictly positive)")
    if abs(float(x.sum()) - 1.0) > 1e-8:
        raise ValueError(f"x must sum to 1, got {float(x.sum())}")
    return float(
        gammaln(alpha.sum()) - gammaln(alpha).sum() + ((alpha - 1.0) * np.log(x)).sum()
    )


def sample_dirichlet(rng: np.random.Generator, alpha) -> np.ndarray:
    """Draw from a Dirichlet distribution, kept on the open simplex.

    Components that underflow to exactly zero (possible for tiny
    concentrations) are lifted to a negligible floor and renormalized.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    if np.any(alpha <= 0.0):
        raise ValueError("alpha entries must be positive")
    out = rng.dirichlet(alpha)
    out = np.maximum(out, 1e-300)
    return out / out.sum()
