"""Metropolis-Hastings sampler for changepoints, duration parameters, and
emission blocks.

One iteration performs, in order:

1. for the negbin prior, one random-walk update of (r_i, b_i) for a single
   uniformly chosen changepoint index i (one update of p_i for the
   geometric prior; nothing for the uniform prior),
2. one Dirichlet random-walk update of a single uniformly chosen emission
   row (group and, for markov blocks, row index drawn uniformly),
3. V sweeps, each proposing a +-1 move for every changepoint of every
   sequence in order (l outer, i inner).

Changepoint moves are symmetric, so their acceptance probability is
min{1, exp(dloglik + dlogprior)}. Parameter walks propose from
Dirichlet(a * current) and include the forward/reverse proposal densities
in the ratio. Proposed parameters are clamped 1e-9 away from {0, 1}.
All randomness flows through one Generator, so a chain is bit-reproducible
given its seed; the acceptance uniform is only drawn when the ratio is
below one.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, asdict, replace

import numpy as np
from scipy.special import gammaln

from . import distributions as dist
from ._util import atomic_write_text, dump_json_line
from .data import SequenceDataset
from .distributions import (EPS, GEOMETRIC, NEGBIN, UNIFORM,
                            ChangepointPriorParams)
from .likelihood import (IID, MARKOV, ChangepointVector, TransitionMatrixSet,
                         _loglik_marginal, _loglik_observed, position_segments)

_lgamma = math.lgamma


@dataclass(frozen=True)
class McmcConfig:
    """Sampler configuration. ``segment_groups`` is the optional tying map
    from segment index (0-based, length K+1) to parameter-group id; None
    means one independent group per segment."""

    K: int
    iterations: int = 100_000
    burn_in: int = 10_000
    thin: int = 100
    V: int = 5
    a_r: float = 1000.0
    a_b: float = 100.0
    a_q: float = 1000.0
    seed: int = 0
    duration: str = NEGBIN
    emission: str = MARKOV
    segment_groups: tuple[int, ...] | None = None
    alpha: float = 1.0
    sample_theta: bool = True
    sample_emission: bool = True
    sample_changepoints: bool = True

    def __post_init__(self):
        if self.K < 0:
            raise ValueError(f"K must be >= 0, got {self.K}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not (0 <= self.burn_in < self.iterations):
            raise ValueError(
                f"burn_in must lie in [0, iterations), got {self.burn_in}"
            )
        if self.thin < 1 or self.V < 1:
            raise ValueError("thin and V must be >= 1")
        if (self.iterations - self.burn_in) // self.thin < 1:
            raise ValueError(
                "no draws: need iterations - burn_in >= thin"
            )
        for name in ("a_r", "a_b", "a_q", "alpha"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.duration not in dist.FAMILIES:
            raise ValueError(f"unknown duration family {self.duration!r}")
        if self.emission not in (MARKOV, IID):
            raise ValueError(f"unknown emission family {self.emission!r}")
        if self.segment_groups is not None:
            sg = tuple(int(g) for g in self.segment_groups)
            object.__setattr__(self, "segment_groups", sg)
            if len(sg) != self.K + 1:
                raise ValueError(
                    f"segment_groups must have K+1={self.K + 1} entries, got {len(sg)}"
                )
            if sorted(set(sg)) != list(range(max(sg) + 1)):
                raise ValueError(f"group ids must be contiguous from 0: {sg}")

    @property
    def n_draws(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    def resolved_groups(self) -> tuple[int, ...]:
        if self.segment_groups is not None:
            return self.segment_groups
        return tuple(range(self.K + 1))


@dataclass(frozen=True)
class McmcState:
    """One full sampler state: per-sequence changepoints, emission blocks,
    and duration prior parameters."""

    tau: tuple[ChangepointVector, ...]
    params: TransitionMatrixSet
    theta: ChangepointPriorParams


def init_state(dataset: SequenceDataset, config: McmcConfig) -> McmcState:
    """Deterministic starting state: changepoints on an even grid
    (tau_i = round(i*T/(K+1))), r_i = i/(K+1), b_i = p_i = 0.5, and uniform
    emission blocks."""
    K = config.K
    tau = tuple(
        ChangepointVector(tuple(int(math.floor(i * T / (K + 1) + 0.5))
                                for i in range(1, K + 1)))
        for T in dataset.lengths
    )
    if config.duration == NEGBIN:
        theta = ChangepointPriorParams(
            NEGBIN, K, tuple((i / (K + 1), 0.5) for i in range(1, K + 1)))
    elif config.duration == GEOMETRIC:
        theta = ChangepointPriorParams(GEOMETRIC, K, (0.5,) * K)
    else:
        theta = ChangepointPriorParams(UNIFORM, K, ())
    params = TransitionMatrixSet.uniform(
        dataset.n, K, config.emission, config.resolved_groups())
    return McmcState(tau, params, theta)


def _beta_log_pdf(x: float, a1: float, a2: float) -> float:
    return (_lgamma(a1 + a2) - _lgamma(a1) - _lgamma(a2)
            + (a1 - 1.0) * math.log(x) + (a2 - 1.0) * math.log(1.0 - x))


def _dir_log_pdf(x: np.ndarray, conc: np.ndarray) -> float:
    if np.any(x <= 0.0):
        return float("-inf")
    return float(gammaln(conc.sum()) - gammaln(conc).sum()
                 + ((conc - 1.0) * np.log(x)).sum())


class Chain:
    """Mutable sampler state plus the update moves.

    The hot changepoint loop keeps Python-list mirrors of the duration
    tables, the log emission blocks, and the observation codes, which makes
    single-element lookups several times cheaper than numpy scalar access.
    """

    def __init__(self, dataset: SequenceDataset, config: McmcConfig,
                 rng: np.random.Generator | None = None,
                 init: McmcState | None = None):
        self.dataset = dataset
        self.cfg = config
        self.rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.n = dataset.n
        self.L = dataset.L
        self.K = config.K
        self.V = config.V
        self.markov = config.emission == MARKOV
        self.lengths = list(dataset.lengths)
        self.sg = list(config.resolved_groups())
        self.sg_np = np.asarray(self.sg, dtype=np.int64)
        self.G = max(self.sg) + 1

        state = init if init is not None else init_state(dataset, config)
        self._check_state(state)

        self.codes = [seq.codes() for seq in dataset.sequences]
        self.codes_list = [c.tolist() for c in self.codes]
        self.clean = [not seq.has_missing for seq in dataset.sequences]

        self.tau = [list(cv.tau) for cv in state.tau]
        if config.duration == NEGBIN:
            self.r = [float(v[0]) for v in state.theta.values]
            self.b = [float(v[1]) for v in state.theta.values]
        elif config.duration == GEOMETRIC:
            self.p = [float(v) for v in state.theta.values]
        self.blocks = [np.array(g, dtype=np.float64) for g in state.params.groups]
        self._refresh_logb()

        # Duration tables per changepoint: {T: (logw list, logz list)}.
        self.tabs = [self._tables_for(self._theta_i(i)) for i in range(self.K)]

        self._rebuild_counts()
        self.miss_ll = [0.0] * self.L
        for l in range(self.L):
            if not self.clean[l]:
                self.miss_ll[l] = self._marginal(l, self.tau[l], self.logb)

        kinds = ["changepoint", "q_row"]
        if self.K > 0 and config.duration == NEGBIN:
            kinds += ["r", "b"]
        elif self.K > 0 and config.duration == GEOMETRIC:
            kinds += ["p"]
        self.tallies = {k: [0, 0] for k in kinds}

    # -- construction helpers -------------------------------------------

    def _check_state(self, state: McmcState) -> None:
        if len(state.tau) != self.L:
            raise ValueError(f"state has {len(state.tau)} tau vectors for L={self.L}")
        for cv, T in zip(state.tau, self.lengths):
            if cv.K != self.K:
                raise ValueError(f"tau vector has K={cv.K}, config K={self.K}")
            cv.validate_for(T)
        p = state.params
        if p.emission != self.cfg.emission or p.n != self.n:
            raise ValueError("params incompatible with dataset/config")
        if tuple(p.segment_groups) != tuple(self.sg):
            raise ValueError("params tying map disagrees with config")
        th = state.theta
        if th.family != self.cfg.duration or th.K != self.K:
            raise ValueError("theta incompatible with config")

    def _theta_i(self, i: int):
        if self.cfg.duration == NEGBIN:
            return (self.r[i], self.b[i])
        if self.cfg.duration == GEOMETRIC:
            return self.p[i]
        return None

    def _tables_for(self, theta_i) -> dict:
        out = {}
        for T in set(self.lengths):
            logw = dist.duration_log_weights(self.cfg.duration, theta_i, T)
            logz = dist.suffix_log_norm(logw)
            out[T] = (logw.tolist(), logz.tolist())
        return out

    def _refresh_logb(self) -> None:
        with np.errstate(divide="ignore"):
            self.logb = np.log(np.stack(self.blocks))
        self.logb_list = [b.tolist() for b in self.logb]

    def _rebuild_counts(self) -> None:
        shape = (self.K + 1, self.n, self.n) if self.markov else (self.K + 1, self.n)
        A = np.zeros(shape, dtype=np.int64)
        for l in range(self.L):
            if not self.clean[l]:
                continue
            c = self.codes[l]
            segs = position_segments(self.tau[l], self.lengths[l])
            if self.markov:
                np.add.at(A, (segs, c[:-1], c[1:]), 1)
            else:
                np.add.at(A, (segs, c[1:]), 1)
        self.A = A

    def _marginal(self, l: int, tau, logb: np.ndarray) -> float:
        return _loglik_marginal(self.codes[l], tau, self.sg_np, logb,
                                self.cfg.emission)

    # -- likelihood views (tests, reports) ------------------------------

    def loglik_full(self, l: int) -> float:
        """Fresh log likelihood of sequence l at the current state."""
        if self.clean[l]:
            return _loglik_observed(self.codes[l], self.tau[l], self.sg_np,
                                    self.logb, self.cfg.emission)
        return self._marginal(l, self.tau[l], self.logb)

    def total_loglik(self) -> float:
        return sum(self.loglik_full(l) for l in range(self.L))

    # -- changepoint move ------------------------------------------------

    def _cp_ratio(self, l: int, i: int, new: int):
        """(log target ratio, marginal loglik at proposal or None) for a
        +-1 move of changepoint i in sequence l."""
        tau_l = self.tau[l]
        t0 = tau_l[i]
        T = self.lengths[l]
        wi = self.tabs[i][T][0]
        logr = wi[new] - wi[t0]
        if i < self.K - 1:
            zn = self.tabs[i + 1][T][1]
            logr += zn[t0] - zn[new]
        gi = self.sg[i]
        gn = self.sg[i + 1]
        new_ll = None
        if self.clean[l]:
            if gi != gn:
                c = self.codes_list[l]
                j = new if new > t0 else t0
                a = c[j - 1]
                b = c[j]
                if self.markov:
                    d = self.logb_list[gi][a][b] - self.logb_list[gn][a][b]
                else:
                    d = self.logb_list[gi][b] - self.logb_list[gn][b]
                logr += d if new > t0 else -d
        else:
            cand = list(tau_l)
            cand[i] = new
            new_ll = self._marginal(l, cand, self.logb)
            logr += new_ll - self.miss_ll[l]
        return logr, new_ll

    def changepoint_log_ratio(self, l: int, i: int, new: int) -> float:
        """Log acceptance ratio of moving changepoint i of sequence l to
        ``new`` (must be one step from its current value and inside the
        bracket of its neighbours)."""
        tau_l = self.tau[l]
        t0 = tau_l[i]
        if abs(new - t0) != 1:
            raise ValueError(f"only +-1 moves are supported, got {t0} -> {new}")
        lo = tau_l[i - 1] if i > 0 else 0
        hi = tau_l[i + 1] if i < self.K - 1 else self.lengths[l]
        if not (lo <= new <= hi):
            raise ValueError(f"move to {new} leaves the bracket [{lo}, {hi}]")
        return self._cp_ratio(l, i, new)[0]

    def update_changepoint(self, l: int, i: int) -> bool:
        """One symmetric +-1 move; invalid targets auto-reject."""
        tal = self.tallies["changepoint"]
        tal[1] += 1
        rng = self.rng
        tau_l = self.tau[l]
        t0 = tau_l[i]
        new = t0 + 1 if rng.random() < 0.5 else t0 - 1
        lo = tau_l[i - 1] if i > 0 else 0
        hi = tau_l[i + 1] if i < self.K - 1 else self.lengths[l]
        if new < lo or new > hi:
            return False
        logr, new_ll = self._cp_ratio(l, i, new)
        if logr != logr:  # NaN from inf - inf: reject
            return False
        if logr < 0.0 and rng.random() >= math.exp(logr):
            return False
        tau_l[i] = new
        tal[0] += 1
        if self.clean[l]:
            c = self.codes_list[l]
            j = new if new > t0 else t0
            src, dst = (i + 1, i) if new > t0 else (i, i + 1)
            if self.markov:
                self.A[src, c[j - 1], c[j]] -= 1
                self.A[dst, c[j - 1], c[j]] += 1
            else:
                self.A[src, c[j]] -= 1
                self.A[dst, c[j]] += 1
        else:
            self.miss_ll[l] = new_ll
        return True

    # -- duration parameter moves ----------------------------------------

    def theta_log_ratio(self, i: int, field: str, value: float) -> float:
        """Log target ratio (changepoint prior only) of setting parameter
        ``field`` in {"r", "b", "p"} of changepoint i to ``value``."""
        if field == "r":
            cand_theta = (value, self.b[i])
        elif field == "b":
            cand_theta = (self.r[i], value)
        elif field == "p":
            cand_theta = value
        else:
            raise ValueError(f"unknown theta field {field!r}")
        cand = self._tables_for(cand_theta)
        total = 0.0
        for l in range(self.L):
            T = self.lengths[l]
            wc, zc = cand[T]
            w0, z0 = self.tabs[i][T]
            t = self.tau[l][i]
            prev = self.tau[l][i - 1] if i > 0 else 0
            total += (wc[t] - zc[prev]) - (w0[t] - z0[prev])
        return total

    def _theta_walk(self, i: int, field: str, cur: float, a: float, kind: str) -> bool:
        tal = self.tallies[kind]
        tal[1] += 1
        rng = self.rng
        a1 = max(a * cur, EPS)
        a2 = max(a * (1.0 - cur), EPS)
        cand = float(rng.beta(a1, a2))
        cand = min(max(cand, EPS), 1.0 - EPS)
        logr = self.theta_log_ratio(i, field, cand)
        b1 = max(a * cand, EPS)
        b2 = max(a * (1.0 - cand), EPS)
        logr += _beta_log_pdf(cur, b1, b2) - _beta_log_pdf(cand, a1, a2)
        if logr != logr:
            return False
        if logr < 0.0 and rng.random() >= math.exp(logr):
            return False
        if field == "r":
            self.r[i] = cand
        elif field == "b":
            self.b[i] = cand
        else:
            self.p[i] = cand
        self.tabs[i] = self._tables_for(self._theta_i(i))
        tal[0] += 1
        return True

    def update_r(self, i: int) -> bool:
        return self._theta_walk(i, "r", self.r[i], self.cfg.a_r, "r")

    def update_b(self, i: int) -> bool:
        return self._theta_walk(i, "b", self.b[i], self.cfg.a_b, "b")

    def update_p(self, i: int) -> bool:
        """Geometric success probability; uses the a_b walk concentration."""
        return self._theta_walk(i, "p", self.p[i], self.cfg.a_b, "p")

    # -- emission move ----------------------------------------------------

    def _group_counts(self, g: int, k: int | None) -> np.ndarray:
        """Transition counts pooled over every segment tied to group g."""
        segs = [i for i, gi in enumerate(self.sg) if gi == g]
        if self.markov:
            return sum(self.A[i, k, :] for i in segs)
        return sum(self.A[i] for i in segs)

    def q_row_log_ratio(self, g: int, k: int | None, prop: np.ndarray) -> float:
        """Log target ratio (likelihood + Dirichlet prior) for replacing row
        k of group g (the whole vector for iid blocks) with ``prop``."""
        prop = np.asarray(prop, dtype=np.float64)
        row = self.blocks[g][k] if self.markov else self.blocks[g]
        with np.errstate(divide="ignore"):
            log_prop = np.log(prop)
            log_row = np.log(row)
        cnt = self._group_counts(g, k)
        pos = cnt > 0
        dll = float((cnt[pos] * (log_prop[pos] - log_row[pos])).sum())
        cand_logb = None
        if not all(self.clean):
            cand_logb = self.logb.copy()
            if self.markov:
                cand_logb[g, k, :] = log_prop
            else:
                cand_logb[g, :] = log_prop
            for l in range(self.L):
                if not self.clean[l]:
                    dll += self._marginal(l, self.tau[l], cand_logb) - self.miss_ll[l]
        if self.cfg.alpha != 1.0:
            dll += float((self.cfg.alpha - 1.0) * (log_prop - log_row).sum())
        return dll

    def update_q_row(self, g: int, k: int | None = None) -> bool:
        tal = self.tallies["q_row"]
        tal[1] += 1
        rng = self.rng
        a_q = self.cfg.a_q
        row = self.blocks[g][k] if self.markov else self.blocks[g]
        fwd = np.maximum(a_q * row, EPS)
        prop = rng.dirichlet(fwd)
        prop = np.maximum(prop, EPS)
        prop = prop / prop.sum()
        logr = self.q_row_log_ratio(g, k, prop)
        rev = np.maximum(a_q * prop, EPS)
        logr += _dir_log_pdf(row, rev) - _dir_log_pdf(prop, fwd)
        if logr != logr:
            return False
        if logr < 0.0 and rng.random() >= math.exp(logr):
            return False
        if self.markov:
            self.blocks[g][k] = prop
            self.logb[g, k, :] = np.log(prop)
            self.logb_list[g][k] = self.logb[g, k].tolist()
        else:
            self.blocks[g][:] = prop
            self.logb[g, :] = np.log(prop)
            self.logb_list[g] = self.logb[g].tolist()
        for l in range(self.L):
            if not self.clean[l]:
                self.miss_ll[l] = self._marginal(l, self.tau[l], self.logb)
        tal[0] += 1
        return True

    # -- schedule ---------------------------------------------------------

    def run_iteration(self) -> None:
        cfg = self.cfg
        rng = self.rng
        if cfg.sample_theta and self.K > 0 and cfg.duration != UNIFORM:
            i = int(rng.integers(self.K))
            if cfg.duration == NEGBIN:
                self.update_r(i)
                self.update_b(i)
            else:
                self.update_p(i)
        if cfg.sample_emission:
            g = int(rng.integers(self.G))
            if self.markov:
                self.update_q_row(g, int(rng.integers(self.n)))
            else:
                self.update_q_row(g)
        if cfg.sample_changepoints and self.K > 0:
            update = self.update_changepoint
            for _ in range(self.V):
                for l in range(self.L):
                    for i in range(self.K):
                        update(l, i)

    def run(self, progress=None, progress_every: int = 20000) -> "PosteriorSamples":
        cfg = self.cfg
        tau_snaps = []
        theta_snaps = []
        block_snaps = []
        for t in range(1, cfg.iterations + 1):
            self.run_iteration()
            if t > cfg.burn_in and (t - cfg.burn_in) % cfg.thin == 0:
                tau_snaps.append([list(x) for x in self.tau])
                theta_snaps.append(self._theta_snapshot())
                block_snaps.append(np.stack([b.copy() for b in self.blocks]))
            if progress is not None and t % progress_every == 0:
                progress(t, cfg.iterations)
        N = len(tau_snaps)
        tau_arr = np.asarray(tau_snaps, dtype=np.int64).reshape(N, self.L, self.K)
        if cfg.duration == NEGBIN:
            theta_arr = np.asarray(theta_snaps, dtype=np.float64).reshape(N, self.K, 2)
        elif cfg.duration == GEOMETRIC:
            theta_arr = np.asarray(theta_snaps, dtype=np.float64).reshape(N, self.K)
        else:
            theta_arr = np.zeros((N, 0))
        return PosteriorSamples(
            config=cfg,
            sequence_ids=self.dataset.ids,
            sequence_lengths=tuple(self.lengths),
            n=self.n,
            tau=tau_arr,
            theta=theta_arr,
            blocks=np.asarray(block_snaps),
            accept={k: (v[0], v[1]) for k, v in self.tallies.items()},
        )

    def _theta_snapshot(self):
        if self.cfg.duration == NEGBIN:
            return [[self.r[i], self.b[i]] for i in range(self.K)]
        if self.cfg.duration == GEOMETRIC:
            return list(self.p)
        return []

    @property
    def state(self) -> McmcState:
        """Immutable snapshot of the current state."""
        tau = tuple(ChangepointVector(tuple(t)) for t in self.tau)
        if self.cfg.duration == NEGBIN:
            theta = ChangepointPriorParams(
                NEGBIN, self.K, tuple((self.r[i], self.b[i]) for i in range(self.K)))
        elif self.cfg.duration == GEOMETRIC:
            theta = ChangepointPriorParams(GEOMETRIC, self.K, tuple(self.p))
        else:
            theta = ChangepointPriorParams(UNIFORM, self.K, ())
        params = TransitionMatrixSet(self.cfg.emission,
                                     tuple(b.copy() for b in self.blocks),
                                     tuple(self.sg))
        return McmcState(tau, params, theta)


@dataclass
class PosteriorSamples:
    """Thinned post-burn-in draws from one chain.

    ``tau`` has shape (N, L, K); ``theta`` is (N, K, 2) for the negbin
    prior, (N, K) for geometric, (N, 0) for uniform; ``blocks`` is
    (N, G, n, n) for markov emission or (N, G, n) for iid.
    """

    config: McmcConfig
    sequence_ids: tuple[str, ...]
    sequence_lengths: tuple[int, ...]
    n: int
    tau: np.ndarray
    theta: np.ndarray
    blocks: np.ndarray
    accept: dict

    @property
    def n_draws(self) -> int:
        return self.tau.shape[0]

    @property
    def L(self) -> int:
        return len(self.sequence_ids)

    @property
    def K(self) -> int:
        return self.config.K

    @property
    def G(self) -> int:
        return self.blocks.shape[1]

    @property
    def acceptance_rates(self) -> dict:
        return {k: (acc / att if att else 0.0) for k, (acc, att) in self.accept.items()}

    def sequence_index(self, seq_id: str) -> int:
        try:
            return self.sequence_ids.index(seq_id)
        except ValueError:
            raise KeyError(f"no sequence {seq_id!r} in posterior") from None

    def state(self, j: int) -> McmcState:
        """Materialize draw j as a full sampler state."""
        cfg = self.config
        tau = tuple(ChangepointVector(tuple(int(t) for t in row))
                    for row in self.tau[j])
        if cfg.duration == NEGBIN:
            values = tuple((float(r), float(b)) for r, b in self.theta[j])
            theta = ChangepointPriorParams(NEGBIN, cfg.K, values)
        elif cfg.duration == GEOMETRIC:
            theta = ChangepointPriorParams(
                GEOMETRIC, cfg.K, tuple(float(p) for p in self.theta[j]))
        else:
            theta = ChangepointPriorParams(UNIFORM, cfg.K, ())
        params = TransitionMatrixSet(cfg.emission, tuple(self.blocks[j]),
                                     cfg.resolved_groups())
        return McmcState(tau, params, theta)

    def save(self, path) -> None:
        """Write header plus one JSON line per draw (matrices flattened
        row-major)."""
        header = {
            "format": "markovseg-posterior",
            "version": 1,
            "config": asdict(self.config),
            "n": self.n,
            "sequence_ids": list(self.sequence_ids),
            "sequence_lengths": list(self.sequence_lengths),
            "acceptance": {k: {"accepted": a, "attempted": t}
                           for k, (a, t) in self.accept.items()},
        }
        lines = [dump_json_line(header)]
        for j in range(self.n_draws):
            lines.append(dump_json_line({
                "tau": self.tau[j],
                "theta": self.theta[j],
                "blocks": [g.reshape(-1) for g in self.blocks[j]],
            }))
        atomic_write_text(path, "\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "PosteriorSamples":
        with open(path) as fh:
            header = json.loads(fh.readline())
            if header.get("format") != "markovseg-posterior":
                raise ValueError(f"{path}: not a posterior file")
            cfg_d = dict(header["config"])
            if cfg_d.get("segment_groups") is not None:
                cfg_d["segment_groups"] = tuple(cfg_d["segment_groups"])
            config = McmcConfig(**cfg_d)
            ids = tuple(header["sequence_ids"])
            lengths = tuple(int(t) for t in header["sequence_lengths"])
            n = int(header["n"])
            K = config.K
            G = max(config.resolved_groups()) + 1
            tau_snaps, theta_snaps, block_snaps = [], [], []
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                d = json.loads(line)
                tau_snaps.append(d["tau"])
                theta_snaps.append(d["theta"])
                if config.emission == MARKOV:
                    block_snaps.append(
                        [np.asarray(b).reshape(n, n) for b in d["blocks"]])
                else:
                    block_snaps.append([np.asarray(b) for b in d["blocks"]])
        N = len(tau_snaps)
        tau = np.asarray(tau_snaps, dtype=np.int64).reshape(N, len(ids), K)
        if config.duration == NEGBIN:
            theta = np.asarray(theta_snaps, dtype=np.float64).reshape(N, K, 2)
        elif config.duration == GEOMETRIC:
            theta = np.asarray(theta_snaps, dtype=np.float64).reshape(N, K)
        else:
            theta = np.zeros((N, 0))
        blocks = np.asarray(block_snaps, dtype=np.float64)
        if config.emission == MARKOV:
            blocks = blocks.reshape(N, G, n, n)
        else:
            blocks = blocks.reshape(N, G, n)
        accept = {k: (int(v["accepted"]), int(v["attempted"]))
                  for k, v in header.get("acceptance", {}).items()}
        return cls(config, ids, lengths, n, tau, theta, blocks, accept)


def run_chain(dataset: SequenceDataset, config: McmcConfig,
              rng: np.random.Generator | None = None,
              progress=None) -> PosteriorSamples:
    """Run one chain to completion and return its thinned draws."""
    return Chain(dataset, config, rng).run(progress=progress)


def seed_for_sequence(master_seed: int, seq_id: str) -> int:
    """Stable per-sequence seed; depends only on the master seed and the id,
    never on the other sequences present."""
    digest = hashlib.sha256(seq_id.encode()).digest()
    word = int.from_bytes(digest[:8], "little")
    return int(np.random.SeedSequence([master_seed, word]).generate_state(1)[0])


def run_chain_per_sequence(dataset: SequenceDataset, config: McmcConfig,
                           progress=None) -> dict:
    """Fit each sequence with its own independent chain.

    Returns {sequence id: PosteriorSamples}. Each chain's seed derives from
    (config.seed, id), so a sequence's fit is bit-identical no matter what
    other sequences the dataset holds.
    """
    out = {}
    for seq in dataset.sequences:
        sub = dataset.subset([seq.id])
        cfg = replace(config, seed=seed_for_sequence(config.seed, seq.id))
        out[seq.id] = run_chain(sub, cfg, progress=progress)
    return out
