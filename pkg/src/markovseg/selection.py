"""Predictive scoring and cross-validated model selection.

The predictive log probability of a held-out sequence y with length T and
initial state y0 is estimated from N posterior draws by simulating M
changepoint vectors per draw from that draw's duration parameters:

    lnp(y) = (1/N) sum_i (1/M) sum_j ln p(y | tau^[ij], blocks^[i], y0)

Fold scores normalize by total held-out length:
S = sum_l lnp(y^(l)) / sum_l T_l. Averaging the log likelihoods (rather
than the likelihoods) is the default; ``log_mean_exp=True`` switches the
inner average to log-mean-exp.

Named model configurations cover the piecewise-Markov model with the
negative binomial duration prior ("proposed") and the reference points it
is compared against: segment-wise iid emission with the same prior ("si"),
iid emission with geometric durations ("hmm"), Markov emission with
geometric durations ("dhmm"), and a per-sequence variant with uniform
changepoint positions ("uniform_per_sequence").
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .data import CategoricalSequence, FoldPlan, SequenceDataset
from .distributions import GEOMETRIC, NEGBIN, UNIFORM, DurationTable
from .likelihood import IID, MARKOV, _loglik_marginal
from .sampler import McmcConfig, PosteriorSamples, run_chain


@dataclass(frozen=True)
class ModelConfig:
    """A model variant: emission family, duration prior family, K, tying."""

    label: str
    emission: str = MARKOV
    duration: str = NEGBIN
    K: int = 1
    segment_groups: tuple[int, ...] | None = None
    per_sequence: bool = False

    def mcmc_config(self, base: McmcConfig) -> McmcConfig:
        """Bake this variant into a base sampler configuration."""
        return replace(base, K=self.K, emission=self.emission,
                       duration=self.duration,
                       segment_groups=self.segment_groups)


_MODEL_FAMILIES = {
    "proposed": (MARKOV, NEGBIN, False),
    "si": (IID, NEGBIN, False),
    "hmm": (IID, GEOMETRIC, False),
    "dhmm": (MARKOV, GEOMETRIC, False),
    "uniform_per_sequence": (MARKOV, UNIFORM, True),
}

MODEL_NAMES = tuple(_MODEL_FAMILIES)


def named_model(name: str, K: int = 1,
                segment_groups: tuple[int, ...] | None = None) -> ModelConfig:
    """Build one of the named model variants at a given K."""
    if name not in _MODEL_FAMILIES:
        raise ValueError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")
    emission, duration, per_seq = _MODEL_FAMILIES[name]
    return ModelConfig(name, emission, duration, K, segment_groups, per_seq)


def _draw_indices(available: int, n_target: int | None) -> np.ndarray:
    if n_target is None or n_target >= available:
        return np.arange(available)
    if n_target < 1:
        raise ValueError("n_target must be >= 1")
    return np.unique(np.linspace(0, available - 1, n_target).round().astype(int))


def _theta_of_draw(samples: PosteriorSamples, j: int, i: int):
    if samples.config.duration == NEGBIN:
        return (float(samples.theta[j, i, 0]), float(samples.theta[j, i, 1]))
    if samples.config.duration == GEOMETRIC:
        return float(samples.theta[j, i])
    return None


# Log emission entries are floored here before the segment cumulative sums,
# so a zero-probability transition scores like probability exp(-700) instead
# of poisoning whole sums with -inf.
_LOG_FLOOR = -700.0


def _segment_cumsums(codes: np.ndarray, logb: np.ndarray, seg_groups,
                     emission: str) -> list[np.ndarray]:
    """C_i[t] = sum of per-position log probs of positions 1..t under the
    block of segment i; one array of length T+1 per segment."""
    T = len(codes) - 1
    out = []
    for g in seg_groups:
        if emission == MARKOV:
            vals = logb[g][codes[:-1], codes[1:]]
        else:
            vals = logb[g][codes[1:]]
        vals = np.maximum(vals, _LOG_FLOOR)
        c = np.empty(T + 1)
        c[0] = 0.0
        np.cumsum(vals, out=c[1:])
        out.append(c)
    return out


def _loglik_at_taus(cums: list[np.ndarray], taus: np.ndarray, T: int) -> np.ndarray:
    """Log likelihood of each sampled changepoint vector via segment
    cumulative sums. taus has shape (M, K)."""
    M, K = taus.shape
    total = np.zeros(M)
    prev = np.zeros(M, dtype=np.int64)
    for i in range(K):
        t = taus[:, i]
        total += cums[i][t] - cums[i][prev]
        prev = t
    total += cums[K][T] - cums[K][prev]
    return total


def _marginal_at_taus(codes: np.ndarray, logb: np.ndarray, seg_groups,
                      emission: str, taus: np.ndarray) -> np.ndarray:
    """Exact marginal log likelihood per sampled changepoint vector for a
    sequence with missing entries (slow path, loops positions)."""
    sg = np.asarray(seg_groups, dtype=np.int64)
    return np.array([
        _loglik_marginal(codes, taus[m], sg, logb, emission)
        for m in range(taus.shape[0])
    ])


def predictive_log_score_sequence(seq: CategoricalSequence,
                                  samples: PosteriorSamples, M: int,
                                  rng: np.random.Generator,
                                  n_target: int | None = None,
                                  log_mean_exp: bool = False) -> float:
    """Monte Carlo estimate of ln p(y | training draws) for one held-out
    sequence.

    For every retained posterior draw, M changepoint vectors are simulated
    sequentially from the draw's duration parameters at this sequence's
    length; the draw's contribution averages the M log likelihoods
    (or their exponentials when ``log_mean_exp`` is set). ``n_target``
    subsamples the draws evenly when the chain provides more.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    cfg = samples.config
    if samples.n_draws < 1:
        raise ValueError("posterior holds no draws")
    codes = seq.codes()
    T = seq.T
    K = cfg.K
    sg = cfg.resolved_groups()
    clean = not seq.has_missing
    idx = _draw_indices(samples.n_draws, n_target)
    with np.errstate(divide="ignore"):
        logb_all = np.log(samples.blocks)
    per_draw = np.empty(len(idx))
    for out_pos, j in enumerate(idx):
        logb = logb_all[j]
        if K == 0:
            if clean:
                cums = _segment_cumsums(codes, logb, sg, cfg.emission)
                ll = float(cums[0][T])
            else:
                ll = _loglik_marginal(codes, (), np.asarray(sg), logb,
                                      cfg.emission)
            per_draw[out_pos] = ll
            continue
        taus = np.empty((M, K), dtype=np.int64)
        prev = np.zeros(M, dtype=np.int64)
        for i in range(K):
            table = DurationTable.build(cfg.duration, _theta_of_draw(samples, j, i), T)
            prev = table.sample_many(rng, prev, M)
            taus[:, i] = prev
        if clean:
            cums = _segment_cumsums(codes, logb, sg, cfg.emission)
            lls = _loglik_at_taus(cums, taus, T)
        else:
            lls = _marginal_at_taus(codes, logb, sg, cfg.emission, taus)
        if log_mean_exp:
            m = lls.max()
            per_draw[out_pos] = m + np.log(np.mean(np.exp(lls - m)))
        else:
            per_draw[out_pos] = lls.mean()
    return float(per_draw.mean())


@dataclass(frozen=True)
class CvReport:
    """Cross-validation result for one model variant."""

    label: str
    K: int
    fold_scores: tuple[float, ...]
    fold_test_ids: tuple[tuple[str, ...], ...]
    per_sequence: dict
    M: int
    seed: int

    @property
    def median_score(self) -> float:
        return float(np.median(self.fold_scores))

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "K": self.K,
            "fold_scores": list(self.fold_scores),
            "fold_test_ids": [list(t) for t in self.fold_test_ids],
            "per_sequence": {k: dict(v) for k, v in self.per_sequence.items()},
            "M": self.M,
            "seed": self.seed,
            "median_score": self.median_score,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CvReport":
        return cls(
            label=d["label"],
            K=int(d["K"]),
            fold_scores=tuple(float(s) for s in d["fold_scores"]),
            fold_test_ids=tuple(tuple(t) for t in d["fold_test_ids"]),
            per_sequence={k: dict(v) for k, v in d["per_sequence"].items()},
            M=int(d["M"]),
            seed=int(d["seed"]),
        )


@dataclass(frozen=True)
class ModelComparison:
    """Paired per-fold score differences: candidate minus reference."""

    label_a: str
    label_b: str
    differences: tuple[float, ...]

    @property
    def median(self) -> float:
        return float(np.median(self.differences))

    @property
    def quartiles(self) -> tuple[float, float, float]:
        q1, q2, q3 = np.percentile(self.differences, [25, 50, 75])
        return (float(q1), float(q2), float(q3))


def derive_seed(master: int, *key: int) -> int:
    """Deterministic child seed from a master seed and integer key path."""
    return int(np.random.SeedSequence([master, *key]).generate_state(1)[0])


def _run_fold(args):
    (dataset, fold_idx, train_ids, test_ids, model, base, M, n_target) = args
    cfg = model.mcmc_config(base)
    chain_cfg = replace(cfg, seed=derive_seed(base.seed, fold_idx, 0))
    samples = run_chain(dataset.subset(train_ids), chain_cfg)
    rng = np.random.default_rng(derive_seed(base.seed, fold_idx, 1))
    per_seq = {}
    num = 0.0
    den = 0
    for sid in test_ids:
        seq = dataset.by_id(sid)
        lnp = predictive_log_score_sequence(seq, samples, M, rng,
                                            n_target=n_target)
        per_seq[sid] = {"lnp": lnp, "T": seq.T}
        num += lnp
        den += seq.T
    return fold_idx, num / den, per_seq


def cv_score(dataset: SequenceDataset, plan: FoldPlan, model: ModelConfig,
             base: McmcConfig, M: int = 1000, n_target: int | None = None,
             jobs: int = 1) -> CvReport:
    """Cross-validate one model variant over a fold plan.

    Each fold fits its own chain on the training sequences (seed derived
    from the base seed and the fold index) and scores every held-out
    sequence. Results are deterministic for a given base seed and
    independent of execution order; ``jobs`` > 1 runs folds in parallel
    processes.
    """
    if model.per_sequence:
        raise ValueError(
            "per-sequence models have no pooled predictive distribution; "
            "cv_score requires a shared-parameter model"
        )
    tasks = [
        (dataset, f, train, test, model, base, M, n_target)
        for f, (train, test) in enumerate(plan.folds)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_fold, tasks))
    else:
        results = [_run_fold(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    scores = tuple(r[1] for r in results)
    per_seq = {}
    for r in results:
        per_seq.update(r[2])
    return CvReport(model.label, model.K, scores, plan.test_ids, per_seq,
                    M, base.seed)


def compare_models(a: CvReport, b: CvReport) -> ModelComparison:
    """Per-fold paired differences a - b; fold plans must match."""
    if a.fold_test_ids != b.fold_test_ids:
        raise ValueError("reports use different fold plans; differences "
                         "would not be paired")
    diffs = tuple(sa - sb for sa, sb in zip(a.fold_scores, b.fold_scores))
    return ModelComparison(a.label, b.label, diffs)
