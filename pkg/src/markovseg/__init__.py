"""Bayesian changepoint detection in categorical sequences.

Sequences are modeled as piecewise-homogeneous Markov chains whose K
changepoint positions carry a truncated negative binomial prior; a
Metropolis-Hastings sampler targets the joint posterior over positions,
prior parameters and transition blocks, and cross-validated predictive
scores compare candidate models (including independent-emission and
geometric-duration baselines) on held-out sequences.
"""

from .data import (MISSING, CategoricalSequence, FoldPlan, SequenceDataset,
                   dataset_to_csv, load_dataset, make_folds, save_dataset)
from .distributions import (GEOMETRIC, NEGBIN, UNIFORM, ChangepointPriorParams,
                            DurationTable, changepoint_prior_log,
                            duration_log_pmf, gamma_of, sample_duration)
from .likelihood import (IID, MARKOV, ChangepointVector, TransitionMatrixSet,
                         log_likelihood, log_likelihood_marginal_missing,
                         position_segments, segment_index, tie_ends_groups,
                         transition_counts)
from .simulate import (PRESETS, SimulationSpec, scenario_specs,
                       simulate_dataset, simulate_scenario)
from .sampler import (Chain, McmcConfig, McmcState, PosteriorSamples,
                      init_state, run_chain, run_chain_per_sequence,
                      seed_for_sequence)
from .selection import (MODEL_NAMES, CvReport, ModelComparison, ModelConfig,
                        compare_models, cv_score, derive_seed, named_model,
                        predictive_log_score_sequence)
from .analysis import (MarginalTable, SummaryTable, changepoint_intervals,
                       changepoint_marginals, credible_interval, param_summary,
                       segment_length_posterior, segment_marginals,
                       symmetric_probability_interval)

__version__ = "0.1.0"

__all__ = [
    "MISSING", "CategoricalSequence", "SequenceDataset", "FoldPlan",
    "load_dataset", "save_dataset", "dataset_to_csv", "make_folds",
    "NEGBIN", "GEOMETRIC", "UNIFORM", "DurationTable",
    "ChangepointPriorParams", "gamma_of", "duration_log_pmf",
    "sample_duration", "changepoint_prior_log",
    "MARKOV", "IID", "ChangepointVector", "TransitionMatrixSet",
    "segment_index", "position_segments", "tie_ends_groups",
    "log_likelihood", "log_likelihood_marginal_missing", "transition_counts",
    "PRESETS", "SimulationSpec", "simulate_dataset", "simulate_scenario",
    "scenario_specs",
    "McmcConfig", "McmcState", "Chain", "PosteriorSamples", "init_state",
    "run_chain", "run_chain_per_sequence", "seed_for_sequence",
    "MODEL_NAMES", "ModelConfig", "named_model", "CvReport",
    "ModelComparison", "cv_score", "compare_models", "derive_seed",
    "predictive_log_score_sequence",
    "MarginalTable", "SummaryTable", "segment_marginals",
    "changepoint_marginals", "credible_interval", "param_summary",
    "symmetric_probability_interval", "changepoint_intervals",
    "segment_length_posterior",
    "__version__",
]
