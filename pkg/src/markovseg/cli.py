"""Command-line interface.

Subcommands: simulate (generative spec or preset -> dataset + truth),
fit (dataset -> posterior, summary, marginal tables), cv (dataset ->
cross-validated scores and paired model comparisons), score (posterior +
held-out dataset -> predictive scores), report (posterior -> all summary
tables and figures).

Every run is reproducible from its --seed; file writes are atomic, so an
interrupted run never leaves a truncated output behind.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, plots
from ._util import fmt_float, write_csv, write_json
from .data import SequenceDataset, load_dataset, make_folds, save_dataset
from .distributions import FAMILIES, NEGBIN
from .likelihood import EMISSIONS, MARKOV, tie_ends_groups
from .sampler import McmcConfig, PosteriorSamples, run_chain, run_chain_per_sequence
from .selection import (MODEL_NAMES, CvReport, compare_models, cv_score,
                        named_model, predictive_log_score_sequence)
from .simulate import PRESETS, SimulationSpec, simulate_dataset, simulate_scenario

MARGINAL_HEADER = ["sequence_id", "position", "segment_or_index", "probability"]


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _progress(tag: str):
    def cb(t, total):
        _log(f"{tag}: iteration {t}/{total}")
    return cb


def _dataset_format(path: str, override: str | None) -> str:
    if override:
        return override
    return "csv" if path.endswith(".csv") else "jsonl"


def _load(args) -> SequenceDataset:
    fmt = _dataset_format(args.data, getattr(args, "format", None))
    ds = load_dataset(args.data, format=fmt,
                      missing_token=args.missing_token, n=args.n)
    for w in ds.warnings:
        _log(f"warning: {w}")
    return ds


def _mcmc_config(args) -> McmcConfig:
    groups = tie_ends_groups(args.K) if args.tie_ends else None
    return McmcConfig(
        K=args.K, iterations=args.iterations, burn_in=args.burn_in,
        thin=args.thin, V=args.V, a_r=args.a_r, a_b=args.a_b, a_q=args.a_q,
        seed=args.seed, duration=args.duration, emission=args.emission,
        segment_groups=groups)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- simulate

def _spec_from_json(path: str, seed: int) -> SimulationSpec:
    with open(path) as fh:
        d = json.load(fh)
    lengths = d.get("lengths")
    if lengths is None:
        lengths = [d["T"]] * d["L"]
    return SimulationSpec(
        n=int(d["n"]), K=int(d["K"]), L=len(lengths),
        lengths=tuple(int(t) for t in lengths),
        theta=tuple(tuple(float(x) for x in pair) for pair in d.get("theta", [])),
        matrices=tuple(d["matrices"]),
        seed=int(d.get("seed", seed)),
        id_prefix=d.get("id_prefix", "s"),
        id_offset=int(d.get("id_offset", 0)))


def cmd_simulate(args) -> int:
    if (args.preset is None) == (args.spec is None):
        raise ValueError("simulate needs exactly one of --preset or --spec")
    if args.preset:
        dataset, truths = simulate_scenario(args.preset, seed=args.seed)
    else:
        spec = _spec_from_json(args.spec, args.seed)
        dataset, truths = simulate_dataset(spec)
    out = _out_dir(args)
    save_dataset(dataset, out / "dataset.jsonl")
    truth = {seq.id: list(tau.tau)
             for seq, tau in zip(dataset.sequences, truths)}
    write_json(out / "truth.json", truth)
    _log(f"simulate: wrote {dataset.L} sequences (n={dataset.n}) to {out}")
    return 0


# --------------------------------------------------------------------- fit

def _write_marginal_tables(out: Path, fits: list[PosteriorSamples]) -> None:
    """Membership, changepoint-position and segment-length tables pooled
    over every (posterior, sequence) pair."""
    mem_rows = []
    cp_rows = []
    len_rows = []
    for samples in fits:
        for sid in samples.sequence_ids:
            for sid_, pos, idx, p in analysis.segment_marginals(samples, sid).rows():
                mem_rows.append((sid_, pos, idx, fmt_float(p)))
            for sid_, pos, idx, p in analysis.changepoint_marginals(samples, sid).rows():
                cp_rows.append((sid_, pos, idx, fmt_float(p)))
            for row in analysis.segment_length_posterior(samples, sid):
                len_rows.append((row["sequence_id"], row["segment"],
                                 fmt_float(row["min"]), fmt_float(row["q1"]),
                                 fmt_float(row["median"]), fmt_float(row["q3"]),
                                 fmt_float(row["max"])))
    write_csv(out / "segment_membership.csv", MARGINAL_HEADER, mem_rows)
    write_csv(out / "changepoint_positions.csv", MARGINAL_HEADER, cp_rows)
    write_csv(out / "segment_lengths.csv",
              ["sequence_id", "segment", "min", "q1", "median", "q3", "max"],
              len_rows)


def _summary_payload(fits: list[PosteriorSamples], level: float) -> dict:
    if len(fits) == 1:
        s = fits[0]
        return {"config": dataclasses.asdict(s.config), "n": s.n,
                "sequence_ids": list(s.sequence_ids),
                **analysis.param_summary(s, level).to_dict()}
    return {"sequences": {
        "+".join(s.sequence_ids): {
            "config": dataclasses.asdict(s.config),
            **analysis.param_summary(s, level).to_dict()}
        for s in fits}}


def cmd_fit(args) -> int:
    dataset = _load(args)
    config = _mcmc_config(args)
    out = _out_dir(args)
    if args.per_sequence:
        by_id = run_chain_per_sequence(dataset, config,
                                       progress=_progress("fit"))
        fits = [by_id[sid] for sid in dataset.ids]
        for sid in dataset.ids:
            by_id[sid].save(out / f"posterior_{sid}.jsonl")
    else:
        samples = run_chain(dataset, config, progress=_progress("fit"))
        fits = [samples]
        samples.save(out / "posterior.jsonl")
    write_json(out / "summary.json", _summary_payload(fits, args.level))
    _write_marginal_tables(out, fits)
    n_draws = sum(f.n_draws for f in fits)
    _log(f"fit: wrote {n_draws} draws across {len(fits)} chain(s) to {out}")
    return 0


# ------------------------------------------------------------------ report

def cmd_report(args) -> int:
    fits = [PosteriorSamples.load(p) for p in args.posterior]
    out = _out_dir(args)
    write_json(out / "summary.json", _summary_payload(fits, args.level))
    _write_marginal_tables(out, fits)
    int_rows = []
    for samples in fits:
        for sid in samples.sequence_ids:
            for row in analysis.changepoint_intervals(samples, sid, args.level):
                int_rows.append((row["sequence_id"], row["changepoint"],
                                 fmt_float(row["mean"]), row["lower"],
                                 row["upper"], fmt_float(row["level"])))
    write_csv(out / "intervals.csv",
              ["sequence_id", "changepoint", "mean", "lower", "upper", "level"],
              int_rows)
    if not args.no_figures:
        mem = []
        cps = []
        lens = []
        for samples in fits:
            for sid in samples.sequence_ids:
                mem.append(analysis.segment_marginals(samples, sid))
                cps.append(analysis.changepoint_marginals(samples, sid))
                lens.extend(analysis.segment_length_posterior(samples, sid))
        plots.plot_segment_membership(mem, out / "segment_membership.png")
        plots.plot_changepoint_marginals(cps, out / "changepoint_positions.png")
        plots.plot_segment_lengths(lens, out / "segment_lengths.png")
    _log(f"report: wrote tables for {sum(f.L for f in fits)} sequence(s) to {out}")
    return 0


# ------------------------------------------------------------------- score

def cmd_score(args) -> int:
    samples = PosteriorSamples.load(args.posterior)
    dataset = _load(args)
    if dataset.n != samples.n:
        raise ValueError(f"dataset has n={dataset.n} but posterior has "
                         f"n={samples.n}")
    rng = np.random.default_rng(args.seed)
    per_seq = {}
    for seq in dataset.sequences:
        lnp = predictive_log_score_sequence(
            seq, samples, args.M, rng, n_target=args.n_target,
            log_mean_exp=args.log_mean_exp)
        per_seq[seq.id] = {"lnp": lnp, "T": seq.T}
    total_T = sum(v["T"] for v in per_seq.values())
    score = sum(v["lnp"] for v in per_seq.values()) / total_T
    out = _out_dir(args)
    write_csv(out / "scores.csv", ["sequence_id", "T", "lnp"],
              [(sid, v["T"], fmt_float(v["lnp"])) for sid, v in per_seq.items()])
    write_json(out / "scores.json",
               {"score": score, "per_sequence": per_seq, "M": args.M,
                "seed": args.seed, "log_mean_exp": args.log_mean_exp})
    print(fmt_float(score))
    return 0


# ---------------------------------------------------------------------- cv

def _parse_k_list(text: str) -> list[int]:
    try:
        ks = [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise ValueError(f"bad --K list {text!r}; expected e.g. 0,1,2")
    if not ks or any(k < 0 for k in ks):
        raise ValueError(f"bad --K list {text!r}; entries must be >= 0")
    return ks


def cmd_cv(args) -> int:
    dataset = _load(args)
    ks = _parse_k_list(args.K)
    folds = args.folds if args.folds is not None else dataset.L
    strategy = args.fold_strategy
    if strategy is None:
        strategy = "hold_one_out" if folds == dataset.L else "random_partition"
    plan = make_folds(dataset, folds, strategy, args.seed)
    base = McmcConfig(
        K=ks[0], iterations=args.iterations, burn_in=args.burn_in,
        thin=args.thin, V=args.V, a_r=args.a_r, a_b=args.a_b, a_q=args.a_q,
        seed=args.seed)
    runs: list[CvReport] = []
    for name in args.models:
        for K in ks:
            groups = tie_ends_groups(K) if args.tie_ends else None
            model = named_model(name, K, groups)
            _log(f"cv: scoring {name} K={K} over {folds} folds")
            runs.append(cv_score(dataset, plan, model, base, M=args.M,
                                 n_target=args.n_target, jobs=args.jobs))
    best = max(runs, key=lambda r: r.median_score)
    comparisons = [compare_models(best, r) for r in runs if r is not best]
    out = _out_dir(args)
    write_csv(out / "cv_scores.csv", ["model", "K", "fold", "score"],
              [(r.label, r.K, f, fmt_float(s))
               for r in runs for f, s in enumerate(r.fold_scores)])
    comp_rows = []
    diffs_by_label = {}
    for r, c in zip([r for r in runs if r is not best], comparisons):
        key = f"{r.label}-K{r.K}"
        diffs_by_label[key] = list(c.differences)
        for f, d in enumerate(c.differences):
            comp_rows.append((r.label, r.K, f, fmt_float(d)))
    write_csv(out / "cv_comparisons.csv",
              ["model", "K", "fold", "best_minus_model"], comp_rows)
    write_json(out / "cv_report.json", {
        "folds": folds, "strategy": strategy, "M": args.M, "seed": args.seed,
        "runs": [r.to_dict() for r in runs],
        "best": {"model": best.label, "K": best.K,
                 "median_score": best.median_score},
        "comparisons": [
            {"best": c.label_a, "model": r.label, "K": r.K,
             "differences": list(c.differences), "median": c.median}
            for r, c in zip([r for r in runs if r is not best], comparisons)],
    })
    if not args.no_figures and diffs_by_label:
        plots.plot_score_differences(
            diffs_by_label, out / "cv_differences.png",
            reference=f"{best.label}-K{best.K}")
    _log(f"cv: best model {best.label} K={best.K} "
         f"(median score {fmt_float(best.median_score)})")
    return 0


# ------------------------------------------------------------------ parser

def _add_data_flags(p) -> None:
    p.add_argument("data", help="dataset path (JSONL or CSV)")
    p.add_argument("--n", type=int, default=None,
                   help="number of categories (required unless the JSONL "
                        "header carries it)")
    p.add_argument("--missing-token", default="NA",
                   help="CSV token marking a missing value")
    p.add_argument("--format", choices=["jsonl", "csv"], default=None,
                   help="dataset format (default: by file extension)")


def _add_sampler_flags(p, k_list: bool = False) -> None:
    if k_list:
        p.add_argument("--K", default="0,1,2",
                       help="comma-separated changepoint counts, e.g. 0,1,2")
    else:
        p.add_argument("--K", type=int, default=1,
                       help="number of changepoints")
    p.add_argument("--iterations", type=int, default=100_000)
    p.add_argument("--burn-in", type=int, default=10_000, dest="burn_in")
    p.add_argument("--thin", type=int, default=100)
    p.add_argument("--V", type=int, default=5,
                   help="changepoint sweeps per iteration")
    p.add_argument("--a-r", type=float, default=1000.0, dest="a_r")
    p.add_argument("--a-b", type=float, default=100.0, dest="a_b")
    p.add_argument("--a-q", type=float, default=1000.0, dest="a_q")
    p.add_argument("--emission", choices=list(EMISSIONS), default=MARKOV)
    p.add_argument("--duration", choices=list(FAMILIES), default=NEGBIN)
    p.add_argument("--tie-ends", action="store_true", dest="tie_ends",
                   help="share one transition block between the first and "
                        "last segments (invalid with K=1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="markovseg",
        description="Bayesian changepoint detection in categorical sequences "
                    "with piecewise-homogeneous Markov dynamics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a synthetic dataset")
    p.add_argument("--preset", choices=list(PRESETS), default=None)
    p.add_argument("--spec", default=None,
                   help="JSON file with n, K, lengths (or L and T), theta, "
                        "matrices")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".", dest="out_dir")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="sample the posterior for one dataset")
    _add_data_flags(p)
    _add_sampler_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-sequence", action="store_true", dest="per_sequence",
                   help="fit each sequence with its own independent chain")
    p.add_argument("--level", type=float, default=0.95,
                   help="credible-interval level for summary.json")
    p.add_argument("--out-dir", default=".", dest="out_dir")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cv", help="cross-validated model comparison")
    _add_data_flags(p)
    _add_sampler_flags(p, k_list=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--models", default=["proposed"],
                   type=lambda s: [m for m in s.split(",") if m],
                   help=f"comma-separated model names from {MODEL_NAMES}")
    p.add_argument("--folds", type=int, default=None,
                   help="fold count (default: one fold per sequence)")
    p.add_argument("--fold-strategy", dest="fold_strategy", default=None,
                   choices=["hold_one_out", "random_partition"])
    p.add_argument("--M", type=int, default=1000,
                   help="changepoint draws per posterior draw when scoring")
    p.add_argument("--n-target", type=int, default=None, dest="n_target",
                   help="cap on posterior draws used for scoring")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel fold processes")
    p.add_argument("--no-figures", action="store_true", dest="no_figures")
    p.add_argument("--out-dir", default=".", dest="out_dir")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("score", help="score held-out data under a posterior")
    p.add_argument("posterior", help="posterior JSONL from fit")
    _add_data_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--M", type=int, default=1000)
    p.add_argument("--n-target", type=int, default=None, dest="n_target")
    p.add_argument("--log-mean-exp", action="store_true", dest="log_mean_exp",
                   help="average predictive densities instead of their logs")
    p.add_argument("--out-dir", default=".", dest="out_dir")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="summaries, tables and figures for a "
                                      "fitted posterior")
    p.add_argument("posterior", nargs="+",
                   help="posterior JSONL file(s) from fit")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--no-figures", action="store_true", dest="no_figures")
    p.add_argument("--out-dir", default=".", dest="out_dir")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
