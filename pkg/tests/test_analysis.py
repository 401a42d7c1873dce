"""Posterior summary tables checked against direct counting."""
import numpy as np
import pytest

from markovseg.analysis import (
    CHANGEPOINT_POSITION,
    SEGMENT_MEMBERSHIP,
    MarginalTable,
    changepoint_intervals,
    changepoint_marginals,
    credible_interval,
    param_summary,
    segment_length_posterior,
    segment_marginals,
    symmetric_probability_interval,
)
from markovseg.distributions import GEOMETRIC, NEGBIN, UNIFORM
from markovseg.likelihood import IID, MARKOV
from markovseg.sampler import McmcConfig, PosteriorSamples


def tau_samples(tau_draws, T, duration=NEGBIN, emission=MARKOV, n=2):
    """PosteriorSamples with given changepoint draws for one sequence."""
    tau = np.asarray(tau_draws, dtype=np.int64)
    if tau.ndim == 2:
        tau = tau[:, None, :]
    N, L, K = tau.shape
    cfg = McmcConfig(K=K, iterations=N, burn_in=0, thin=1,
                     duration=duration, emission=emission)
    theta = np.zeros((N, K, 2)) + 0.5 if duration == NEGBIN else np.zeros((N, K)) + 0.5
    return PosteriorSamples(
        config=cfg, sequence_ids=tuple(f"s{l}" for l in range(L)),
        sequence_lengths=(T,) * L, n=n, tau=tau,
        theta=theta, blocks=np.full((N, K + 1, n, n), 1.0 / n), accept={})


class TestSegmentMarginals:
    # four draws of a single changepoint on T=5: tau in {0, 2, 2, 5}
    DRAWS = [[0], [2], [2], [5]]

    def test_fractions_match_hand_count(self):
        table = segment_marginals(tau_samples(self.DRAWS, T=5), "s0")
        assert table.kind == SEGMENT_MEMBERSHIP
        want = np.array([
            [0.75, 0.25],   # position 1: in segment 1 unless tau=0
            [0.75, 0.25],
            [0.25, 0.75],   # positions 3..5: only tau=5 keeps segment 1
            [0.25, 0.75],
            [0.25, 0.75],
        ])
        np.testing.assert_allclose(table.values, want, atol=1e-15)

    def test_rows_sum_to_one(self):
        table = segment_marginals(tau_samples(self.DRAWS, T=5), "s0")
        np.testing.assert_allclose(table.values.sum(axis=1), 1.0, atol=1e-15)

    def test_single_draw_gives_indicators(self):
        table = segment_marginals(tau_samples([[3]], T=6), "s0")
        want = np.array([[1, 0]] * 3 + [[0, 1]] * 3, dtype=float)
        np.testing.assert_array_equal(table.values, want)

    def test_zero_length_segment_never_owns_positions(self):
        # tau = (2, 2): segment 2 covers no positions
        table = segment_marginals(tau_samples([[2, 2]], T=4), "s0")
        want = np.array([
            [1, 0, 0], [1, 0, 0], [0, 0, 1], [0, 0, 1]], dtype=float)
        np.testing.assert_array_equal(table.values, want)

    def test_counts_are_integer_multiples_of_one_over_N(self):
        rng = np.random.default_rng(0)
        draws = np.sort(rng.integers(0, 13, (37, 3)), axis=1)
        table = segment_marginals(tau_samples(draws, T=12), "s0")
        scaled = table.values * 37
        np.testing.assert_allclose(scaled, np.round(scaled), atol=1e-9)

    def test_row_format(self):
        table = segment_marginals(tau_samples(self.DRAWS, T=5), "s0")
        rows = list(table.rows())
        assert len(rows) == 5 * 2
        assert rows[0] == ("s0", 1, 1, 0.75)
        assert rows[1] == ("s0", 1, 2, 0.25)


class TestChangepointMarginals:
    def test_frequencies_match_hand_count(self):
        table = changepoint_marginals(
            tau_samples([[0], [2], [2], [5]], T=5), "s0")
        assert table.kind == CHANGEPOINT_POSITION
        want = np.array([[0.25, 0.0, 0.5, 0.0, 0.0, 0.25]])
        np.testing.assert_allclose(table.values, want, atol=1e-15)

    def test_single_draw_is_one_hot(self):
        table = changepoint_marginals(tau_samples([[1, 4]], T=5), "s0")
        want = np.zeros((2, 6))
        want[0, 1] = 1.0
        want[1, 4] = 1.0
        np.testing.assert_array_equal(table.values, want)

    def test_rows_use_zero_based_positions(self):
        table = changepoint_marginals(tau_samples([[0], [2], [2], [5]], T=5),
                                      "s0")
        rows = list(table.rows())
        assert rows[0] == ("s0", 0, 1, 0.25)
        assert rows[2] == ("s0", 2, 1, 0.5)

    def test_membership_tail_equals_changepoint_cdf(self):
        # P(position j lies in segment > i) must equal P(tau_i < j),
        # computed from the two tables independently
        rng = np.random.default_rng(1)
        T, K = 12, 3
        draws = np.sort(rng.integers(0, T + 1, (200, K)), axis=1)
        samples = tau_samples(draws, T=T)
        member = segment_marginals(samples, "s0").values
        cp = changepoint_marginals(samples, "s0").values
        for i in range(1, K + 1):
            for j in range(1, T + 1):
                tail = member[j - 1, i:].sum()
                cdf = cp[i - 1, :j].sum()
                assert tail == pytest.approx(cdf, abs=1e-12)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="marginal kind"):
            MarginalTable("s0", "typo", np.zeros((1, 1)))

    def test_unknown_sequence_rejected(self):
        with pytest.raises(KeyError):
            segment_marginals(tau_samples([[1]], T=3), "nope")


class TestCredibleInterval:
    def test_percentiles_interpolate_linearly(self):
        draws = np.arange(1, 101, dtype=float)
        lo, hi = credible_interval(draws, 0.95)
        assert lo == pytest.approx(3.475, abs=1e-12)
        assert hi == pytest.approx(97.525, abs=1e-12)

    def test_constant_draws_collapse(self):
        assert credible_interval(np.full(50, 2.5)) == (2.5, 2.5)

    def test_level_bounds(self):
        for bad in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                credible_interval(np.ones(3), bad)


class TestSymmetricInterval:
    def test_point_mass_is_width_zero(self):
        row = np.zeros(11)
        row[7] = 1.0
        assert symmetric_probability_interval(row) == (7, 7, 7.0)

    def test_uniform_row_expands_to_95_positions(self):
        row = np.full(100, 0.01)
        lo, hi, mean = symmetric_probability_interval(row, 0.95)
        assert (lo, hi) == (3, 97)
        assert mean == pytest.approx(49.5)

    def test_triangular_row(self):
        row = np.array([0.1, 0.2, 0.4, 0.2, 0.1])
        lo, hi, mean = symmetric_probability_interval(row, 0.6)
        assert (lo, hi) == (1, 3)
        assert mean == pytest.approx(2.0)

    def test_expansion_continues_past_support_edge(self):
        # center sits at 0; only the upper side can keep growing
        row = np.array([0.9, 0.02, 0.02, 0.02, 0.04])
        lo, hi, _ = symmetric_probability_interval(row, 0.95)
        assert lo == 0
        assert hi == 3

    def test_rejects_non_pmf(self):
        with pytest.raises(ValueError, match="probability vector"):
            symmetric_probability_interval(np.array([0.5, 0.4]))
        with pytest.raises(ValueError, match="probability vector"):
            symmetric_probability_interval(np.array([1.5, -0.5]))
        with pytest.raises(ValueError, match="level"):
            symmetric_probability_interval(np.array([1.0]), 1.0)

    def test_interval_rows_match_marginal_row(self):
        samples = tau_samples([[0], [2], [2], [5]], T=5)
        (d,) = changepoint_intervals(samples, "s0", 0.9)
        row = changepoint_marginals(samples, "s0").values[0]
        lo, hi, mean = symmetric_probability_interval(row, 0.9)
        assert d == {"sequence_id": "s0", "changepoint": 1, "mean": mean,
                     "lower": lo, "upper": hi, "level": 0.9}


class TestSegmentLengths:
    def test_quartiles_match_percentile_oracle(self):
        samples = tau_samples([[0], [2], [2], [5]], T=5)
        first, second = segment_length_posterior(samples, "s0")
        assert first == {"sequence_id": "s0", "segment": 1, "min": 0.0,
                         "q1": 1.5, "median": 2.0, "q3": 2.75, "max": 5.0}
        assert second == {"sequence_id": "s0", "segment": 2, "min": 0.0,
                          "q1": 2.25, "median": 3.0, "q3": 3.5, "max": 5.0}

    def test_random_draws_match_percentile_oracle(self):
        rng = np.random.default_rng(2)
        T = 15
        draws = np.sort(rng.integers(0, T + 1, (50, 2)), axis=1)
        samples = tau_samples(draws, T=T)
        rows = segment_length_posterior(samples, "s0")
        assert len(rows) == 3
        bounds = np.column_stack([
            np.zeros(50, dtype=int), draws, np.full(50, T)])
        for i, row in enumerate(rows):
            lengths = bounds[:, i + 1] - bounds[:, i]
            want = np.percentile(lengths, [0, 25, 50, 75, 100])
            got = [row["min"], row["q1"], row["median"], row["q3"], row["max"]]
            np.testing.assert_allclose(got, want, atol=1e-12)


class TestParamSummary:
    def test_names_means_and_acceptance(self):
        N, K, n = 4, 2, 2
        theta = np.zeros((N, K, 2))
        theta[:, 0, 0] = [0.4, 0.5, 0.6, 0.7]   # r1
        theta[:, 0, 1] = 0.8                     # b1
        theta[:, 1, 0] = 0.3
        theta[:, 1, 1] = 0.9
        blocks = np.full((N, K + 1, n, n), 0.5)
        blocks[:, 0, 0, 0] = [0.7, 0.8, 0.9, 1.0]
        cfg = McmcConfig(K=K, iterations=N, burn_in=0, thin=1)
        samples = PosteriorSamples(
            config=cfg, sequence_ids=("a",), sequence_lengths=(10,), n=n,
            tau=np.zeros((N, 1, K), dtype=np.int64), theta=theta,
            blocks=blocks, accept={"tau": (3, 4), "r": (0, 0)})
        table = param_summary(samples, 0.9)
        names = [r.name for r in table.parameters]
        assert names[:4] == ["r1", "b1", "r2", "b2"]
        assert names[4:8] == ["Q1[1,1]", "Q1[1,2]", "Q1[2,1]", "Q1[2,2]"]
        assert len(names) == 4 + 3 * 4
        assert table.by_name("r1").mean == pytest.approx(0.55)
        b1 = table.by_name("b1")
        assert (b1.mean, b1.lower, b1.upper) == (0.8, 0.8, 0.8)
        q = table.by_name("Q1[1,1]")
        assert q.mean == pytest.approx(0.85)
        assert q.lower <= q.mean <= q.upper
        assert table.acceptance == {"tau": 0.75, "r": 0.0}
        with pytest.raises(KeyError):
            table.by_name("r9")

    def test_geometric_and_iid_names(self):
        N, K, n = 3, 1, 3
        cfg = McmcConfig(K=K, iterations=N, burn_in=0, thin=1,
                         duration=GEOMETRIC, emission=IID)
        samples = PosteriorSamples(
            config=cfg, sequence_ids=("a",), sequence_lengths=(8,), n=n,
            tau=np.zeros((N, 1, K), dtype=np.int64),
            theta=np.full((N, K), 0.25),
            blocks=np.full((N, K + 1, n), 1 / 3), accept={})
        names = [r.name for r in param_summary(samples).parameters]
        assert names == ["p1", "P1[1]", "P1[2]", "P1[3]",
                         "P2[1]", "P2[2]", "P2[3]"]

    def test_uniform_duration_has_no_theta_rows(self):
        N, K, n = 2, 1, 2
        cfg = McmcConfig(K=K, iterations=N, burn_in=0, thin=1,
                         duration=UNIFORM)
        samples = PosteriorSamples(
            config=cfg, sequence_ids=("a",), sequence_lengths=(8,), n=n,
            tau=np.zeros((N, 1, K), dtype=np.int64),
            theta=np.zeros((N, 0)),
            blocks=np.full((N, K + 1, n, n), 0.5), accept={})
        names = [r.name for r in param_summary(samples).parameters]
        assert names[0] == "Q1[1,1]"
        assert len(names) == 8

    def test_to_dict_shape(self):
        N, K, n = 2, 0, 2
        cfg = McmcConfig(K=K, iterations=N, burn_in=0, thin=1)
        samples = PosteriorSamples(
            config=cfg, sequence_ids=("a",), sequence_lengths=(5,), n=n,
            tau=np.zeros((N, 1, K), dtype=np.int64),
            theta=np.zeros((N, 0, 2)),
            blocks=np.full((N, 1, n, n), 0.5), accept={})
        d = param_summary(samples, 0.5).to_dict()
        assert d["level"] == 0.5
        assert {r["name"] for r in d["parameters"]} == {
            "Q1[1,1]", "Q1[1,2]", "Q1[2,1]", "Q1[2,2]"}
        assert set(d["parameters"][0]) == {"name", "mean", "lower", "upper"}
