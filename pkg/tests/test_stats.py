"""Histogram and randomness-analysis tests, brute-force oracles included."""

import itertools
import json
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtimbre.errors import (
    BelowRange,
    CheckpointOutOfRange,
    EmptyHistogram,
    TooManyElements,
    TooShort,
    ZeroVariance,
)
from qtimbre.stats import (
    CorrelationReport,
    Histogram,
    accumulate,
    l1_density_distance,
    longest_repeat,
    normalized_density,
    permutation_chi_square,
    serial_correlation,
    snapshot_series,
    uniform_edges,
    write_histogram_csv,
    write_series,
)

EDGES = [0.0, 0.2, 0.4, 0.6]


class TestAccumulate:
    def test_edge_value_goes_to_upper_bin(self):
        hist = Histogram(EDGES)
        accumulate(hist, 0.4)
        assert hist.counts == [0, 0, 1]

    def test_at_last_edge_overflows(self):
        hist = Histogram(EDGES)
        accumulate(hist, 0.6)
        assert hist.counts == [0, 0, 0]
        assert hist.overflow == 1

    def test_below_range_raises(self):
        hist = Histogram(EDGES)
        with pytest.raises(BelowRange):
            accumulate(hist, -0.1)

    @given(st.lists(st.floats(min_value=0.0, max_value=10.0), max_size=200))
    @settings(max_examples=50)
    def test_total_always_counts_plus_overflow(self, values):
        hist = Histogram(EDGES)
        for v in values:
            hist.add(v)
        assert hist.total == sum(hist.counts) + hist.overflow
        assert hist.total == len(values)

    def test_merge_is_binwise_addition(self):
        a = Histogram.from_values([0.1, 0.3], EDGES)
        b = Histogram.from_values([0.1, 0.7], EDGES)
        merged = a.merge(b)
        assert merged.counts == [2, 1, 0]
        assert merged.overflow == 1
        assert merged.total == 4

    def test_merge_requires_identical_edges(self):
        with pytest.raises(ValueError):
            Histogram(EDGES).merge(Histogram([0.0, 1.0]))


class TestSnapshotSeries:
    def test_totals_follow_checkpoints(self):
        series = snapshot_series([0.1, 0.3], EDGES, [1, 2])
        assert [h.total for h in series.snapshots] == [1, 2]

    def test_checkpoint_beyond_data(self):
        with pytest.raises(CheckpointOutOfRange):
            snapshot_series([0.1, 0.3], EDGES, [3])

    def test_identical_inputs_identical_series(self):
        a = snapshot_series([0.1, 0.3, 0.5], EDGES, [1, 3])
        b = snapshot_series([0.1, 0.3, 0.5], EDGES, [1, 3])
        assert a.snapshots == b.snapshots

    def test_prefix_property_against_rebuild(self):
        rng = random.Random(4)
        intervals = [rng.uniform(0.0, 0.8) for _ in range(100)]
        checkpoints = [5, 17, 60, 100]
        series = snapshot_series(intervals, EDGES, checkpoints)
        for cp, snap in zip(checkpoints, series.snapshots):
            assert snap == Histogram.from_values(intervals[:cp], EDGES)

    def test_checkpoints_must_increase(self):
        with pytest.raises(ValueError):
            snapshot_series([0.1, 0.2], EDGES, [2, 1])


class TestNormalizedDensity:
    def test_uniform_two_bins(self):
        hist = Histogram.from_values([0.1, 0.7], [0.0, 0.5, 1.0])
        assert normalized_density(hist) == [1.0, 1.0]

    def test_empty_raises(self):
        with pytest.raises(EmptyHistogram):
            normalized_density(Histogram(EDGES))

    def test_all_overflow_gives_zero_density(self):
        hist = Histogram.from_values([5.0, 6.0], EDGES)
        assert normalized_density(hist) == [0.0, 0.0, 0.0]

    def test_integrates_to_in_range_fraction(self):
        hist = Histogram.from_values([0.1, 0.3, 0.5, 9.0], EDGES)
        mass = sum(d * w for d, w in zip(normalized_density(hist), hist.widths))
        assert mass == pytest.approx((hist.total - hist.overflow) / hist.total)


class TestL1Distance:
    def test_self_distance_is_zero(self):
        hist = Histogram.from_values([0.1, 0.1, 0.3, 0.5], EDGES)
        dens = normalized_density(hist)
        lookup = dict(zip(hist.midpoints, dens))
        assert l1_density_distance(hist, lambda x: lookup[x]) == 0.0

    def test_zero_function_gives_in_range_mass(self):
        hist = Histogram.from_values([0.1, 0.3, 9.0], EDGES)
        assert l1_density_distance(hist, lambda x: 0.0) == pytest.approx(2.0 / 3.0)

    def test_empty_raises(self):
        with pytest.raises(EmptyHistogram):
            l1_density_distance(Histogram(EDGES), lambda x: 0.0)


class TestSerialCorrelation:
    def test_alternating_stream_is_minus_one(self):
        stream = [0.0, 1.0] * 50
        rep = serial_correlation(stream, lag=1)
        assert rep.coefficient == pytest.approx(-1.0, abs=1e-12)

    def test_constant_stream_zero_variance(self):
        with pytest.raises(ZeroVariance):
            serial_correlation([3.0] * 100, lag=1)

    def test_too_short(self):
        with pytest.raises(TooShort):
            serial_correlation([1.0, 2.0], lag=1)

    def test_matches_numpy_corrcoef(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=500)
        for lag in (1, 2, 5):
            rep = serial_correlation(x, lag)
            oracle = np.corrcoef(x[:-lag], x[lag:])[0, 1]
            assert rep.coefficient == pytest.approx(oracle, abs=1e-12)
            assert rep.n == 500 - lag

    @given(
        st.floats(min_value=0.01, max_value=100.0),
        st.floats(min_value=-50.0, max_value=50.0),
    )
    @settings(max_examples=50)
    def test_affine_invariance(self, a, b):
        rng = np.random.default_rng(12)
        x = rng.uniform(size=200)
        base = serial_correlation(x, lag=1).coefficient
        scaled = serial_correlation(a * x + b, lag=1).coefficient
        assert scaled == pytest.approx(base, abs=1e-12)

    def test_report_fields(self):
        rep = serial_correlation([0.0, 1.0, 0.0, 1.0, 0.0], lag=2)
        assert isinstance(rep, CorrelationReport)
        assert rep.lag == 2
        assert abs(rep.coefficient) <= 1.0


def _brute_longest_repeat(stream) -> int:
    """Cubic scan kept deliberately naive as the oracle."""
    n = len(stream)
    best = 0
    for i in range(n):
        for j in range(i + 1, n):
            length = 0
            while j + length < n and stream[i + length] == stream[j + length]:
                length += 1
            best = max(best, length)
    return best


class TestLongestRepeat:
    def test_repeated_block(self):
        assert longest_repeat(list("abcabc")) == 3

    def test_all_distinct(self):
        assert longest_repeat(list("abcd")) == 0

    def test_overlapping_occurrences(self):
        assert longest_repeat(list("aaaa")) == 3

    def test_empty_and_singleton(self):
        assert longest_repeat([]) == 0
        assert longest_repeat([7]) == 0

    @pytest.mark.parametrize("alphabet,length", [(2, 60), (4, 120), (26, 200)])
    def test_agrees_with_brute_force(self, alphabet, length):
        rng = random.Random(alphabet * 1000 + length)
        for _ in range(15):
            stream = [rng.randrange(alphabet) for _ in range(rng.randrange(2, length))]
            assert longest_repeat(stream) == _brute_longest_repeat(stream)

    def test_works_on_bytes(self):
        assert longest_repeat(b"xyxyxy") == 4


class TestPermutationChiSquare:
    def test_uniform_tally_is_zero(self):
        tally = {perm: 4 for perm in itertools.permutations(range(3))}
        assert permutation_chi_square(tally, 3) == 0.0

    def test_all_mass_on_one_permutation(self):
        # expected 1 per cell: (6-1)^2/1 + 5*(0-1)^2/1 = 30
        assert permutation_chi_square({(0, 1, 2): 6}, 3) == pytest.approx(30.0)

    def test_too_many_elements(self):
        with pytest.raises(TooManyElements):
            permutation_chi_square({tuple(range(7)): 1}, 7)

    def test_rejects_non_permutation_keys(self):
        with pytest.raises(ValueError):
            permutation_chi_square({(0, 0, 2): 1}, 3)

    def test_rejects_empty_tally(self):
        with pytest.raises(ValueError):
            permutation_chi_square({}, 3)


class TestExports:
    def test_histogram_csv_round_trip_fields(self, tmp_path):
        hist = Histogram.from_values([0.1, 0.1, 0.5, 7.0], EDGES)
        path = tmp_path / "hist.csv"
        write_histogram_csv(hist, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "bin_lo,bin_hi,count,density"
        assert len(lines) == 1 + len(hist.counts)
        cells = lines[1].split(",")
        assert float(cells[0]) == 0.0
        assert int(cells[2]) == 2

    def test_series_manifest(self, tmp_path):
        series = snapshot_series([0.1, 0.3, 0.5], EDGES, [1, 3])
        manifest = write_series(series, tmp_path, stem="h")
        payload = json.loads(manifest.read_text())
        assert payload["checkpoints"] == [1, 3]
        for name in payload["files"]:
            assert (tmp_path / name).exists()


class TestUniformEdges:
    def test_basic(self):
        assert uniform_edges(0.0, 1.0, 4) == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])

    def test_rejects_bad_range(self):
        with pytest.raises(ValueError):
            uniform_edges(1.0, 0.0, 4)
