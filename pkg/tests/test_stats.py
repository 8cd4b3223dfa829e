"""Overhead statistics: sigma-clipped mean/stddev and the per-cost histogram.
Expected values are computed by hand or with textbook formulas inline."""

import dataclasses
import math

import pytest

from evtrace.agent import OverheadSample
from evtrace.stats import StatsError, histogram, outlier_mask, overhead_stats


def samples_of(totals, captures=None):
    captures = captures or [0] * len(totals)
    return [OverheadSample(i + 1, t, c, 0)
            for i, (t, c) in enumerate(zip(totals, captures))]


class TestOverheadStats:
    def test_constant_samples(self):
        stats = overhead_stats(samples_of([2, 2, 2]))
        assert stats.mean_ns == 2.0
        assert stats.stddev_ns == 0.0
        assert (stats.kept, stats.removed) == (3, 0)
        assert (stats.min_ns, stats.max_ns) == (2, 2)

    def test_textbook_sample_stddev(self):
        # mean 2, squared residuals 1+0+1, /(n-1) = 1
        stats = overhead_stats(samples_of([1, 2, 3]))
        assert stats.mean_ns == 2.0
        assert stats.stddev_ns == 1.0

    def test_field_selection(self):
        samples = samples_of([10, 20, 30], captures=[1, 2, 3])
        assert overhead_stats(samples, "t_capture_ns").mean_ns == 2.0
        assert overhead_stats(samples, "t_total_ns").mean_ns == 20.0

    def test_unknown_field_rejected(self):
        with pytest.raises(StatsError, match="unknown sample field 'latency'"):
            overhead_stats(samples_of([1]), "latency")

    def test_no_samples_rejected(self):
        with pytest.raises(StatsError, match="no samples"):
            overhead_stats([])

    def test_all_samples_removed_rejected(self):
        # sigma=0.5 with mean 2, stddev ~1.41: both readings are outliers
        with pytest.raises(StatsError, match="sigma=0.5 discarded all 2 samples"):
            overhead_stats(samples_of([1, 3]), sigma=0.5)

    def test_single_spike_removed(self):
        values = [100] * 100 + [10**6]
        stats = overhead_stats(samples_of(values))
        assert stats.sample_count == 101
        assert stats.removed == 1
        assert stats.kept == 100
        assert stats.mean_ns == 100.0
        assert stats.max_ns == 100

    def test_boundary_value_is_kept(self):
        # clipping is strict: a value inside the 3 sigma fence always stays
        totals = [10, 10, 10, 10, 10, 10, 10, 10, 10, 20]
        raw_mean = sum(totals) / len(totals)
        raw_std = math.sqrt(
            math.fsum((v - raw_mean) ** 2 for v in totals) / (len(totals) - 1))
        assert abs(20 - raw_mean) < 3 * raw_std  # sanity: inside the fence
        stats = overhead_stats(samples_of(totals))
        assert stats.removed == 0

    def test_outlier_mask_is_strict_at_the_limit(self):
        mask = outlier_mask([0, 3, 4], mean=0.0, stddev=1.0, sigma=3.0)
        assert mask == [False, False, True]

    def test_recomputation_uses_only_kept_values(self):
        values = [100] * 50 + [102] * 50 + [10**9]
        stats = overhead_stats(samples_of(values))
        assert stats.removed == 1
        assert stats.mean_ns == 101.0
        kept = [100] * 50 + [102] * 50
        expected = math.sqrt(math.fsum((v - 101.0) ** 2 for v in kept) / 99)
        assert stats.stddev_ns == expected

    def test_min_max_over_kept_only(self):
        stats = overhead_stats(samples_of([5] * 99 + [10**7]))
        assert stats.max_ns == 5


class TestHistogram:
    def test_handcrafted_binning(self):
        # mean 100, stddev 10: 95 -> bin -1, 100 and 105 -> bin 0, 115 -> bin 1
        samples = samples_of([95, 100, 105, 115])
        stats = overhead_stats(samples)
        stats = dataclasses.replace(stats, mean_ns=100.0, stddev_ns=10.0)
        report = histogram(samples, stats, screenshots_enabled=False)
        assert report.bins == {-1: 1, 0: 2, 1: 1}
        assert report.no_screenshot == 0
        assert report.total == 4

    def test_left_bin_edge_is_closed(self):
        samples = samples_of([110])
        stats = overhead_stats(samples)
        stats = dataclasses.replace(stats, mean_ns=100.0, stddev_ns=10.0)
        report = histogram(samples, stats, screenshots_enabled=False)
        assert report.bins == {1: 1}  # value == mean + 1*stddev lands in bin +1

    def test_zero_stddev_collapses_to_one_bin(self):
        samples = samples_of([7, 7, 7])
        report = histogram(samples, overhead_stats(samples), screenshots_enabled=False)
        assert report.bins == {0: 3}

    def test_no_screenshot_bucket_only_when_enabled(self):
        samples = samples_of([50, 60, 70], captures=[0, 5, 5])
        stats = overhead_stats(samples)
        off = histogram(samples, stats, screenshots_enabled=False)
        on = histogram(samples, stats, screenshots_enabled=True)
        assert off.no_screenshot == 0
        assert sum(off.bins.values()) == 3
        assert on.no_screenshot == 1
        assert sum(on.bins.values()) == 2

    def test_mass_is_conserved(self):
        import random

        rng = random.Random(7)
        totals = [rng.randint(1, 10**6) for _ in range(500)]
        captures = [rng.choice([0, 0, 100]) for _ in range(500)]
        samples = samples_of(totals, captures)
        stats = overhead_stats(samples)
        report = histogram(samples, stats, screenshots_enabled=True)
        assert sum(report.bins.values()) + report.no_screenshot == 500
        assert report.total == 500

    def test_outliers_still_binned(self):
        # stats clip the spike, the histogram does not
        samples = samples_of([100] * 99 + [10**6])
        stats = overhead_stats(samples)
        report = histogram(samples, stats, screenshots_enabled=False)
        assert sum(report.bins.values()) == 100


class TestFormatLines:
    def test_bin_labels_and_header(self):
        samples = samples_of([95, 100, 105, 115])
        stats = overhead_stats(samples)
        stats = dataclasses.replace(stats, mean_ns=100.0, stddev_ns=10.0)
        report = histogram(samples, stats, screenshots_enabled=False)
        lines = report.format_lines()
        assert lines[0].startswith("samples 4  mean 100 ns  stddev 10 ns")
        assert "(t_total_ns)" in lines[0]
        assert any("[-1s,+0s)" in line for line in lines)
        assert any("[+0s,+1s)" in line for line in lines)
        assert any("[+1s,+2s)" in line for line in lines)

    def test_zero_stddev_line(self):
        samples = samples_of([7, 7])
        report = histogram(samples, overhead_stats(samples), screenshots_enabled=False)
        lines = report.format_lines()
        assert any("all at mean (stddev 0)" in line for line in lines)

    def test_no_screenshot_line_present(self):
        samples = samples_of([50, 60, 70], captures=[0, 5, 5])
        report = histogram(samples, overhead_stats(samples), screenshots_enabled=True)
        assert any("no screenshot" in line for line in report.format_lines())

    def test_share_column_sums_to_one_hundred(self):
        samples = samples_of([10, 20, 30, 40])
        stats = overhead_stats(samples)
        report = histogram(samples, stats, screenshots_enabled=False)
        shares = [count / report.total for count in report.bins.values()]
        assert math.isclose(sum(shares), 1.0)
