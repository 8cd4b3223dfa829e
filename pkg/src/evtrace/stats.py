"""Overhead statistics and the per-event-cost histogram.

All inputs are integer nanosecond readings, so the mean is computed from the
exact integer sum (one correctly rounded division at the end) and the spread
as a two-pass sample standard deviation with math.fsum accumulating the
squared residuals. No accumulation drift, independent of sample order.
"""

from __future__ import annotations

import dataclasses
import math

__all__ = [
    "HistogramReport",
    "OverheadStats",
    "StatsError",
    "histogram",
    "outlier_mask",
    "overhead_stats",
]

SAMPLE_FIELDS = ("t_total_ns", "t_capture_ns", "t_send_ns")


class StatsError(Exception):
    pass


@dataclasses.dataclass(frozen=True)
class OverheadStats:
    """Summary of one timing field after outlier removal."""

    field: str
    sample_count: int  # before removal
    kept: int
    removed: int
    sigma: float
    mean_ns: float
    stddev_ns: float
    min_ns: int
    max_ns: int


def _mean(values) -> float:
    return sum(values) / len(values)


def _stddev(values, mean: float) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    return math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))


def outlier_mask(values, mean: float, stddev: float, sigma: float = 3.0) -> list[bool]:
    """True where |value - mean| exceeds sigma standard deviations (strictly)."""
    limit = sigma * stddev
    return [abs(v - mean) > limit for v in values]


def overhead_stats(samples, field: str = "t_total_ns", sigma: float = 3.0) -> OverheadStats:
    """Mean/stddev of one sample field with one round of sigma-clipping.

    Readings beyond `sigma` standard deviations of the raw mean are dropped
    (scheduler preemptions, GC pauses), then mean and stddev are recomputed
    over what is left. One pass only; the clip is not iterated.
    """
    if field not in SAMPLE_FIELDS:
        raise StatsError(f"unknown sample field {field!r}; expected one of {SAMPLE_FIELDS}")
    if not samples:
        raise StatsError("no samples")
    values = [getattr(s, field) for s in samples]
    raw_mean = _mean(values)
    raw_stddev = _stddev(values, raw_mean)
    mask = outlier_mask(values, raw_mean, raw_stddev, sigma)
    kept = [v for v, out in zip(values, mask) if not out]
    if not kept:
        raise StatsError(
            f"outlier removal at sigma={sigma} discarded all {len(values)} samples"
        )
    mean = _mean(kept)
    return OverheadStats(
        field=field,
        sample_count=len(values),
        kept=len(kept),
        removed=len(values) - len(kept),
        sigma=sigma,
        mean_ns=mean,
        stddev_ns=_stddev(kept, mean),
        min_ns=min(kept),
        max_ns=max(kept),
    )


@dataclasses.dataclass(frozen=True)
class HistogramReport:
    """Per-event cost distribution in standard-deviation-wide bins.

    Bin k holds samples with mean + k*stddev <= value < mean + (k+1)*stddev.
    Samples that carried no screenshot in a screenshots-on session sit in a
    separate no_screenshot bucket: they belong to a structurally cheaper
    population and would otherwise smear the left tail.
    """

    field: str
    mean_ns: float
    stddev_ns: float
    bins: dict[int, int]
    no_screenshot: int
    total: int

    def format_lines(self) -> list[str]:
        lines = [
            f"samples {self.total}  mean {self.mean_ns:.0f} ns  "
            f"stddev {self.stddev_ns:.0f} ns  ({self.field})"
        ]
        counted = self.total - self.no_screenshot
        if self.stddev_ns == 0.0 and self.bins:
            lines.append(_bar_line("all at mean (stddev 0)", counted, self.total))
            if self.no_screenshot:
                lines.append(_bar_line("no screenshot", self.no_screenshot, self.total))
            return lines
        for k in sorted(self.bins):
            lines.append(_bar_line(f"[{k:+d}s,{k + 1:+d}s)", self.bins[k], self.total))
        if self.no_screenshot:
            lines.append(_bar_line("no screenshot", self.no_screenshot, self.total))
        return lines


def _bar_line(label: str, count: int, total: int) -> str:
    share = count / total if total else 0.0
    bar = "#" * max(1, round(share * 50)) if count else ""
    return f"{label:>14}  {count:>8}  {share * 100:5.1f}%  {bar}"


def histogram(samples, stats: OverheadStats, *, screenshots_enabled: bool) -> HistogramReport:
    """Bin every sample; nothing is dropped, so bin masses sum to len(samples)."""
    bins: dict[int, int] = {}
    no_screenshot = 0
    for s in samples:
        if screenshots_enabled and s.t_capture_ns == 0:
            no_screenshot += 1
            continue
        value = getattr(s, stats.field)
        if stats.stddev_ns == 0.0:
            k = 0
        else:
            k = math.floor((value - stats.mean_ns) / stats.stddev_ns)
        bins[k] = bins.get(k, 0) + 1
    return HistogramReport(
        field=stats.field,
        mean_ns=stats.mean_ns,
        stddev_ns=stats.stddev_ns,
        bins=bins,
        no_screenshot=no_screenshot,
        total=len(samples),
    )
