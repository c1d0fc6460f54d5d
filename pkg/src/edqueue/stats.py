"""Waiting-time samples, summary statistics and normalized histograms.

A histogram's densities integrate to one: density[i] = counts[i] /
(total_count * width[i]). Bins are half-open [left, right) with the last
bin closed, so the maximum sample always lands in the final bin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from .simulation import SimulationTrace

__all__ = [
    "SampleSource",
    "WaitingTimeSample",
    "Histogram",
    "SampleSummary",
    "waiting_times",
    "histogram",
    "summary",
]

DEFAULT_BIN_WIDTH = 10.0  # days; coarse enough for desk-scale sample sizes


class SampleSource(Enum):
    SIMULATION = "simulation"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class WaitingTimeSample:
    """Positive waiting times in days, from a trace or from records."""

    values: np.ndarray
    source: SampleSource

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SampleSummary:
    count: int
    mean: float
    max: float
    median: float


@dataclass(frozen=True)
class Histogram:
    """Binned, normalized empirical density.

    ``log_bins`` records whether the edges are geometric; fitting uses it to
    pick geometric rather than arithmetic bin centers.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    densities: np.ndarray
    total_count: int
    log_bins: bool = False

    @property
    def n_bins(self) -> int:
        return len(self.counts)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    def bin_centers(self) -> np.ndarray:
        left, right = self.bin_edges[:-1], self.bin_edges[1:]
        if self.log_bins:
            return np.sqrt(left * right)
        return 0.5 * (left + right)


def _as_values(sample: Union[WaitingTimeSample, Sequence[float], np.ndarray]) -> np.ndarray:
    if isinstance(sample, WaitingTimeSample):
        return np.asarray(sample.values, dtype=float)
    return np.asarray(sample, dtype=float)


def waiting_times(trace: SimulationTrace, include_warmup: bool = False) -> WaitingTimeSample:
    """One waiting time per accepted manuscript, in acceptance order.

    Manuscripts decided at meetings up to and including the configured
    warm-up window are dropped unless ``include_warmup`` is set.
    """
    warmup = trace.config.warmup_periods
    values = [
        entry.decision_time - entry.manuscript.arrival_time
        for entry in trace.accepted
        if include_warmup or entry.meeting_index > warmup
    ]
    return WaitingTimeSample(np.array(values, dtype=float), SampleSource.SIMULATION)


def _linear_edges(values: np.ndarray, width: float) -> np.ndarray:
    if not math.isfinite(width) or width <= 0:
        raise ValueError(f"bin width must be > 0, got {width}")
    n = max(1, math.ceil(values.max() / width - 1e-12))
    return np.linspace(0.0, n * width, n + 1)


def _log_edges(values: np.ndarray, base: float) -> np.ndarray:
    if not math.isfinite(base) or base <= 1.0:
        raise ValueError(f"log base must be > 1, got {base}")
    lo = values.min()
    if lo <= 0:
        raise ValueError("log binning requires strictly positive values")
    hi = values.max()
    n = max(1, math.ceil(math.log(hi / lo) / math.log(base) - 1e-12))
    edges = lo * base ** np.arange(n + 1)
    while edges[-1] < hi:  # guard against float shortfall at the top edge
        n += 1
        edges = lo * base ** np.arange(n + 1)
    return edges


def histogram(
    sample: Union[WaitingTimeSample, Sequence[float], np.ndarray],
    bin_width: Optional[float] = None,
    log_base: Optional[float] = None,
    edges: Optional[Sequence[float]] = None,
) -> Histogram:
    """Bin a sample into a normalized histogram.

    Exactly one binning mode applies: linear ``bin_width`` (default
    ``DEFAULT_BIN_WIDTH``, auto-ranged from 0 to the maximum rounded up to a
    whole bin), geometric ``log_base`` (edges start at the smallest value),
    or explicit ``edges``. With explicit edges every value must lie inside
    the covered range, otherwise normalization would silently break.
    """
    values = _as_values(sample)
    if values.size == 0:
        raise ValueError("cannot build a histogram from an empty sample")
    modes = sum(x is not None for x in (bin_width, log_base, edges))
    if modes > 1:
        raise ValueError("choose one of bin_width, log_base or edges")

    log_bins = False
    if edges is not None:
        edge_arr = np.asarray(edges, dtype=float)
        if edge_arr.ndim != 1 or len(edge_arr) < 2 or np.any(np.diff(edge_arr) <= 0):
            raise ValueError("edges must be at least 2 strictly increasing values")
        if values.min() < edge_arr[0] or values.max() > edge_arr[-1]:
            raise ValueError("sample values fall outside the explicit bin range")
    elif log_base is not None:
        edge_arr = _log_edges(values, log_base)
        log_bins = True
    else:
        edge_arr = _linear_edges(values, bin_width if bin_width is not None else DEFAULT_BIN_WIDTH)

    counts, _ = np.histogram(values, bins=edge_arr)
    total = int(counts.sum())
    densities = counts / (total * np.diff(edge_arr))
    return Histogram(
        bin_edges=edge_arr,
        counts=counts.astype(int),
        densities=densities,
        total_count=total,
        log_bins=log_bins,
    )


def summary(sample: Union[WaitingTimeSample, Sequence[float], np.ndarray]) -> SampleSummary:
    """Count, mean, max and median; the median of an even count averages the
    two central order statistics."""
    values = _as_values(sample)
    if values.size == 0:
        raise ValueError("cannot summarize an empty sample")
    return SampleSummary(
        count=int(values.size),
        mean=float(values.mean()),
        max=float(values.max()),
        median=float(np.median(values)),
    )
