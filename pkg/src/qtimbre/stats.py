"""Histogram accumulation and randomness-quality analysis.

Histograms use half-open bins ``[e_i, e_{i+1})`` with an explicit overflow
counter, so no sample silently vanishes: everything at or above the last
edge lands in ``overflow``, and anything below the first edge is an error.

"How random is this stream" is deliberately reported as two separate
quantities rather than one scalar: lag-k autocorrelation (how strongly a
value predicts a later one) and the longest exact repeat (the longest
stretch the stream ever replays).
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from itertools import permutations
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BelowRange,
    CheckpointOutOfRange,
    EmptyHistogram,
    IoFailure,
    TooManyElements,
    TooShort,
    ZeroVariance,
)


class Histogram:
    """Binned counts over strictly increasing edges, plus overflow.

    Invariant: ``total == sum(counts) + overflow`` after every update.
    Histograms with identical edges are mergeable values, so per-worker
    histograms can be accumulated independently and combined.
    """

    def __init__(self, edges: Sequence[float]):
        edges = [float(e) for e in edges]
        if len(edges) < 2:
            raise ValueError("need at least two edges")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("edges must be strictly increasing")
        self.edges = edges
        self.counts = [0] * (len(edges) - 1)
        self.overflow = 0
        self.total = 0

    @classmethod
    def from_values(cls, values: Iterable[float], edges: Sequence[float]) -> "Histogram":
        hist = cls(edges)
        for v in values:
            hist.add(v)
        return hist

    @property
    def widths(self) -> list[float]:
        return [b - a for a, b in zip(self.edges, self.edges[1:])]

    @property
    def midpoints(self) -> list[float]:
        return [0.5 * (a + b) for a, b in zip(self.edges, self.edges[1:])]

    def add(self, value: float) -> None:
        if value < self.edges[0]:
            raise BelowRange(f"value {value} below first edge {self.edges[0]}")
        idx = bisect_right(self.edges, value) - 1
        if idx >= len(self.counts):
            self.overflow += 1
        else:
            self.counts[idx] += 1
        self.total += 1

    def merge(self, other: "Histogram") -> "Histogram":
        if self.edges != other.edges:
            raise ValueError("cannot merge histograms with different edges")
        merged = Histogram(self.edges)
        merged.counts = [a + b for a, b in zip(self.counts, other.counts)]
        merged.overflow = self.overflow + other.overflow
        merged.total = self.total + other.total
        return merged

    def copy(self) -> "Histogram":
        dup = Histogram(self.edges)
        dup.counts = list(self.counts)
        dup.overflow = self.overflow
        dup.total = self.total
        return dup

    def __eq__(self, other) -> bool:
        if not isinstance(other, Histogram):
            return NotImplemented
        return (
            self.edges == other.edges
            and self.counts == other.counts
            and self.overflow == other.overflow
            and self.total == other.total
        )


def accumulate(hist: Histogram, value: float) -> Histogram:
    """Add one value to the histogram and return it (mutating update)."""
    hist.add(value)
    return hist


@dataclass
class HistogramSeries:
    """Snapshots of one growing histogram at increasing event counts.

    Snapshot ``k`` is exactly the histogram of the first ``checkpoints[k]``
    values of the underlying stream.
    """

    checkpoints: list[int]
    snapshots: list[Histogram]


def snapshot_series(
    intervals: Sequence[float], edges: Sequence[float], checkpoints: Sequence[int]
) -> HistogramSeries:
    """Accumulate ``intervals`` once, snapshotting at each checkpoint."""
    checkpoints = [int(c) for c in checkpoints]
    if checkpoints and checkpoints[0] < 1:
        raise ValueError("checkpoints must be >= 1")
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValueError("checkpoints must be strictly increasing")
    if checkpoints and checkpoints[-1] > len(intervals):
        raise CheckpointOutOfRange(
            f"checkpoint {checkpoints[-1]} exceeds {len(intervals)} available intervals"
        )
    hist = Histogram(edges)
    snapshots = []
    next_cp = 0
    for i, value in enumerate(intervals, start=1):
        if next_cp >= len(checkpoints):
            break
        hist.add(value)
        if checkpoints[next_cp] == i:
            snapshots.append(hist.copy())
            next_cp += 1
    return HistogramSeries(checkpoints, snapshots)


def normalized_density(hist: Histogram) -> list[float]:
    """Per-bin density ``counts_i / (total * width_i)``.

    Integrates (sum of density times width) to ``(total - overflow) /
    total``; the remainder is the mass that fell beyond the last edge.
    """
    if hist.total == 0:
        raise EmptyHistogram("cannot normalize an empty histogram")
    return [c / (hist.total * w) for c, w in zip(hist.counts, hist.widths)]


def l1_density_distance(hist: Histogram, density_fn: Callable[[float], float]) -> float:
    """L1 distance between the empirical density and ``density_fn``.

    Computed as ``sum |density_i - f(midpoint_i)| * width_i`` over the
    in-range bins; overflow mass is excluded on both sides, which keeps the
    comparison apples-to-apples when the reference density has a tail.
    """
    dens = normalized_density(hist)
    return sum(
        abs(d - density_fn(m)) * w
        for d, m, w in zip(dens, hist.midpoints, hist.widths)
    )


@dataclass(frozen=True)
class CorrelationReport:
    """Lag-k Pearson autocorrelation of a stream."""

    lag: int
    coefficient: float
    n: int


def serial_correlation(stream: Sequence[float], lag: int) -> CorrelationReport:
    """Pearson correlation of ``(x_t, x_{t+lag})`` pairs.

    Invariant under positive affine transforms of the stream.  Raises
    :class:`TooShort` when fewer than two pairs exist and
    :class:`ZeroVariance` when either margin is constant.
    """
    if lag < 1:
        raise ValueError("lag must be >= 1")
    x = np.asarray(stream, dtype=np.float64)
    if x.size < lag + 2:
        raise TooShort(f"need at least {lag + 2} values for lag {lag}, got {x.size}")
    a = x[:-lag]
    b = x[lag:]
    a = a - a.mean()
    b = b - b.mean()
    va = float(np.dot(a, a))
    vb = float(np.dot(b, b))
    if va == 0.0 or vb == 0.0:
        raise ZeroVariance("stream margin has zero variance")
    coeff = float(np.dot(a, b) / math.sqrt(va * vb))
    coeff = max(-1.0, min(1.0, coeff))
    return CorrelationReport(lag, coeff, int(a.size))


def longest_repeat(stream: Sequence) -> int:
    """Length of the longest contiguous subsequence occurring at least twice.

    Occurrences may overlap, so ``[a, a, a, a]`` scores 3; a stream of
    all-distinct symbols scores 0.  Binary search over candidate lengths
    with a rolling hash keeps this near-linear in the stream length.
    """
    syms = list(stream)
    n = len(syms)
    if n < 2:
        return 0
    codebook: dict = {}
    codes = [codebook.setdefault(s, len(codebook)) for s in syms]

    mod = (1 << 61) - 1
    base = 1_000_003

    def has_repeat(length: int) -> bool:
        if length > n - 1:
            return False
        shift = pow(base, length - 1, mod)
        h = 0
        for i in range(length):
            h = (h * base + codes[i]) % mod
        seen: dict[int, list[int]] = {h: [0]}
        for start in range(1, n - length + 1):
            h = ((h - codes[start - 1] * shift) * base + codes[start + length - 1]) % mod
            bucket = seen.get(h)
            if bucket is None:
                seen[h] = [start]
                continue
            for other in bucket:
                if codes[other:other + length] == codes[start:start + length]:
                    return True
            bucket.append(start)
        return False

    lo, hi = 0, n - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if has_repeat(mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


def permutation_chi_square(tally: Mapping[tuple[int, ...], int], n: int) -> float:
    """Chi-square of a permutation tally against the uniform distribution.

    ``tally`` maps permutation tuples of ``range(n)`` to observed counts;
    absent permutations count as zero.  Expected count per cell is
    ``total / n!``, so the statistic has ``n! - 1`` degrees of freedom.
    """
    if n > 6:
        raise TooManyElements(f"n={n} would enumerate {math.factorial(n)} cells")
    if n < 1:
        raise ValueError("n must be >= 1")
    reference = set(range(n))
    total = 0
    for key, count in tally.items():
        if len(key) != n or set(key) != reference:
            raise ValueError(f"{key!r} is not a permutation of range({n})")
        if count < 0:
            raise ValueError("counts must be non-negative")
        total += count
    if total <= 0:
        raise ValueError("tally must contain at least one observation")
    expected = total / math.factorial(n)
    return sum(
        (tally.get(perm, 0) - expected) ** 2 / expected
        for perm in permutations(range(n))
    )


def uniform_edges(lo: float, hi: float, bins: int) -> list[float]:
    """Equal-width bin edges over [lo, hi]."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if hi <= lo:
        raise ValueError("hi must exceed lo")
    step = (hi - lo) / bins
    return [lo + k * step for k in range(bins)] + [hi]


def write_histogram_csv(hist: Histogram, path) -> None:
    """Export ``bin_lo,bin_hi,count,density`` rows (density 0 when empty)."""
    if hist.total > 0:
        dens = normalized_density(hist)
    else:
        dens = [0.0] * len(hist.counts)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("bin_lo,bin_hi,count,density\n")
            for lo, hi, c, d in zip(hist.edges, hist.edges[1:], hist.counts, dens):
                fh.write(f"{lo:.11e},{hi:.11e},{c},{d:.11e}\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def write_series(series: HistogramSeries, out_dir, stem: str = "histogram") -> Path:
    """Write one CSV per checkpoint plus a manifest JSON; returns manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for cp, snap in zip(series.checkpoints, series.snapshots):
        name = f"{stem}_{cp:07d}.csv"
        write_histogram_csv(snap, out_dir / name)
        files.append(name)
    manifest = out_dir / f"{stem}_manifest.json"
    payload = {"checkpoints": series.checkpoints, "files": files}
    try:
        manifest.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {manifest}: {exc}") from exc
    return manifest
