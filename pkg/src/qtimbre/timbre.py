"""Mapping emission statistics onto the frequency axis.

Interval histograms become harmonic spectra (bin index -> harmonic number,
bin height -> intensity), measurement outcomes select one partial group or
another, and the emission times themselves become the boundaries of a
gapless sequence of timbre events: a sound whose color changes at the
random emission instants.

A partial group lists its spectrum as (ratio, amplitude) pairs relative to
the palette fundamental.  A group that contains ratio 1.0 carries its own
fundamental; otherwise an implicit (1.0, 1.0) fundamental is prepended when
the group is rendered.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import EmptyHistogram, IoFailure, MalformedLine, PaletteTooSmall
from .qjump import EmissionRecord, StateOutcome
from .stats import Histogram


@dataclass(frozen=True)
class PartialGroup:
    """One group of partials: (ratio, amplitude) pairs, ratios unique."""

    partials: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.partials:
            raise ValueError("a partial group cannot be empty")
        ratios = [r for r, _ in self.partials]
        if any(r <= 0 for r in ratios):
            raise ValueError("partial ratios must be positive")
        if any(a < 0 for _, a in self.partials):
            raise ValueError("partial amplitudes must be non-negative")
        if len(set(ratios)) != len(ratios):
            raise ValueError("duplicate partial ratio within a group")


@dataclass(frozen=True)
class TimbrePalette:
    """A fundamental frequency plus ordered partial groups."""

    fundamental_hz: float
    groups: tuple[PartialGroup, ...]

    def __post_init__(self):
        if self.fundamental_hz <= 0:
            raise ValueError("fundamental_hz must be positive")
        if not self.groups:
            raise ValueError("palette needs at least one group")


@dataclass(frozen=True)
class Spectrum:
    """Frequency components with strictly increasing frequencies.

    Amplitudes sum to at most 1 so downstream synthesis has headroom.
    """

    components: tuple[tuple[float, float], ...]

    def __post_init__(self):
        freqs = [f for f, _ in self.components]
        if any(f <= 0 for f in freqs):
            raise ValueError("component frequencies must be positive")
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError("component frequencies must be strictly increasing")
        if any(a < 0 for _, a in self.components):
            raise ValueError("component amplitudes must be non-negative")
        if sum(a for _, a in self.components) > 1.0 + 1e-9:
            raise ValueError("component amplitudes must sum to at most 1")


@dataclass(frozen=True)
class TimbreEvent:
    """One spectral segment: hold ``spectrum`` from ``start`` for ``duration``."""

    start: float
    duration: float
    spectrum: Spectrum

    def __post_init__(self):
        if self.start < 0:
            raise ValueError("start must be non-negative")
        if self.duration <= 0:
            raise ValueError("duration must be positive")


class EventMode(Enum):
    CUMULATIVE_HARMONIC = "cumulative"
    GROUP_SWITCH = "switch"


def default_palette(fundamental_hz: float = 220.0) -> TimbrePalette:
    """Ship-with defaults chosen for audible contrast, not derived from data.

    Group 0 is the odd harmonic series (ratios 1, 3, 5, 7 at 1/n), group 1
    the full series 1..8 at 1/n.
    """
    group0 = PartialGroup(tuple((float(r), 1.0 / r) for r in (1, 3, 5, 7)))
    group1 = PartialGroup(tuple((float(n), 1.0 / n) for n in range(1, 9)))
    return TimbrePalette(fundamental_hz, (group0, group1))


def _effective_partials(group: PartialGroup) -> list[tuple[float, float]]:
    if any(r == 1.0 for r, _ in group.partials):
        return list(group.partials)
    return [(1.0, 1.0)] + list(group.partials)


def _spectrum(fundamental_hz: float, partials) -> Spectrum:
    comps = sorted((fundamental_hz * r, a) for r, a in partials)
    scale = sum(a for _, a in comps)
    if scale > 1.0:
        comps = [(f, a / scale) for f, a in comps]
    return Spectrum(tuple(comps))


def histogram_to_spectrum(hist: Histogram, fundamental_hz: float, max_partials: int) -> Spectrum:
    """Turn the first ``max_partials`` histogram bins into harmonics.

    Bin ``k`` maps to frequency ``(k+1) * fundamental_hz``; amplitudes are
    the bin counts normalized to sum exactly 1 over the considered bins,
    so the spectrum is invariant to rescaling all counts.  Bins with zero
    count are omitted.
    """
    if max_partials < 1:
        raise ValueError("max_partials must be >= 1")
    if fundamental_hz <= 0:
        raise ValueError("fundamental_hz must be positive")
    considered = hist.counts[:max_partials]
    mass = sum(considered)
    if hist.total == 0 or mass == 0:
        raise EmptyHistogram("no in-range counts to turn into a spectrum")
    comps = tuple(
        ((k + 1) * fundamental_hz, c / mass)
        for k, c in enumerate(considered)
        if c > 0
    )
    return Spectrum(comps)


def select_group(outcome: StateOutcome, palette: TimbrePalette) -> PartialGroup:
    """Measurement outcome picks the partial group: ground -> 0, excited -> 1."""
    if len(palette.groups) < 2:
        raise PaletteTooSmall("need at least two groups to select between")
    return palette.groups[0 if outcome is StateOutcome.GROUND else 1]


def build_event_sequence(
    record: EmissionRecord,
    palette: TimbrePalette,
    mode: EventMode = EventMode.CUMULATIVE_HARMONIC,
    time_scale: float = 1.0,
    total_hold: float = 2.0,
) -> list[TimbreEvent]:
    """Turn an emission record into a gapless sequence of timbre events.

    Segment boundaries sit at the scaled emission times (segment ``k``
    lasts ``intervals[k] * time_scale``); the segment after the last
    emission lasts ``total_hold``.  ``time_scale`` exists because atomic
    timescales may be nothing like musical ones.

    CUMULATIVE_HARMONIC starts from the bare fundamental and adds the next
    partial of group 0 at every emission, saturating once the group is
    spent.  GROUP_SWITCH instead toggles between the full spectra of
    groups 0 and 1 at every emission.
    """
    if time_scale <= 0:
        raise ValueError("time_scale must be positive")
    if total_hold <= 0:
        raise ValueError("total_hold must be positive")
    if mode is EventMode.GROUP_SWITCH and len(palette.groups) < 2:
        raise PaletteTooSmall("GROUP_SWITCH needs two groups")

    durations = [iv * time_scale for iv in record.intervals] + [total_hold]
    if mode is EventMode.CUMULATIVE_HARMONIC:
        base = _effective_partials(palette.groups[0])
        spectra = [
            _spectrum(palette.fundamental_hz, base[: min(k + 1, len(base))])
            for k in range(len(durations))
        ]
    else:
        full = [
            _spectrum(palette.fundamental_hz, _effective_partials(g))
            for g in palette.groups[:2]
        ]
        spectra = [full[k % 2] for k in range(len(durations))]

    events = []
    start = 0.0
    for dur, spec in zip(durations, spectra):
        events.append(TimbreEvent(start, dur, spec))
        start += dur
    return events


# --- file formats ---

def save_palette(palette: TimbrePalette, path) -> None:
    """Write a palette as JSON: fundamental_hz plus groups of [ratio, amp]."""
    payload = {
        "fundamental_hz": palette.fundamental_hz,
        "groups": [[[r, a] for r, a in g.partials] for g in palette.groups],
    }
    try:
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_palette(path) -> TimbrePalette:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedLine(f"{path} is not valid JSON: {exc}") from exc
    try:
        groups = tuple(
            PartialGroup(tuple((float(r), float(a)) for r, a in g))
            for g in payload["groups"]
        )
        return TimbrePalette(float(payload["fundamental_hz"]), groups)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedLine(f"{path} is not a palette file: {exc}") from exc


def save_events(events: list[TimbreEvent], path) -> None:
    """Write an event sequence as a JSON list of {start, duration, components}."""
    payload = [
        {
            "start": ev.start,
            "duration": ev.duration,
            "components": [[f, a] for f, a in ev.spectrum.components],
        }
        for ev in events
    ]
    try:
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_events(path) -> list[TimbreEvent]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedLine(f"{path} is not valid JSON: {exc}") from exc
    try:
        return [
            TimbreEvent(
                float(ev["start"]),
                float(ev["duration"]),
                Spectrum(tuple((float(f), float(a)) for f, a in ev["components"])),
            )
            for ev in payload
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedLine(f"{path} is not an events file: {exc}") from exc
