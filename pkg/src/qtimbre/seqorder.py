"""Reordering of labeled musical events with any randomness source.

This is the baseline experiment: take a fixed sequence of sound events and
reorder it with a pseudo-random source and with a quantum one, so the two
orderings can be compared like for like.  Fisher-Yates is used because it
consumes a bounded, auditable number of draws (n - 1 units) and is provably
uniform over permutations; the draw count is reported so runs with
different sources stay comparable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import DuplicateId, IoFailure, LengthMismatch, MalformedLine
from .randsource import RandomSource


@dataclass(frozen=True)
class MusicalEvent:
    """One event: a unique id, a human label, and an optional payload path."""

    id: str
    label: str
    payload_ref: str | None = None


@dataclass(frozen=True)
class EventSequence:
    """Ordered events with unique ids."""

    events: tuple[MusicalEvent, ...]

    def __post_init__(self):
        ids = [ev.id for ev in self.events]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise DuplicateId(f"duplicate event ids: {dupes}")

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class Permutation:
    """A bijection on [0, n), stored as the index each output position reads from."""

    mapping: tuple[int, ...]

    def __post_init__(self):
        n = len(self.mapping)
        if sorted(self.mapping) != list(range(n)):
            raise ValueError("mapping is not a bijection on [0, n)")

    def __len__(self) -> int:
        return len(self.mapping)


def fisher_yates(n: int, source: RandomSource) -> Permutation:
    """Draw a uniform permutation of n elements.

    For i = n-1 down to 1, positions i and ``j = floor(u * (i + 1))`` are
    swapped, consuming one unit per step (n - 1 total).  Deriving j by
    scaling the unit keeps the procedure replayable from scripted sources;
    there is no modulo bias because the unit is a real, not a raw word.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = math.floor(source.next_unit() * (i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return Permutation(tuple(perm))


def apply_permutation(seq: EventSequence, perm: Permutation) -> EventSequence:
    """Reorder a sequence: output position k holds input event perm[k]."""
    if len(seq) != len(perm):
        raise LengthMismatch(f"sequence has {len(seq)} events, permutation {len(perm)}")
    return EventSequence(tuple(seq.events[i] for i in perm.mapping))


def save_sequence(seq: EventSequence, path) -> None:
    """Write one JSON object per line: {"id", "label", "payload_ref"?}."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for ev in seq.events:
                obj = {"id": ev.id, "label": ev.label}
                if ev.payload_ref is not None:
                    obj["payload_ref"] = ev.payload_ref
                fh.write(json.dumps(obj, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_sequence(path) -> EventSequence:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    events = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            events.append(
                MusicalEvent(str(obj["id"]), str(obj["label"]), obj.get("payload_ref"))
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise MalformedLine(f"{path}:{lineno}: {exc}") from exc
    return EventSequence(tuple(events))


_GESTURES = [
    "plucked string", "muted strike", "bowed swell", "harmonic chime",
    "prepared rattle", "inside-piano sweep", "col legno tap", "cluster burst",
    "pedal wash", "fingernail glide",
]


def synthetic_sequence(n: int = 20) -> EventSequence:
    """A synthetic stand-in for a recorded improvisation's first n events.

    The original source material is not redistributable, so tests and demos
    use this deterministic list of plausible gesture labels instead.
    """
    events = tuple(
        MusicalEvent(
            id=f"ev{k:02d}",
            label=f"{_GESTURES[k % len(_GESTURES)]} #{k // len(_GESTURES) + 1}",
        )
        for k in range(n)
    )
    return EventSequence(events)
