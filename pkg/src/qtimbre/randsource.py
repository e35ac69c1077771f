"""Uniform randomness sources.

All stochastic operations in this package draw from a :class:`RandomSource`,
so a simulation can be backed by a deterministic pseudo-random generator, a
file of quantum-generated bytes, or a scripted list of values without the
consumer knowing the difference.  Two sources constructed identically always
produce identical sequences.

Words are mapped to units in [0, 1) by one fixed rule everywhere: take the
top 53 bits of the 64-bit word and divide by 2**53.  The result is always
strictly below 1.0 and exactly representable as a double.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from .errors import SourceExhausted

_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1
_UNIT_SCALE = 1.0 / (1 << 53)


def splitmix_next(state: int) -> tuple[int, int]:
    """Advance a SplitMix64 state by one step.

    Returns ``(new_state, output_word)``.  Pure function; the generator's
    whole sequence is determined by the starting state.  The state simply
    increments by an odd constant, so every 64-bit seed has period 2**64.
    """
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def word_to_unit(word: int) -> float:
    """Map a 64-bit word to a float in [0, 1) via the top-53-bit rule."""
    return (word >> 11) * _UNIT_SCALE


class RandomSource(ABC):
    """Sequential supplier of uniform 64-bit words and [0, 1) units.

    A source instance is single-owner: it may be handed between threads but
    never shared concurrently.  Independent parallel work should construct
    independent sources (distinct seeds, disjoint byte ranges).

    ``draws`` counts every unit/word consumed, so runs can report exactly
    how much randomness they used.
    """

    draws: int = 0

    @abstractmethod
    def next_word(self) -> int:
        """Return the next 64-bit unsigned word."""

    def next_unit(self) -> float:
        """Return the next uniform float in [0, 1); never 1.0."""
        return word_to_unit(self.next_word())

    def units(self, n: int) -> np.ndarray:
        """Return the next ``n`` units as an array.

        Equivalent to ``n`` calls of :meth:`next_unit`; subclasses override
        this with a vectorized path that must produce bit-identical values.
        """
        return np.array([self.next_unit() for _ in range(n)], dtype=np.float64)

    def describe(self) -> str:
        """Short provenance tag recorded alongside simulation output."""
        return type(self).__name__


class SeededGenerator(RandomSource):
    """SplitMix64 pseudo-random source.

    The sequence is a pure function of the seed and agrees bit-for-bit
    across platforms, which is why this algorithm was fixed rather than
    deferring to a platform RNG.
    """

    def __init__(self, seed: int):
        self._seed = int(seed) & _MASK64
        self._state = self._seed
        self.draws = 0

    @property
    def seed(self) -> int:
        return self._seed

    def next_word(self) -> int:
        self._state, word = splitmix_next(self._state)
        self.draws += 1
        return word

    def units(self, n: int) -> np.ndarray:
        # SplitMix64's state is an additive counter, so n outputs can be
        # computed in one shot with wrapping uint64 arithmetic.
        idx = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self._state) + idx * np.uint64(_GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            z = z ^ (z >> np.uint64(31))
        self._state = (self._state + n * _GOLDEN) & _MASK64
        self.draws += n
        return (z >> np.uint64(11)).astype(np.float64) * _UNIT_SCALE

    def describe(self) -> str:
        return f"splitmix64:seed=0x{self._seed:x}"


class ByteStreamSource(RandomSource):
    """Source backed by a finite sequence of raw bytes (e.g. quantum bytes).

    Words are assembled little-endian from 8 consecutive bytes.  Bytes are
    consumed exactly once and never recycled: re-reading would reintroduce
    correlations that the whole point of a quantum byte file is to avoid.
    """

    def __init__(self, data: bytes, label: str = "bytes"):
        self._data = bytes(data)
        self._cursor = 0
        self._label = label
        self.draws = 0

    @classmethod
    def from_file(cls, path) -> "ByteStreamSource":
        with open(path, "rb") as fh:
            data = fh.read()
        return cls(data, label=str(path))

    @property
    def remaining(self) -> int:
        return len(self._data) - self._cursor

    def next_word(self) -> int:
        if self.remaining < 8:
            raise SourceExhausted(
                f"byte stream exhausted: {self.remaining} bytes left, 8 needed"
            )
        word = int.from_bytes(self._data[self._cursor:self._cursor + 8], "little")
        self._cursor += 8
        self.draws += 1
        return word

    def units(self, n: int) -> np.ndarray:
        if self.remaining < 8 * n:
            raise SourceExhausted(
                f"byte stream exhausted: {self.remaining} bytes left, {8 * n} needed"
            )
        words = np.frombuffer(
            self._data, dtype="<u8", count=n, offset=self._cursor
        )
        self._cursor += 8 * n
        self.draws += n
        return (words >> np.uint64(11)).astype(np.float64) * _UNIT_SCALE

    def describe(self) -> str:
        return f"qbytes:{self._label}"


class ScriptedSource(RandomSource):
    """Source that replays a fixed list of units verbatim, then errors.

    Exists to make stochastic code paths hand-traceable in tests.  Since
    the script holds units rather than words, ``next_word`` synthesizes the
    word whose top 53 bits reproduce the scripted unit.
    """

    def __init__(self, units: list[float]):
        for u in units:
            if not 0.0 <= u < 1.0:
                raise ValueError(f"scripted unit {u!r} outside [0, 1)")
        self._units = list(units)
        self._cursor = 0
        self.draws = 0

    def next_unit(self) -> float:
        if self._cursor >= len(self._units):
            raise SourceExhausted("scripted source exhausted")
        u = self._units[self._cursor]
        self._cursor += 1
        self.draws += 1
        return u

    def next_word(self) -> int:
        return int(self.next_unit() * (1 << 53)) << 11

    def describe(self) -> str:
        return f"scripted:{len(self._units)}"
