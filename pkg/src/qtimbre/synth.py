"""Additive synthesis, WAV I/O and sonogram export.

The renderer is a phase-continuous oscillator bank: every component's
phase is a function of absolute time, so a partial that survives a segment
boundary never clicks, and amplitude changes are ramped linearly over a
short crossfade window instead of switching instantaneously.  Rendering is
deterministic: identical events and spec produce bit-identical buffers.

WAV files are written as plain RIFF, 16-bit signed little-endian PCM,
mono.  The sonogram is a Hann-windowed short-time Fourier magnitude grid
exported as CSV; image rendering lives in :mod:`qtimbre.figures`.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BufferTooShort,
    CrossfadeTooLong,
    EmptyEvents,
    IoFailure,
    MalformedWav,
)
from .timbre import TimbreEvent

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthSpec:
    """Rendering parameters (all defaults are artistic, not data-derived)."""

    sample_rate: int = 44100
    channels: int = 1
    crossfade: float = 0.01
    master_gain: float = 0.8

    def __post_init__(self):
        if self.sample_rate < 8000:
            raise ValueError("sample_rate must be >= 8000")
        if self.channels != 1:
            raise ValueError("only mono output is supported")
        if self.crossfade < 0:
            raise ValueError("crossfade must be non-negative")
        if not 0 < self.master_gain <= 1:
            raise ValueError("master_gain must be in (0, 1]")


@dataclass
class PcmBuffer:
    """Rendered audio samples in [-1, 1] at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class SonogramGrid:
    """STFT magnitudes: one row per frame, one column per frequency bin.

    ``bin_freqs[k] == k * sample_rate / window_size`` up to the Nyquist
    bin; ``frame_times`` are the window start offsets in seconds.
    """

    frame_times: np.ndarray
    bin_freqs: np.ndarray
    magnitudes: np.ndarray


def _validate_contiguous(events: list[TimbreEvent]) -> None:
    if abs(events[0].start) > 1e-9:
        raise ValueError("event sequence must start at time 0")
    for prev, cur in zip(events, events[1:]):
        expected = prev.start + prev.duration
        if abs(cur.start - expected) > 1e-9 * max(1.0, expected):
            raise ValueError(
                f"events must be contiguous: segment at {cur.start} does not "
                f"follow the previous one ending at {expected}"
            )


def render_additive(events: list[TimbreEvent], spec: SynthSpec = SynthSpec()) -> PcmBuffer:
    """Render a contiguous event sequence to audio.

    Each output sample is ``master_gain`` times the sum of the active
    components ``a_i * sin(2*pi*f_i*t)`` with t the absolute sample time.
    When a component's amplitude differs from the previous segment's it is
    ramped linearly over the crossfade window at the segment start; a
    component absent on one side ramps from or to zero.  The first segment
    starts at its full amplitudes (there is no boundary to smooth).
    """
    if not events:
        raise EmptyEvents("nothing to render")
    _validate_contiguous(events)
    shortest = min(ev.duration for ev in events)
    if spec.crossfade > 0 and spec.crossfade >= shortest:
        raise CrossfadeTooLong(
            f"crossfade {spec.crossfade}s must be shorter than the shortest "
            f"event ({shortest:.6g}s)"
        )

    sr = spec.sample_rate
    total = events[-1].start + events[-1].duration
    n_total = round(total * sr)
    out = np.zeros(n_total, dtype=np.float64)
    bounds = [round(ev.start * sr) for ev in events] + [n_total]
    ramp_samples = round(spec.crossfade * sr)

    prev_amps: dict[float, float] = {}
    for k, ev in enumerate(events):
        n0, n1 = bounds[k], bounds[k + 1]
        m = n1 - n0
        cur_amps = {f: a for f, a in ev.spectrum.components}
        if m > 0:
            t = np.arange(n0, n1, dtype=np.float64) / sr
            ramp = min(ramp_samples, m) if k > 0 else 0
            for f in sorted(set(prev_amps) | set(cur_amps)):
                a0 = prev_amps.get(f, 0.0) if k > 0 else cur_amps.get(f, 0.0)
                a1 = cur_amps.get(f, 0.0)
                if a0 != a1 and ramp > 0:
                    env = np.concatenate([
                        a0 + (a1 - a0) * np.arange(ramp) / ramp,
                        np.full(m - ramp, a1),
                    ])
                    out[n0:n1] += env * np.sin(2.0 * np.pi * f * t)
                elif a1 != 0.0:
                    out[n0:n1] += a1 * np.sin(2.0 * np.pi * f * t)
        prev_amps = cur_amps

    out *= spec.master_gain
    np.clip(out, -1.0, 1.0, out=out)
    return PcmBuffer(out, sr)


def write_wav(buffer: PcmBuffer, path) -> None:
    """Write 16-bit mono PCM; samples are clamped to [-1, 1] and counted.

    Quantization is ``round(x * 32767)``, so a read-back differs from the
    original by at most half a quantization step.
    """
    samples = np.asarray(buffer.samples, dtype=np.float64)
    clipped = int(np.count_nonzero((samples < -1.0) | (samples > 1.0)))
    if clipped:
        log.warning("%d samples outside [-1, 1] were clamped", clipped)
    q = np.round(np.clip(samples, -1.0, 1.0) * 32767.0).astype("<i2")
    data = q.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(data),
        b"WAVE",
        b"fmt ",
        16,
        1,                      # PCM
        1,                      # mono
        buffer.sample_rate,
        buffer.sample_rate * 2, # byte rate
        2,                      # block align
        16,                     # bits per sample
        b"data",
        len(data),
    )
    try:
        Path(path).write_bytes(header + data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_wav(path) -> PcmBuffer:
    """Read a 16-bit mono PCM WAV file written by :func:`write_wav`."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise MalformedWav(f"{path}: missing RIFF/WAVE header")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos:pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise MalformedWav(f"{path}: truncated {chunk_id!r} chunk")
        if chunk_id == b"fmt ":
            fmt = body
        elif chunk_id == b"data":
            data = body
        pos += 8 + size + (size & 1)
    if fmt is None or data is None:
        raise MalformedWav(f"{path}: missing fmt or data chunk")
    if len(fmt) < 16:
        raise MalformedWav(f"{path}: fmt chunk too short")
    audio_format, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if audio_format != 1 or bits != 16 or channels != 1:
        raise MalformedWav(
            f"{path}: only mono 16-bit PCM is supported "
            f"(format={audio_format}, channels={channels}, bits={bits})"
        )
    if len(data) % 2:
        raise MalformedWav(f"{path}: odd data chunk length")
    samples = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32767.0
    return PcmBuffer(samples, rate)


def stft(buffer: PcmBuffer, window_size: int, hop: int) -> SonogramGrid:
    """Hann-windowed STFT magnitude grid.

    Frames start at offsets 0, hop, 2*hop, ... while a full window fits.
    Only the non-negative-frequency half is kept; Parseval-style energy
    checks must double-weight the interior bins accordingly.
    """
    if window_size < 2 or window_size & (window_size - 1):
        raise ValueError("window_size must be a power of two")
    if not 1 <= hop <= window_size:
        raise ValueError("hop must be in [1, window_size]")
    samples = np.asarray(buffer.samples, dtype=np.float64)
    if len(samples) < window_size:
        raise BufferTooShort(
            f"buffer has {len(samples)} samples, window needs {window_size}"
        )
    window = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(window_size) / window_size))
    offsets = np.arange(0, len(samples) - window_size + 1, hop)
    mags = np.empty((len(offsets), window_size // 2 + 1), dtype=np.float64)
    for i, off in enumerate(offsets):
        mags[i] = np.abs(np.fft.rfft(samples[off:off + window_size] * window))
    return SonogramGrid(
        frame_times=offsets / buffer.sample_rate,
        bin_freqs=np.arange(window_size // 2 + 1) * buffer.sample_rate / window_size,
        magnitudes=mags,
    )


def export_sonogram_csv(grid: SonogramGrid, path) -> None:
    """Write the grid as CSV: header of bin frequencies, one row per frame."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("time_s," + ",".join(f"{f:.6g}" for f in grid.bin_freqs) + "\n")
            for t, row in zip(grid.frame_times, grid.magnitudes):
                fh.write(f"{t:.6g}," + ",".join(f"{m:.6g}" for m in row) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_sonogram_csv(path) -> SonogramGrid:
    """Read a grid back from :func:`export_sonogram_csv` output."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not lines or not lines[0].startswith("time_s,"):
        raise IoFailure(f"{path} is not a sonogram CSV")
    bin_freqs = np.array([float(v) for v in lines[0].split(",")[1:]])
    times = []
    rows = []
    for line in lines[1:]:
        if not line.strip():
            continue
        cells = line.split(",")
        times.append(float(cells[0]))
        rows.append([float(v) for v in cells[1:]])
    mags = np.array(rows) if rows else np.empty((0, len(bin_freqs)))
    return SonogramGrid(np.array(times), bin_freqs, mags)
