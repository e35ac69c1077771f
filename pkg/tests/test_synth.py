"""Rendering, WAV I/O and STFT against direct-computation oracles."""

import math

import numpy as np
import pytest

from qtimbre.errors import BufferTooShort, CrossfadeTooLong, EmptyEvents, MalformedWav
from qtimbre.synth import (
    PcmBuffer,
    SonogramGrid,
    SynthSpec,
    export_sonogram_csv,
    read_sonogram_csv,
    read_wav,
    render_additive,
    stft,
    write_wav,
)
from qtimbre.timbre import Spectrum, TimbreEvent

SR = 44100


def _event(start, duration, components):
    return TimbreEvent(start, duration, Spectrum(tuple(components)))


class TestRenderAdditive:
    def test_single_component_is_a_plain_sine(self):
        spec = SynthSpec(crossfade=0.0, master_gain=1.0)
        buf = render_additive([_event(0.0, 0.01, [(440.0, 1.0)])], spec)
        n = np.arange(len(buf.samples))
        expected = np.sin(2.0 * np.pi * 440.0 * n / SR)
        assert buf.samples[0] == 0.0
        assert np.allclose(buf.samples, expected, atol=1e-12)

    def test_empty_event_list(self):
        with pytest.raises(EmptyEvents):
            render_additive([], SynthSpec())

    def test_two_half_amplitude_components_stay_within_unit(self):
        events = [_event(0.0, 0.05, [(440.0, 0.5), (880.0, 0.5)])]
        buf = render_additive(events, SynthSpec(crossfade=0.0, master_gain=1.0))
        assert np.max(np.abs(buf.samples)) <= 1.0

    def test_output_length_is_rounded_duration(self):
        events = [_event(0.0, 0.5, [(440.0, 1.0)]), _event(0.5, 0.25, [(440.0, 1.0)])]
        buf = render_additive(events, SynthSpec(crossfade=0.0))
        assert len(buf.samples) == round(0.75 * SR)

    def test_phase_continuity_for_unchanged_component(self):
        f, a = 440.0, 0.6
        events = [
            _event(0.0, 0.1, [(f, a), (1320.0, 0.2)]),
            _event(0.1, 0.1, [(f, a)]),
        ]
        buf = render_additive(events, SynthSpec(crossfade=0.005, master_gain=1.0))
        # the shared component alone is differentiable everywhere; at the
        # boundary the waveform may only move as fast as its derivative
        boundary = round(0.1 * SR)
        window = buf.samples[boundary - 3:boundary + 3]
        bound = 2.0 * np.pi * 1320.0 / SR * 1.0 + 2.0 * np.pi * f / SR * a + 1e-6
        assert np.max(np.abs(np.diff(window))) <= bound

    def test_crossfade_longer_than_event_rejected(self):
        events = [_event(0.0, 0.005, [(440.0, 1.0)]), _event(0.005, 1.0, [(440.0, 1.0)])]
        with pytest.raises(CrossfadeTooLong):
            render_additive(events, SynthSpec(crossfade=0.01))

    def test_rendering_is_deterministic(self):
        events = [
            _event(0.0, 0.1, [(220.0, 0.5), (660.0, 0.3)]),
            _event(0.1, 0.2, [(220.0, 0.5), (880.0, 0.2)]),
        ]
        a = render_additive(events, SynthSpec())
        b = render_additive(events, SynthSpec())
        assert np.array_equal(a.samples, b.samples)

    def test_pure_tone_energy(self):
        dur = 1.0
        buf = render_additive(
            [_event(0.0, dur, [(440.0, 0.5)])], SynthSpec(crossfade=0.0, master_gain=1.0)
        )
        energy = np.sum(buf.samples ** 2) / SR
        assert energy == pytest.approx(0.5 ** 2 * dur / 2.0, rel=0.01)

    def test_amplitude_ramp_at_boundary(self):
        events = [
            _event(0.0, 0.1, [(440.0, 0.2)]),
            _event(0.1, 0.1, [(440.0, 0.8)]),
        ]
        spec = SynthSpec(crossfade=0.01, master_gain=1.0)
        buf = render_additive(events, spec)
        boundary = round(0.1 * SR)
        ramp = round(0.01 * SR)
        n = np.arange(len(buf.samples))
        carrier = np.sin(2.0 * np.pi * 440.0 * n / SR)
        # after the ramp the amplitude is the new one
        after = slice(boundary + ramp, boundary + 2 * ramp)
        assert np.allclose(buf.samples[after], 0.8 * carrier[after], atol=1e-9)
        # first ramp sample starts at the old amplitude
        assert buf.samples[boundary] == pytest.approx(0.2 * carrier[boundary], abs=1e-9)


class TestWav:
    def test_round_trip_error_bound(self, tmp_path):
        rng = np.random.default_rng(5)
        buf = PcmBuffer(rng.uniform(-1.0, 1.0, 5000), SR)
        path = tmp_path / "x.wav"
        write_wav(buf, path)
        back = read_wav(path)
        assert back.sample_rate == SR
        assert np.max(np.abs(back.samples - buf.samples)) <= 2.0 ** -15

    def test_header_bytes_exact(self, tmp_path):
        buf = PcmBuffer(np.array([0.0, 0.5]), 44100)
        path = tmp_path / "h.wav"
        write_wav(buf, path)
        raw = path.read_bytes()
        expected = (
            b"RIFF"
            + (36 + 4).to_bytes(4, "little")
            + b"WAVE"
            + b"fmt "
            + (16).to_bytes(4, "little")
            + (1).to_bytes(2, "little")      # PCM
            + (1).to_bytes(2, "little")      # mono
            + (44100).to_bytes(4, "little")
            + (88200).to_bytes(4, "little")  # byte rate
            + (2).to_bytes(2, "little")      # block align
            + (16).to_bytes(2, "little")     # bits
            + b"data"
            + (4).to_bytes(4, "little")
        )
        assert raw[:44] == expected
        assert len(raw) == 48

    def test_quantization_rule(self, tmp_path):
        buf = PcmBuffer(np.array([1.0, -1.0, 0.5]), SR)
        path = tmp_path / "q.wav"
        write_wav(buf, path)
        payload = np.frombuffer(path.read_bytes()[44:], dtype="<i2")
        assert list(payload) == [32767, -32767, round(0.5 * 32767)]

    def test_truncated_file_rejected(self, tmp_path):
        buf = PcmBuffer(np.zeros(100), SR)
        path = tmp_path / "t.wav"
        write_wav(buf, path)
        (tmp_path / "bad.wav").write_bytes(path.read_bytes()[:30])
        with pytest.raises(MalformedWav):
            read_wav(tmp_path / "bad.wav")

    def test_non_wav_rejected(self, tmp_path):
        path = tmp_path / "noise.wav"
        path.write_bytes(b"this is not audio at all" * 4)
        with pytest.raises(MalformedWav):
            read_wav(path)

    def test_out_of_range_samples_clamped(self, tmp_path):
        buf = PcmBuffer(np.array([2.0, -3.0]), SR)
        path = tmp_path / "c.wav"
        write_wav(buf, path)
        payload = np.frombuffer(path.read_bytes()[44:], dtype="<i2")
        assert list(payload) == [32767, -32767]


def _brute_dft_magnitudes(frame: np.ndarray) -> np.ndarray:
    """O(n^2) discrete Fourier transform, chunked to keep memory flat."""
    n = len(frame)
    bins = n // 2 + 1
    mags = np.empty(bins)
    idx = np.arange(n)
    for k0 in range(0, bins, 256):
        ks = np.arange(k0, min(k0 + 256, bins))
        basis = np.exp(-2j * np.pi * np.outer(ks, idx) / n)
        mags[ks] = np.abs(basis @ frame)
    return mags


class TestStft:
    def test_zero_buffer_zero_magnitudes(self):
        grid = stft(PcmBuffer(np.zeros(8192), SR), 4096, 1024)
        assert np.all(grid.magnitudes == 0.0)

    def test_bin_frequencies(self):
        grid = stft(PcmBuffer(np.zeros(4096), SR), 4096, 1024)
        assert grid.bin_freqs[0] == 0.0
        assert grid.bin_freqs[93] == pytest.approx(93 * SR / 4096)
        assert len(grid.bin_freqs) == 2049

    def test_kilohertz_sine_peaks_at_bin_93(self):
        n = np.arange(SR)
        buf = PcmBuffer(np.sin(2.0 * np.pi * 1000.0 * n / SR), SR)
        grid = stft(buf, 4096, 1024)
        assert np.all(np.argmax(grid.magnitudes, axis=1) == 93)

    def test_matches_brute_force_dft_on_one_frame(self):
        n = np.arange(4096)
        samples = np.sin(2.0 * np.pi * 1000.0 * n / SR)
        grid = stft(PcmBuffer(samples, SR), 4096, 4096)
        window = 0.5 * (1.0 - np.cos(2.0 * np.pi * n / 4096))
        oracle = _brute_dft_magnitudes(samples * window)
        assert np.allclose(grid.magnitudes[0], oracle, atol=1e-6)
        assert int(np.argmax(oracle)) == 93

    def test_frame_offsets(self):
        grid = stft(PcmBuffer(np.zeros(4096 + 3 * 1024), SR), 4096, 1024)
        assert np.allclose(grid.frame_times, np.arange(4) * 1024 / SR)

    def test_parseval_per_frame(self):
        rng = np.random.default_rng(2)
        samples = rng.uniform(-1.0, 1.0, 3 * 4096)
        buf = PcmBuffer(samples, SR)
        grid = stft(buf, 4096, 2048)
        window = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(4096) / 4096))
        for i, off in enumerate((np.arange(len(grid.frame_times)) * 2048)):
            frame = samples[off:off + 4096] * window
            time_energy = np.sum(frame ** 2)
            m = grid.magnitudes[i]
            freq_energy = (m[0] ** 2 + 2.0 * np.sum(m[1:-1] ** 2) + m[-1] ** 2) / 4096
            assert abs(time_energy - freq_energy) / time_energy < 1e-6

    def test_centered_impulse_is_flat(self):
        samples = np.zeros(64)
        samples[32] = 1.0
        grid = stft(PcmBuffer(samples, SR), 64, 64)
        oracle = _brute_dft_magnitudes(
            samples * 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(64) / 64))
        )
        assert np.allclose(grid.magnitudes[0], oracle, atol=1e-12)
        # the centered impulse picks out the window's center value: flat
        assert np.allclose(grid.magnitudes[0], grid.magnitudes[0][0], atol=1e-12)

    def test_buffer_too_short(self):
        with pytest.raises(BufferTooShort):
            stft(PcmBuffer(np.zeros(100), SR), 4096, 1024)

    def test_window_must_be_power_of_two(self):
        with pytest.raises(ValueError):
            stft(PcmBuffer(np.zeros(8192), SR), 1000, 100)


class TestSonogramCsv:
    def test_one_frame_two_bins(self, tmp_path):
        grid = SonogramGrid(np.array([0.0]), np.array([0.0, 10.0]), np.array([[1.0, 2.0]]))
        path = tmp_path / "s.csv"
        export_sonogram_csv(grid, path)
        assert len(path.read_text().splitlines()) == 2

    def test_empty_grid_header_only(self, tmp_path):
        grid = SonogramGrid(np.array([]), np.array([0.0, 10.0]), np.empty((0, 2)))
        path = tmp_path / "e.csv"
        export_sonogram_csv(grid, path)
        lines = path.read_text().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("time_s,")

    def test_round_trip_six_digits(self, tmp_path):
        rng = np.random.default_rng(9)
        grid = SonogramGrid(
            np.array([0.0, 0.5]),
            np.array([0.0, 100.0, 200.0]),
            rng.uniform(0.0, 10.0, (2, 3)),
        )
        path = tmp_path / "r.csv"
        export_sonogram_csv(grid, path)
        back = read_sonogram_csv(path)
        assert np.allclose(back.magnitudes, grid.magnitudes, rtol=1e-5)
        assert np.allclose(back.bin_freqs, grid.bin_freqs)


class TestSynthSpec:
    def test_rejects_low_sample_rate(self):
        with pytest.raises(ValueError):
            SynthSpec(sample_rate=4000)

    def test_rejects_bad_gain(self):
        with pytest.raises(ValueError):
            SynthSpec(master_gain=0.0)
        with pytest.raises(ValueError):
            SynthSpec(master_gain=1.5)
