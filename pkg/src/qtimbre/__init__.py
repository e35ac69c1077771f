"""qtimbre: intrinsically random atomic emission turned into timbre.

Simulates a resonantly driven two-level atom (Rabi cycling with spontaneous
emission), converts the emission statistics into harmonic spectra and
timbral event sequences, renders them as audio, and ships the supporting
pieces: pluggable randomness sources (pseudo, quantum byte files, an online
QRNG client), event reordering, and randomness-quality analysis.
"""

__version__ = "0.1.0"

from .errors import QTimbreError
from .qjump import AtomParams, DecayModel, EmissionRecord, simulate_trajectory
from .randsource import ByteStreamSource, RandomSource, ScriptedSource, SeededGenerator
from .stats import Histogram, snapshot_series
from .synth import PcmBuffer, SynthSpec, render_additive, stft
from .timbre import TimbrePalette, build_event_sequence, default_palette, histogram_to_spectrum

__all__ = [
    "__version__",
    "QTimbreError",
    "AtomParams",
    "DecayModel",
    "EmissionRecord",
    "simulate_trajectory",
    "RandomSource",
    "SeededGenerator",
    "ByteStreamSource",
    "ScriptedSource",
    "Histogram",
    "snapshot_series",
    "SynthSpec",
    "PcmBuffer",
    "render_additive",
    "stft",
    "TimbrePalette",
    "default_palette",
    "histogram_to_spectrum",
    "build_event_sequence",
]
