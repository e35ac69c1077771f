"""Command-line pipeline.

Subcommands: simulate, histogram, sonify, shuffle, analyze, fetch-qrng,
render, sonogram.  Every run is a pure function of its config and input
files: inputs are never mutated and a repeated run with the same source
spec reproduces its outputs byte for byte.  All randomness in a run flows
through exactly one source instance created at startup, so a run is never
accidentally half pseudo-random and half quantum.

Exit codes: 0 success, 2 configuration error, 3 runtime error, 4 network
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__, figures
from .errors import NetworkFailure, QTimbreError
from .qjump import (
    AtomParams,
    DecayModel,
    EmissionRecord,
    hazard_waiting_density,
    mcwf_waiting_density,
    read_emissions_csv,
    simulate_trajectory,
    write_emissions_csv,
)
from .qrngclient import QrngEndpointConfig, fetch_or_load, fetch_random_bytes
from .randsource import ByteStreamSource, RandomSource, SeededGenerator
from .seqorder import apply_permutation, fisher_yates, load_sequence, save_sequence
from .stats import (
    Histogram,
    longest_repeat,
    serial_correlation,
    snapshot_series,
    uniform_edges,
    write_series,
)
from .synth import SynthSpec, export_sonogram_csv, read_wav, render_additive, stft, write_wav
from .timbre import (
    EventMode,
    build_event_sequence,
    default_palette,
    histogram_to_spectrum,
    load_events,
    load_palette,
    save_events,
    save_palette,
)
from .errors import EmptyHistogram, ZeroVariance

log = logging.getLogger("qtimbre")

DEFAULT_CHECKPOINTS = (100, 1000, 10000, 100000)


class ConfigError(Exception):
    """Bad flags, bad config file, or missing referenced files."""


# --- config plumbing ---

def _load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse config {p}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {p} must be a JSON object")
    return cfg


def _parse_seed(text: str) -> int:
    try:
        return int(text, 0)  # accepts decimal and 0x-hex
    except ValueError as exc:
        raise ConfigError(f"bad seed {text!r}: {exc}") from exc


def _source_spec(args, cfg: dict) -> dict:
    """Resolve the single source spec from flags, falling back to config."""
    specs = []
    if getattr(args, "seed", None) is not None:
        specs.append({"seed": _parse_seed(args.seed)})
    if getattr(args, "qbytes", None) is not None:
        specs.append({"qbytes": args.qbytes})
    if not specs and "source" in cfg:
        raw = cfg["source"]
        if not isinstance(raw, dict) or len(raw) != 1 or not set(raw) & {"seed", "qbytes", "fetch"}:
            raise ConfigError("config source must be one of seed / qbytes / fetch")
        if "seed" in raw:
            specs.append({"seed": _parse_seed(str(raw["seed"]))})
        else:
            specs.append(dict(raw))
    if len(specs) != 1:
        raise ConfigError("exactly one randomness source is required (--seed, --qbytes, or config source)")
    spec = specs[0]
    if "qbytes" in spec and not Path(spec["qbytes"]).exists():
        raise ConfigError(f"quantum byte file not found: {spec['qbytes']}")
    return spec


def _make_source(spec: dict, out_dir: Path | None) -> tuple[RandomSource, dict]:
    """Instantiate the run's single source and its metadata description."""
    if "seed" in spec:
        return SeededGenerator(spec["seed"]), {"kind": "seed", "seed": hex(spec["seed"])}
    if "qbytes" in spec:
        data = Path(spec["qbytes"]).read_bytes()
        meta = {
            "kind": "qbytes",
            "path": str(spec["qbytes"]),
            "sha256": hashlib.sha256(data).hexdigest(),
            "bytes": len(data),
        }
        return ByteStreamSource(data, label=str(spec["qbytes"])), meta
    fetch = spec["fetch"]
    count = int(fetch.get("count", 1024))
    cache = fetch.get("cache")
    if cache is None:
        if out_dir is None:
            raise ConfigError("a fetch source needs a cache path")
        cache = out_dir / "qrng_cache.bin"
    config = QrngEndpointConfig(base_url=fetch.get("url", QrngEndpointConfig.base_url))
    data = fetch_or_load(config, count, cache)
    meta = {
        "kind": "fetch",
        "cache": str(cache),
        "sha256": hashlib.sha256(data).hexdigest(),
        "bytes": len(data),
    }
    return ByteStreamSource(data, label=str(cache)), meta


def _atom_params(args, cfg: dict) -> AtomParams:
    atom = dict(cfg.get("atom", {}))
    omega = args.omega if getattr(args, "omega", None) is not None else atom.get("omega", 2.0 * math.pi)
    gamma = args.gamma if getattr(args, "gamma", None) is not None else atom.get("gamma", 1.0)
    model = getattr(args, "model", None) or atom.get("model", "hazard")
    dt = args.dt if getattr(args, "dt", None) is not None else atom.get("dt", 1e-3)
    try:
        return AtomParams(float(omega), float(gamma), DecayModel(model), float(dt))
    except ValueError as exc:
        raise ConfigError(f"bad atom parameters: {exc}") from exc


def _stop_spec(args, cfg: dict) -> dict:
    stop = dict(cfg.get("stop", {}))
    if getattr(args, "n_events", None) is not None:
        stop = {"n_events": args.n_events}
    if getattr(args, "t_max", None) is not None:
        if "n_events" in stop and getattr(args, "n_events", None) is not None:
            raise ConfigError("give only one of --n-events / --t-max")
        stop = {"t_max": args.t_max}
    if not stop:
        stop = {"n_events": 24}
    if len(stop) != 1 or not set(stop) <= {"n_events", "t_max"}:
        raise ConfigError("stop criterion must be exactly one of n_events / t_max")
    return stop


def _histogram_settings(args, cfg: dict, params: AtomParams) -> tuple[list[float], list[int]]:
    hcfg = dict(cfg.get("histogram", {}))
    bins = getattr(args, "bins", None) or hcfg.get("bins", 100)
    rng = hcfg.get("range")
    if getattr(args, "hist_range", None) is not None:
        rng = args.hist_range
    if rng is None:
        upper = 5.0 / params.gamma if params.gamma > 0 else 5.0 * 2.0 * math.pi / params.rabi_omega
        rng = [0.0, upper]
    checkpoints = hcfg.get("checkpoints", list(DEFAULT_CHECKPOINTS))
    if getattr(args, "checkpoints", None) is not None:
        checkpoints = [int(c) for c in args.checkpoints.split(",")]
    try:
        edges = uniform_edges(float(rng[0]), float(rng[1]), int(bins))
    except (ValueError, IndexError, TypeError) as exc:
        raise ConfigError(f"bad histogram settings: {exc}") from exc
    return edges, checkpoints


def _palette(args, cfg: dict):
    path = getattr(args, "palette", None) or cfg.get("palette")
    if path is None:
        return default_palette()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"palette file not found: {p}")
    return load_palette(p)


def _synth_spec(args, cfg: dict) -> SynthSpec:
    scfg = dict(cfg.get("synth", {}))
    try:
        return SynthSpec(
            sample_rate=int(getattr(args, "sr", None) or scfg.get("sample_rate", 44100)),
            crossfade=float(scfg.get("crossfade", 0.01)),
            master_gain=float(scfg.get("master_gain", 0.8)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad synth settings: {exc}") from exc


def _out_dir(args, cfg: dict) -> Path:
    out = getattr(args, "out", None) or cfg.get("out_dir", "out")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _analytic_density(params: AtomParams):
    if params.gamma <= 0:
        return None
    if params.model is DecayModel.HAZARD_RENEWAL:
        return lambda tau: hazard_waiting_density(tau, params.rabi_omega, params.gamma)
    if params.rabi_omega > params.gamma / 2.0:
        return lambda tau: mcwf_waiting_density(tau, params.rabi_omega, params.gamma)
    return None


def _run_metadata(command: str, source_meta: dict, source: RandomSource, **sections) -> dict:
    meta = {
        "tool": "qtimbre",
        "version": __version__,
        "command": command,
        "source": source_meta,
        "draws": source.draws,
    }
    meta.update(sections)
    return meta


# --- subcommands ---

def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    out_dir = _out_dir(args, cfg)
    params = _atom_params(args, cfg)
    stop = _stop_spec(args, cfg)
    source, source_meta = _make_source(_source_spec(args, cfg), out_dir)

    record = simulate_trajectory(params, source, **stop)
    write_emissions_csv(record, out_dir / "emissions.csv")
    meta = _run_metadata(
        "simulate",
        source_meta,
        source,
        atom={
            "omega": params.rabi_omega,
            "gamma": params.gamma,
            "model": params.model.value,
            "dt": params.dt,
        },
        stop=stop,
        outputs={"emissions": "emissions.csv"},
        n_emissions=len(record),
    )
    _write_json(out_dir / "metadata.json", meta)
    if not args.no_figures:
        figures.plot_population(record, out_dir / "population.png")
    log.info("simulate: %d emissions, %d draws -> %s", len(record), source.draws, out_dir)
    print(f"wrote {out_dir / 'emissions.csv'} ({len(record)} emissions)")
    return 0


def cmd_histogram(args) -> int:
    cfg = _load_config(args.config)
    out_dir = _out_dir(args, cfg)
    emissions = Path(args.emissions)
    if not emissions.exists():
        raise ConfigError(f"emissions file not found: {emissions}")
    _, intervals = read_emissions_csv(emissions)

    params = _atom_params(args, cfg)
    edges, checkpoints = _histogram_settings(args, cfg, params)
    checkpoints = [c for c in checkpoints if c <= len(intervals)]
    if not checkpoints:
        checkpoints = [len(intervals)]
    series = snapshot_series(intervals, edges, checkpoints)
    manifest = write_series(series, out_dir, stem="histogram")
    if not args.no_figures:
        figures.plot_histogram_series(
            series, out_dir / "histogram_series.png", density_fn=_analytic_density(params)
        )
    print(f"wrote {manifest} ({len(checkpoints)} snapshots)")
    return 0


def cmd_sonify(args) -> int:
    cfg = _load_config(args.config)
    out_dir = _out_dir(args, cfg)
    params = _atom_params(args, cfg)
    stop = _stop_spec(args, cfg)
    palette = _palette(args, cfg)
    spec = _synth_spec(args, cfg)
    tcfg = dict(cfg.get("timbre", {}))
    mode = EventMode(getattr(args, "mode", None) or tcfg.get("mode", "cumulative"))
    time_scale = float(tcfg.get("time_scale", 1.0))
    total_hold = float(tcfg.get("total_hold", 2.0))
    max_partials = int(tcfg.get("max_partials", 8))
    stft_cfg = dict(cfg.get("stft", {}))
    window = int(stft_cfg.get("window", 4096))
    hop = int(stft_cfg.get("hop", 1024))

    source, source_meta = _make_source(_source_spec(args, cfg), out_dir)
    record = simulate_trajectory(params, source, **stop)
    write_emissions_csv(record, out_dir / "emissions.csv")

    edges, checkpoints = _histogram_settings(args, cfg, params)
    outputs = {"emissions": "emissions.csv", "wav": "sonification.wav", "events": "events.json"}
    checkpoints = [c for c in checkpoints if c <= len(record.intervals)]
    if not checkpoints and record.intervals:
        checkpoints = [len(record.intervals)]
    series = None
    if checkpoints:
        series = snapshot_series(record.intervals, edges, checkpoints)
        write_series(series, out_dir, stem="histogram")
        outputs["histogram_manifest"] = "histogram_manifest.json"

    final_hist = Histogram.from_values(record.intervals, edges)
    try:
        spectrum = histogram_to_spectrum(final_hist, palette.fundamental_hz, max_partials)
        _write_json(
            out_dir / "spectrum.json",
            {"components": [[f, a] for f, a in spectrum.components]},
        )
        outputs["spectrum"] = "spectrum.json"
    except EmptyHistogram:
        log.warning("no in-range intervals; spectrum.json skipped")

    events = build_event_sequence(record, palette, mode, time_scale, total_hold)
    save_events(events, out_dir / "events.json")
    buffer = render_additive(events, spec)
    write_wav(buffer, out_dir / "sonification.wav")
    grid = stft(buffer, window, hop)
    export_sonogram_csv(grid, out_dir / "sonogram.csv")
    outputs["sonogram"] = "sonogram.csv"

    meta = _run_metadata(
        "sonify",
        source_meta,
        source,
        atom={
            "omega": params.rabi_omega,
            "gamma": params.gamma,
            "model": params.model.value,
            "dt": params.dt,
        },
        stop=stop,
        timbre={
            "mode": mode.value,
            "time_scale": time_scale,
            "total_hold": total_hold,
            "max_partials": max_partials,
            "fundamental_hz": palette.fundamental_hz,
        },
        synth={
            "sample_rate": spec.sample_rate,
            "crossfade": spec.crossfade,
            "master_gain": spec.master_gain,
        },
        stft={"window": window, "hop": hop},
        outputs=outputs,
        n_emissions=len(record),
    )
    _write_json(out_dir / "metadata.json", meta)

    if not args.no_figures:
        figures.plot_population(record, out_dir / "population.png")
        if series is not None:
            figures.plot_histogram_series(
                series, out_dir / "histogram_series.png", density_fn=_analytic_density(params)
            )
        figures.plot_sonogram(grid, out_dir / "sonogram.png", fmax=20.0 * palette.fundamental_hz)
    print(f"wrote {out_dir / 'sonification.wav'} ({buffer.duration:.2f}s, {len(record)} emissions)")
    return 0


def cmd_shuffle(args) -> int:
    events_path = Path(args.events)
    if not events_path.exists():
        raise ConfigError(f"events file not found: {events_path}")
    seq = load_sequence(events_path)
    if len(seq) == 0:
        raise ConfigError(f"events file {events_path} is empty")

    spec = args.source
    if spec.startswith("seed:"):
        source: RandomSource = SeededGenerator(_parse_seed(spec[5:]))
    elif spec.startswith("qbytes:"):
        path = spec[7:]
        if not Path(path).exists():
            raise ConfigError(f"quantum byte file not found: {path}")
        source = ByteStreamSource.from_file(path)
    else:
        raise ConfigError(f"source must be seed:N or qbytes:FILE, got {spec!r}")

    perm = fisher_yates(len(seq), source)
    shuffled = apply_permutation(seq, perm)
    save_sequence(shuffled, args.out)
    meta = {
        "source": source.describe(),
        "draws": source.draws,
        "n_events": len(seq),
        "permutation": list(perm.mapping),
    }
    _write_json(Path(args.out).with_suffix(Path(args.out).suffix + ".meta.json"), meta)
    log.info("shuffle: %d events, %d draws", len(seq), source.draws)
    print(f"wrote {args.out} ({source.draws} draws from {source.describe()})")
    return 0


def cmd_analyze(args) -> int:
    stream_path = Path(args.stream)
    if not stream_path.exists():
        raise ConfigError(f"stream file not found: {stream_path}")
    data = stream_path.read_bytes()
    values = list(data)

    lag_reports: dict[int, dict] = {}
    for lag in range(1, args.lags + 1):
        try:
            rep = serial_correlation(values, lag)
            lag_reports[lag] = {"coefficient": rep.coefficient, "n": rep.n}
        except (ZeroVariance, QTimbreError) as exc:
            lag_reports[lag] = {"error": type(exc).__name__}

    window = min(len(values), args.repeat_limit)
    repeat = longest_repeat(values[:window])
    report = {
        "stream": str(stream_path),
        "n_bytes": len(values),
        "lags": {str(k): v for k, v in lag_reports.items()},
        "longest_repeat": {"length": repeat, "window": window},
    }
    if args.out:
        _write_json(Path(args.out), report)
        if not args.no_figures:
            fig_path = Path(args.out).with_suffix(".png")
            figures.plot_correlations(lag_reports, fig_path)
        print(f"wrote {args.out}")
    else:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        print()
    return 0


def cmd_fetch_qrng(args) -> int:
    try:
        config = QrngEndpointConfig(
            base_url=args.url,
            block_size=args.block_size,
            timeout=args.timeout,
            retries=args.retries,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    data = fetch_random_bytes(config, args.count)
    Path(args.out).write_bytes(data)
    print(f"wrote {args.out} ({len(data)} bytes)")
    return 0


def cmd_render(args) -> int:
    events_path = Path(args.events)
    if not events_path.exists():
        raise ConfigError(f"events file not found: {events_path}")
    events = load_events(events_path)
    try:
        spec = SynthSpec(sample_rate=args.sr, crossfade=args.crossfade, master_gain=args.gain)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    buffer = render_additive(events, spec)
    write_wav(buffer, args.out)
    print(f"wrote {args.out} ({buffer.duration:.2f}s)")
    return 0


def cmd_sonogram(args) -> int:
    in_path = Path(args.infile)
    if not in_path.exists():
        raise ConfigError(f"input WAV not found: {in_path}")
    buffer = read_wav(in_path)
    grid = stft(buffer, args.window, args.hop)
    export_sonogram_csv(grid, args.out)
    if not args.no_figures:
        figures.plot_sonogram(grid, Path(args.out).with_suffix(".png"))
    print(f"wrote {args.out} ({grid.magnitudes.shape[0]} frames x {grid.magnitudes.shape[1]} bins)")
    return 0


def cmd_make_palette(args) -> int:
    save_palette(default_palette(args.fundamental), args.out)
    print(f"wrote {args.out}")
    return 0


# --- parser ---

def _add_common(parser: argparse.ArgumentParser, figures_flag: bool = True) -> None:
    parser.add_argument("--config", help="JSON config file (flags override it)")
    parser.add_argument("--out", help="output directory")
    if figures_flag:
        parser.add_argument("--no-figures", action="store_true", help="skip PNG rendering")


def _add_source(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", help="pseudo-random seed (decimal or 0x-hex)")
    parser.add_argument("--qbytes", help="file of raw quantum bytes to draw from")


def _add_atom(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--omega", type=float, help="Rabi angular frequency (rad/s)")
    parser.add_argument("--gamma", type=float, help="decay rate (1/s)")
    parser.add_argument("--model", choices=[m.value for m in DecayModel], help="emission model")
    parser.add_argument("--dt", type=float, help="quantum-jump step size (s)")
    parser.add_argument("--n-events", dest="n_events", type=int, help="stop after N emissions")
    parser.add_argument("--t-max", dest="t_max", type=float, help="stop at trajectory time (s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtimbre",
        description="Two-level-atom emission statistics rendered as timbre, audio and reports.",
    )
    parser.add_argument("--version", action="version", version=f"qtimbre {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("simulate", help="run one emission trajectory to CSV")
    _add_common(p)
    _add_source(p)
    _add_atom(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("histogram", help="interval histograms with convergence snapshots")
    _add_common(p)
    _add_atom(p)
    p.add_argument("--emissions", required=True, help="emissions CSV from simulate")
    p.add_argument("--bins", type=int, help="number of bins")
    p.add_argument("--hist-range", dest="hist_range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--checkpoints", help="comma-separated snapshot counts")
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("sonify", help="full pipeline: trajectory to WAV and sonogram")
    _add_common(p)
    _add_source(p)
    _add_atom(p)
    p.add_argument("--palette", help="palette JSON file (default: built-in)")
    p.add_argument("--mode", choices=[m.value for m in EventMode], help="timbre event mode")
    p.add_argument("--bins", type=int, help="histogram bins")
    p.add_argument("--hist-range", dest="hist_range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--checkpoints", help="comma-separated snapshot counts")
    p.add_argument("--sr", type=int, help="sample rate")
    p.set_defaults(func=cmd_sonify)

    p = sub.add_parser("shuffle", help="reorder an event list with a chosen source")
    p.add_argument("--events", required=True, help="JSON-lines event file")
    p.add_argument("--source", required=True, help="seed:N or qbytes:FILE")
    p.add_argument("--out", required=True, help="output JSON-lines file")
    p.set_defaults(func=cmd_shuffle)

    p = sub.add_parser("analyze", help="randomness-quality report for a byte stream")
    p.add_argument("--stream", required=True, help="raw byte file to analyze")
    p.add_argument("--lags", type=int, default=8, help="autocorrelation lags to report")
    p.add_argument(
        "--repeat-limit", dest="repeat_limit", type=int, default=65536,
        help="max symbols scanned for the longest repeat",
    )
    p.add_argument("--out", help="report JSON path (default: stdout)")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fetch-qrng", help="fetch quantum bytes to a local file")
    p.add_argument("--count", type=int, default=1024, help="number of bytes")
    p.add_argument("--out", required=True, help="output byte file")
    p.add_argument("--url", default=QrngEndpointConfig.base_url, help="service endpoint")
    p.add_argument("--block-size", dest="block_size", type=int, default=1024)
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--retries", type=int, default=2)
    p.set_defaults(func=cmd_fetch_qrng)

    p = sub.add_parser("render", help="render an events JSON to WAV")
    p.add_argument("--events", required=True, help="events JSON file")
    p.add_argument("--out", required=True, help="output WAV path")
    p.add_argument("--sr", type=int, default=44100)
    p.add_argument("--crossfade", type=float, default=0.01)
    p.add_argument("--gain", type=float, default=0.8)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("sonogram", help="STFT magnitude grid of a WAV file")
    p.add_argument("--in", dest="infile", required=True, help="input WAV")
    p.add_argument("--window", type=int, default=4096)
    p.add_argument("--hop", type=int, default=1024)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=cmd_sonogram)

    p = sub.add_parser("make-palette", help="write the built-in palette to a JSON file")
    p.add_argument("--fundamental", type=float, default=220.0, help="fundamental (Hz)")
    p.add_argument("--out", required=True, help="output palette JSON")
    p.set_defaults(func=cmd_make_palette)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NetworkFailure as exc:
        print(f"network error: {exc}", file=sys.stderr)
        return 4
    except (QTimbreError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
