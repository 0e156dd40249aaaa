"""Command-line entry point: ``pulsetrace {process,evaluate,synth,bench}``.

Exit codes: 0 success, 1 input or validation error, 2 internal error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from contextlib import contextmanager

from .errors import InsufficientDuration, PulseTraceError
from .harness import SynthSpec, evaluate_hr, evaluate_hrv, synth_trace
from .pipeline import Pipeline, PipelineConfig, stage_summary
from .trace_io import (iter_trace, parse_ground_truth, parse_trace, read_results,
                       write_beats, write_results, write_trace)

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2

# flag dest -> PipelineConfig key
CONFIG_FLAGS = {
    "window_seconds": "window_seconds",
    "hop": "hop_samples",
    "hr_window": "hr_window_seconds",
    "hrv_window": "hrv_window_seconds",
    "band_low": "band_low_hz",
    "band_high": "band_high_hz",
    "narrow_bandwidth": "narrow_bandwidth_hz",
}

BENCH_SCENARIO = {"duration_s": 300.0, "hr_bpm": 72.0, "snr_db": 10.0, "fps": 30.0}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


@contextmanager
def _open_in(path, mode="r"):
    if path in (None, "-"):
        yield sys.stdin.buffer if "b" in mode else sys.stdin
    else:
        try:
            f = open(path, mode)
        except OSError as exc:
            raise UsageError(f"cannot open {path}: {exc.strerror}") from None
        with f:
            yield f


@contextmanager
def _open_out(path, mode="w"):
    if path in (None, "-"):
        out = sys.stdout.buffer if "b" in mode else sys.stdout
        yield out
        out.flush()
    else:
        try:
            f = open(path, mode)
        except OSError as exc:
            raise UsageError(f"cannot write {path}: {exc.strerror}") from None
        with f:
            yield f


def build_config(args) -> PipelineConfig:
    """Defaults, then the --config file, then flags given on the command line."""
    d = {}
    if getattr(args, "config", None):
        with _open_in(args.config) as f:
            try:
                d.update(json.load(f))
            except json.JSONDecodeError as exc:
                raise UsageError(f"config is not valid JSON: {exc}") from None
    for flag, key in CONFIG_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            d[key] = v
    if getattr(args, "no_motion_suppression", False):
        d["suppress_motion"] = False
    if getattr(args, "no_beat_refinement", False):
        d["refine_beats"] = False
    try:
        return PipelineConfig.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _scenario(args, default=None) -> SynthSpec:
    if args.scenario:
        with _open_in(args.scenario) as f:
            spec = SynthSpec.from_json(f.read())
    elif default is not None:
        spec = SynthSpec.from_dict(default)
    else:
        raise UsageError("--scenario is required")
    if args.seed is not None:
        spec.seed = args.seed
    return spec


# --- commands -----------------------------------------------------------------

def cmd_process(args) -> int:
    config = build_config(args)
    pipe = Pipeline(config)
    status = EXIT_OK
    with _open_in(args.input, "rb") as f:
        try:
            for frame in iter_trace(f):
                pipe.push(frame)
        except PulseTraceError as exc:
            print(f"error: {exc}", file=sys.stderr)
            if pipe.n_frames == 0:
                return EXIT_INPUT
            status = EXIT_INPUT
    report = pipe.finish()
    report.truncated = status != EXIT_OK
    with _open_out(args.output, "wb") as out:
        out.write(write_results(report, pipe.stream if args.emit_bvp and pipe.stream else None))
    return status


def _truth_kind(text, kind):
    if kind != "auto":
        return kind
    for line in text.splitlines():
        if line.strip():
            return "hr" if "," in line else "beats"
    return "beats"


def cmd_evaluate(args) -> int:
    if not args.truth:
        raise UsageError("--truth is required")
    with _open_in(args.input, "rb") as f:
        try:
            report, _ = read_results(f.read())
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"results file is not valid: {exc}") from None
    with _open_in(args.truth) as f:
        text = f.read()
    truth = parse_ground_truth(text, _truth_kind(text, args.truth_kind))

    window_s = args.hr_window
    if window_s is None and report.hr_series:
        w = report.hr_series[0]
        window_s = (w.t_end_ms - w.t_start_ms) / 1000.0
    origin = report.diagnostics.get("origin_ms")
    if origin is None:
        origin = report.hr_series[0].t_start_ms if report.hr_series else 0.0
    result = evaluate_hr(report.hr_series, truth, window_s, origin)
    if truth.beat_times is not None:
        try:
            hrv = evaluate_hrv(report.beats_ms, truth)
        except InsufficientDuration as exc:
            print(f"warning: HRV not scored: {exc}", file=sys.stderr)
        else:
            for k in ("rmssd_error_ms", "lf_nu_error", "hf_nu_error", "ratio_error"):
                setattr(result, k, getattr(hrv, k))
    with _open_out(args.output) as out:
        out.write(json.dumps(result.to_dict(), indent=1) + "\n")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = _scenario(args)
    frames, truth = synth_trace(spec)
    with _open_out(args.output) as out:
        write_trace(frames, out)
    if args.truth:
        with _open_out(args.truth) as out:
            write_beats(truth.beat_times, out)
    return EXIT_OK


def cmd_bench(args) -> int:
    config = build_config(args)
    if args.input:
        with _open_in(args.input, "rb") as f:
            frames = parse_trace(f)
        source = args.input
    else:
        frames, _ = synth_trace(_scenario(args, BENCH_SCENARIO))
        source = "scenario"
    pipe = Pipeline(config, timing=True)
    t0 = time.perf_counter()
    for frame in frames:
        pipe.push(frame)
    pipe.finish()
    wall = time.perf_counter() - t0
    n = len(frames)
    doc = {
        "source": source,
        "frames": n,
        "wall_s": wall,
        "fps": n / wall if wall > 0 else None,
        "mean_ms_per_frame": 1000.0 * wall / n if n else None,
        "stages": stage_summary(pipe.frame_times),
    }
    with _open_out(args.output) as out:
        out.write(json.dumps(doc, indent=1) + "\n")
    return EXIT_OK


# --- argument parsing -------------------------------------------------------

def _add_config_flags(p):
    p.add_argument("--config", help="JSON file of pipeline settings")
    p.add_argument("--window-seconds", type=float, help="analysis window length (s)")
    p.add_argument("--hop", type=int, help="window hop in samples")
    p.add_argument("--hr-window", type=float, help="HR reporting window (s)")
    p.add_argument("--hrv-window", type=float, help="rolling HRV window (s); default whole recording")
    p.add_argument("--band-low", type=float, help="pulse band lower edge (Hz)")
    p.add_argument("--band-high", type=float, help="pulse band upper edge (Hz)")
    p.add_argument("--narrow-bandwidth", type=float, help="narrow band-pass width (Hz)")
    p.add_argument("--no-motion-suppression", action="store_true",
                   help="skip motion-spectrum subtraction")
    p.add_argument("--no-beat-refinement", action="store_true",
                   help="time beats on the narrow-band signal only")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="pulsetrace",
                                 description="BVP, heart beats, HR and HRV from face colour/pose traces.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("process", help="trace CSV -> results JSON")
    p.add_argument("--input", help="trace CSV (default stdin)")
    p.add_argument("--output", help="results JSON (default stdout)")
    p.add_argument("--emit-bvp", action="store_true", help="include the BVP waveform")
    _add_config_flags(p)
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("evaluate", help="score results JSON against ground truth")
    p.add_argument("--input", help="results JSON (default stdin)")
    p.add_argument("--truth", help="ground truth CSV (beat_ms or t_ms,bpm)")
    p.add_argument("--truth-kind", choices=("auto", "beats", "hr"), default="auto")
    p.add_argument("--hr-window", type=float, help="HR window (s); default from results")
    p.add_argument("--output", help="evaluation JSON (default stdout)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="scenario JSON -> trace CSV and beats CSV")
    p.add_argument("--scenario", help="scenario JSON file")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--output", help="trace CSV (default stdout)")
    p.add_argument("--truth", help="beats CSV")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="per-stage latency of the signal path")
    p.add_argument("--input", help="trace CSV; default a 5 min synthetic scenario")
    p.add_argument("--scenario", help="scenario JSON used when --input is absent")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--output", help="timing JSON (default stdout)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PulseTraceError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BrokenPipeError:
        return EXIT_OK
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
