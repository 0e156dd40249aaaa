"""Synthetic ground-truthed traces and scoring against ground truth.

The generator places beats first (heart-rate profile, slow RR modulation,
Gaussian jitter). It then renders a pulse whose crest sits exactly on each
beat, and samples colour and head-orientation traces at the requested frame
timing.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .beats import extract_ibis
from .errors import InsufficientBeats, InsufficientDuration, InvalidSpec, NoOverlap
from .trace_io import FrameSample, GroundTruth
from .vitals import heart_rate, hrv_metrics

WAVEFORMS = ("sine", "sine+harmonic")


@dataclass
class SynthSpec:
    duration_s: float = 60.0
    hr_bpm: float = 72.0
    # linear change from hr_bpm to hr_end_bpm over the whole duration
    hr_end_bpm: float | None = None
    # piecewise-linear profile [[t_s, bpm], ...]; overrides the two above
    hr_points: list | None = None
    rr_jitter_ms: float = 0.0
    rr_modulation_hz: float | None = None
    rr_modulation_depth_ms: float = 0.0
    waveform: str = "sine"
    pulse_amplitude: float = 0.01
    gains: tuple = (0.0, 1.0, 0.0)
    channel_means: tuple = (110.0, 95.0, 80.0)
    motion_hz: float | None = None
    motion_color_amplitude: float = 0.0
    motion_orientation_deg: float = 0.0
    # colour signature of the motion artefact; defaults to the pulse gains
    motion_gains: tuple | None = None
    snr_db: float | None = None
    fps: float = 30.0
    fps_jitter_ms: float = 0.0
    # [[t_start_s, fps], ...]; overrides fps for t >= t_start_s
    fps_segments: list | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.duration_s > 0:
            raise InvalidSpec("duration_s must be positive")
        rates = [self.fps] + [r for _, r in (self.fps_segments or [])]
        if not all(r > 0 for r in rates):
            raise InvalidSpec("frame rates must be positive")
        if self.waveform not in WAVEFORMS:
            raise InvalidSpec(f"waveform must be one of {WAVEFORMS}")
        bpms = [self.hr_bpm, self.hr_end_bpm or self.hr_bpm] + [b for _, b in (self.hr_points or [])]
        if not all(b > 0 for b in bpms):
            raise InvalidSpec("heart rates must be positive")
        if self.rr_jitter_ms < 0 or self.fps_jitter_ms < 0:
            raise InvalidSpec("jitter must be non-negative")
        if self.rr_modulation_depth_ms >= 60000.0 / max(bpms):
            raise InvalidSpec("RR modulation depth must be below the baseline IBI")
        if len(self.gains) != 3 or len(self.channel_means) != 3:
            raise InvalidSpec("gains and channel_means need three entries")
        if min(self.channel_means) <= 0:
            raise InvalidSpec("channel means must be positive")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidSpec(f"unknown scenario keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("gains", "channel_means", "motion_gains"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from None

    @classmethod
    def from_json(cls, text):
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise InvalidSpec(f"scenario is not valid JSON: {exc}") from None

    def to_dict(self):
        return asdict(self)

    def hr_at(self, t_ms):
        if self.hr_points:
            pts = np.asarray(self.hr_points, dtype=float)
            return np.interp(np.asarray(t_ms) / 1000.0, pts[:, 0], pts[:, 1])
        if self.hr_end_bpm is not None:
            frac = np.clip(np.asarray(t_ms) / (self.duration_s * 1000.0), 0.0, 1.0)
            return self.hr_bpm + frac * (self.hr_end_bpm - self.hr_bpm)
        return np.full(np.shape(t_ms), float(self.hr_bpm))


def _beats(spec: SynthSpec, rng) -> np.ndarray:
    end = spec.duration_s * 1000.0 + 3000.0
    t = -3000.0 - rng.uniform(0.0, 60000.0 / float(spec.hr_at(0.0)))
    out = [t]
    while t < end:
        ibi = 60000.0 / float(spec.hr_at(max(t, 0.0)))
        if spec.rr_modulation_hz:
            ibi += spec.rr_modulation_depth_ms * math.sin(2 * math.pi * spec.rr_modulation_hz * t / 1000.0)
        if spec.rr_jitter_ms:
            ibi += rng.normal(0.0, spec.rr_jitter_ms)
        t += max(ibi, 200.0)
        out.append(t)
    return np.asarray(out)


def _frame_times(spec: SynthSpec, rng) -> np.ndarray:
    end = spec.duration_s * 1000.0
    if spec.fps_segments:
        segs = sorted((float(a) * 1000.0, float(r)) for a, r in spec.fps_segments)
        times, t = [], 0.0
        while t < end:
            times.append(t)
            rate = spec.fps
            for start, r in segs:
                if t >= start:
                    rate = r
            t += 1000.0 / rate
        times = np.asarray(times)
    else:
        times = np.arange(0.0, end, 1000.0 / spec.fps)
    if spec.fps_jitter_ms:
        gaps = np.diff(times)
        limit = 0.45 * (gaps.min() if gaps.size else 1000.0 / spec.fps)
        times = times + np.clip(rng.normal(0.0, spec.fps_jitter_ms, times.size), -limit, limit)
        times[0] = max(times[0], 0.0)
    return times


def pulse_waveform(times, beats, shape="sine") -> np.ndarray:
    """Periodic pulse with a crest on every beat; phase advances linearly between beats."""
    k = np.searchsorted(beats, times, side="right") - 1
    phase = (times - beats[k]) / (beats[k + 1] - beats[k])
    w = np.cos(2 * np.pi * phase)
    if shape == "sine+harmonic":
        w = w + 0.3 * np.cos(4 * np.pi * phase)
    return w


def synth_arrays(spec: SynthSpec):
    """(times, channels[6, n], truth beats) for a scenario, deterministic in ``seed``."""
    rng = np.random.default_rng(spec.seed)
    beats = _beats(spec, rng)
    times = _frame_times(spec, rng)
    pulse = spec.pulse_amplitude * pulse_waveform(times, beats, spec.waveform)

    rel = np.outer(np.asarray(spec.gains, dtype=float), pulse)
    orient = np.zeros((3, times.size))
    if spec.motion_hz:
        tone = np.sin(2 * np.pi * spec.motion_hz * times / 1000.0)
        mg = np.asarray(spec.motion_gains if spec.motion_gains is not None else spec.gains, dtype=float)
        rel += np.outer(mg, spec.motion_color_amplitude * tone)
        for axis, phase in enumerate((0.0, 0.7, 1.9)):
            orient[axis] = spec.motion_orientation_deg * np.sin(
                2 * np.pi * spec.motion_hz * times / 1000.0 + phase)
    if spec.snr_db is not None:
        shape_rms = math.sqrt(0.5 + (0.045 if spec.waveform == "sine+harmonic" else 0.0))
        noise_sd = spec.pulse_amplitude * shape_rms / 10 ** (spec.snr_db / 20.0)
        rel += rng.normal(0.0, noise_sd, rel.shape)
    colour = np.asarray(spec.channel_means, dtype=float)[:, None] * (1.0 + rel)
    truth = beats[(beats >= 0.0) & (beats < spec.duration_s * 1000.0)]
    return times, np.vstack([colour, orient]), truth


def synth_trace(spec: SynthSpec):
    times, ch, truth = synth_arrays(spec)
    frames = [FrameSample(float(t), *map(float, ch[:, i])) for i, t in enumerate(times)]
    return frames, GroundTruth("beats", beat_times=[float(b) for b in truth])


# --- scoring ------------------------------------------------------------------

@dataclass
class EvalResult:
    mae_bpm: float | None = None
    per_window: list = field(default_factory=list)
    coverage: float | None = None
    rmssd_error_ms: float | None = None
    lf_nu_error: float | None = None
    hf_nu_error: float | None = None
    ratio_error: float | None = None

    def to_dict(self):
        return asdict(self)


def truth_hr(truth: GroundTruth, t_start, t_end):
    """Reference HR for one window, or None when the truth cannot support it."""
    if truth.beat_times is not None:
        seq = extract_ibis(truth.beat_times)
        ibis = np.asarray(seq.ibis)
        ends = np.asarray(seq.ibi_times)
        sel = (ends - ibis >= t_start) & (ends < t_end)
        try:
            return heart_rate(ibis[sel])
        except InsufficientBeats:
            return None
    pts = [bpm for t, bpm in truth.hr_series if t_start <= t < t_end]
    return float(np.mean(pts)) if pts else None


def _truth_span(truth: GroundTruth):
    if truth.beat_times is not None:
        return (truth.beat_times[0], truth.beat_times[-1]) if truth.beat_times else (0.0, 0.0)
    return (truth.hr_series[0][0], truth.hr_series[-1][0]) if truth.hr_series else (0.0, 0.0)


def evaluate_hr(hr_series, truth: GroundTruth, window_s=None, origin_ms=0.0) -> EvalResult:
    """Mean absolute HR error over windows where prediction and truth both exist."""
    rows = []
    for w in hr_series:
        ref = truth_hr(truth, w.t_start_ms, w.t_end_ms)
        if ref is None:
            continue
        rows.append({"t_start_ms": w.t_start_ms, "t_end_ms": w.t_end_ms,
                     "predicted_bpm": w.bpm, "truth_bpm": ref, "error_bpm": w.bpm - ref})
    if not rows:
        raise NoOverlap("no window has both a prediction and a reference heart rate")
    mae = float(np.mean([abs(r["error_bpm"]) for r in rows]))
    coverage = None
    if window_s:
        lo, hi = _truth_span(truth)
        w = window_s * 1000.0
        k0 = max(0, math.floor((lo - origin_ms) / w))
        total = sum(1 for k in range(k0, int((hi - origin_ms) // w) + 1)
                    if origin_ms + (k + 1) * w <= hi + 1e-6
                    and truth_hr(truth, origin_ms + k * w, origin_ms + (k + 1) * w) is not None)
        coverage = len(rows) / total if total else None
    return EvalResult(mae_bpm=mae, per_window=rows, coverage=coverage)


def _beat_metrics(beats):
    seq = extract_ibis(beats)
    if len(seq.beat_times) < 2 or seq.beat_times[-1] - seq.beat_times[0] < 30_000.0:
        raise InsufficientDuration("HRV scoring needs at least 30 s of beats")
    return hrv_metrics(seq)


def evaluate_hrv(predicted_beats, truth: GroundTruth) -> EvalResult:
    """Absolute HRV errors; both sides run through the same metric code."""
    if truth.beat_times is None:
        raise InsufficientDuration("HRV scoring needs ground-truth beats")
    pred = _beat_metrics(predicted_beats)
    ref = _beat_metrics(truth.beat_times)

    def err(a, b):
        return None if a is None or b is None else abs(a - b)

    return EvalResult(
        rmssd_error_ms=err(pred[0], ref[0]),
        lf_nu_error=err(pred[1], ref[1]),
        hf_nu_error=err(pred[2], ref[2]),
        ratio_error=err(pred[3], ref[3]),
    )
