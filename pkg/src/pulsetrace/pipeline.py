"""Frame-by-frame composition of the signal path.

    frames -> RunningWindow -> POS -> spectral filter -> BvpStream
           -> StreamingBeatDetector -> IBIs -> VitalsReport
"""
from __future__ import annotations

import time
from collections import Counter
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import spectral
from .beats import StreamingBeatDetector, extract_ibis
from .bvp import BvpStream, normalize_window, overlap_add
from .errors import EmptySpectrum, ZeroMeanChannel, ZeroVariance
from .pos import extract_rppg
from .vitals import build_report
from .windowing import RunningWindow

STAGES = ("windowing", "pos", "spectral", "bandpass", "overlap_add", "beats")


@dataclass
class PipelineConfig:
    window_seconds: float = 8.53
    hop_samples: int = 1
    gap_reset_seconds: float = 2.0
    band_low_hz: float = spectral.BAND_LOW_HZ
    band_high_hz: float = spectral.BAND_HIGH_HZ
    narrow_bandwidth_hz: float = spectral.NARROW_BANDWIDTH_HZ
    lock_min_bpm: float = spectral.LOCK_MIN_BPM
    lock_max_bpm: float = spectral.LOCK_MAX_BPM
    hr_window_seconds: float = 15.0
    hrv_window_seconds: float | None = None
    suppress_motion: bool = True
    interpolate_peaks: bool = True
    # re-time beats on a wide-band copy of the motion-suppressed signal
    refine_beats: bool = True
    refine_low_hz: float = 0.35
    refine_high_hz: float = 8.0
    refine_gate_ms: float = 2.0
    # windows whose source frames arrive slower than this are flagged
    low_rate_hz: float | None = None

    def __post_init__(self):
        if not 1.0 <= self.window_seconds <= 60.0:
            raise ValueError("window_seconds must be within [1, 60]")
        if self.hop_samples < 1:
            raise ValueError("hop_samples must be >= 1")
        if not 0 < self.band_low_hz < self.band_high_hz:
            raise ValueError("band edges must satisfy 0 < low < high")
        if not self.narrow_bandwidth_hz > 0:
            raise ValueError("narrow_bandwidth_hz must be positive")
        if not self.hr_window_seconds > 0:
            raise ValueError("hr_window_seconds must be positive")
        if self.hrv_window_seconds is not None and not self.hrv_window_seconds > 0:
            raise ValueError("hrv_window_seconds must be positive")
        if not 0 < self.refine_low_hz < self.refine_high_hz:
            raise ValueError("refine band edges must satisfy 0 < low < high")
        if not self.refine_gate_ms > 0:
            raise ValueError("refine_gate_ms must be positive")
        if self.low_rate_hz is None:
            self.low_rate_hz = 2.0 * self.band_high_hz

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)


class Pipeline:
    """Single-stream processor. Feed frames with :meth:`push`, then :meth:`finish`."""

    def __init__(self, config: PipelineConfig | None = None, timing=False):
        self.config = config or PipelineConfig()
        c = self.config
        self.window = RunningWindow(c.window_seconds, c.hop_samples, c.gap_reset_seconds)
        self.stream: BvpStream | None = None
        self.detector: StreamingBeatDetector | None = None
        self.diagnostics = Counter()
        self.low_rate_spans: list[tuple[float, float]] = []
        self.first_t = None
        self.last_t = None
        self.n_frames = 0
        self.timing = timing
        self.frame_times = {s: [] for s in STAGES} if timing else None

    def push(self, frame):
        if self.first_t is None:
            self.first_t = frame.timestamp
        self.last_t = frame.timestamp
        self.n_frames += 1
        tick = time.perf_counter if self.timing else None
        acc = dict.fromkeys(STAGES, 0.0) if self.timing else None

        t0 = tick() if tick else 0.0
        resets = self.window.resets
        windows = self.window.push(frame)
        if self.window.resets != resets:
            self.diagnostics["gap_resets"] += 1
        if tick:
            acc["windowing"] += tick() - t0

        for w in windows:
            self._process_window(w, acc, tick)

        if self.stream is not None:
            if tick:
                t0 = tick()
            self.stream.finalize(frame.timestamp)
            if self.detector.pending() >= self.stream.fs:
                self.detector.update()
            if tick:
                acc["beats"] += tick() - t0
        if self.timing:
            for s in STAGES:
                self.frame_times[s].append(acc[s])

    def _process_window(self, w, acc, tick):
        c = self.config
        self.diagnostics["windows"] += 1
        if w.source_rate < c.low_rate_hz:
            self.diagnostics["low_rate_windows"] += 1
            self.low_rate_spans.append((w.t_start, w.t_end))

        t0 = tick() if tick else 0.0
        try:
            raw = extract_rppg(w.colour, w.fs, w.t_start)
        except ZeroMeanChannel:
            self.diagnostics["skipped_zero_mean"] += 1
            return
        if tick:
            t1 = tick()
            acc["pos"] += t1 - t0
            t0 = t1

        spec = raw_spec = spectral.amplitude_spectrum(raw.values, raw.fs)
        if c.suppress_motion:
            motion = spectral.combine_motion_spectra(
                *(spectral.amplitude_spectrum(o, raw.fs) for o in w.orientation))
            spec = spectral.suppress_motion(spec, motion, c.band_low_hz, c.band_high_hz)
        try:
            f0 = spectral.locate_pulse(spec, c.band_low_hz, c.band_high_hz,
                                       c.lock_min_bpm, c.lock_max_bpm)
        except EmptySpectrum:
            self.diagnostics["skipped_no_lock"] += 1
            return
        finally:
            if tick:
                t1 = tick()
                acc["spectral"] += t1 - t0
                t0 = t1

        filtered = spectral.narrow_bandpass(raw, f0, c.narrow_bandwidth_hz)
        if tick:
            t1 = tick()
            acc["bandpass"] += t1 - t0
            t0 = t1

        try:
            filtered = normalize_window(filtered)
        except ZeroVariance:
            self.diagnostics["skipped_zero_variance"] += 1
            return
        wide = self._wide(raw, raw_spec, spec) if c.refine_beats else None
        if self.stream is None:
            self.stream = BvpStream(w.fs, t0=self.first_t, window_samples=w.n)
            self.detector = StreamingBeatDetector(self.stream, c.band_low_hz, c.interpolate_peaks,
                                                  c.refine_beats, c.refine_gate_ms)
        overlap_add(self.stream, filtered, wide=wide)
        self.diagnostics["windows_used"] += 1
        if tick:
            acc["overlap_add"] += tick() - t0

    def _wide(self, raw, raw_spec, spec):
        """Motion-suppressed, broadly band-passed copy of the window, normalised."""
        c = self.config
        n = raw.values.size
        high = min(c.refine_high_hz, raw.fs / 2.0)
        gain = spectral.wideband_gain(raw_spec, spec, c.refine_low_hz, high)
        y = np.fft.irfft(np.fft.rfft(raw.values) * gain, n)
        sd = y.std()
        return (y - y.mean()) / sd if sd > 0 else None

    def finish(self):
        """Flush the remaining BVP, detect the last beats and build the report."""
        if self.stream is not None:
            self.stream.finalize_all()
            self.detector.update(final=True)
            beats = self.detector.beats
        else:
            beats = []
        seq = extract_ibis(beats)
        self.diagnostics["gated_short_ibis"] += seq.gated_short
        self.diagnostics["gated_long_ibis"] += seq.gated_long
        origin = self.first_t if self.first_t is not None else 0.0
        end = self.last_t if self.last_t is not None else origin
        report = build_report(seq, self.config.hr_window_seconds, origin, end,
                              self.config.hrv_window_seconds)
        for hw in report.hr_series:
            hw.low_rate = any(a < hw.t_end_ms and b >= hw.t_start_ms for a, b in self.low_rate_spans)
        diag = {k: int(v) for k, v in self.diagnostics.items()}
        diag["frames"] = self.n_frames
        diag["origin_ms"] = float(origin)
        if self.detector is not None and self.config.refine_beats:
            diag["beats_refined"] = self.detector.stats["refined"]
        diag["fs"] = int(self.window.fs) if self.window.fs else None
        report.diagnostics = diag
        return report


def process_frames(frames, config: PipelineConfig | None = None):
    """Run a whole trace; returns (report, pipeline) so the BVP can be dumped."""
    pipe = Pipeline(config)
    for f in frames:
        pipe.push(f)
    return pipe.finish(), pipe


def stage_summary(frame_times) -> list[dict]:
    out = []
    for name in STAGES:
        ms = np.asarray(frame_times[name]) * 1000.0
        if ms.size == 0:
            ms = np.zeros(1)
        out.append({
            "stage": name,
            "mean_ms": float(ms.mean()),
            "p50_ms": float(np.percentile(ms, 50)),
            "p95_ms": float(np.percentile(ms, 95)),
            "p99_ms": float(np.percentile(ms, 99)),
            "max_ms": float(ms.max()),
        })
    return out
