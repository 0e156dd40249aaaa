"""Heart rate and heart-rate-variability metrics from inter-beat intervals."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import welch

from .beats import IbiSequence
from .errors import InsufficientBeats, InsufficientDuration, ZeroPower

TACHOGRAM_HZ = 2.5
LF_BAND = (0.04, 0.15)
HF_BAND = (0.15, 0.4)
MIN_SPECTRAL_SPAN_MS = 30_000.0


@dataclass
class HrWindow:
    t_start_ms: float
    t_end_ms: float
    bpm: float
    low_rate: bool = False

    def to_dict(self):
        d = {"t_start_ms": float(self.t_start_ms), "t_end_ms": float(self.t_end_ms), "bpm": float(self.bpm)}
        if self.low_rate:
            d["low_rate"] = True
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["t_start_ms"], d["t_end_ms"], d["bpm"], bool(d.get("low_rate", False)))


@dataclass
class VitalsReport:
    hr_series: list[HrWindow] = field(default_factory=list)
    beats_ms: list[float] = field(default_factory=list)
    rmssd_ms: float | None = None
    lf_nu: float | None = None
    hf_nu: float | None = None
    lf_hf_ratio: float | None = None
    n_beats: int = 0
    truncated: bool = False
    diagnostics: dict = field(default_factory=dict)
    hrv_series: list[dict] | None = None


def heart_rate(ibis) -> float:
    """60000 / mean IBI (ms), in beats per minute."""
    ibis = np.asarray(ibis, dtype=float)
    if ibis.size < 2:
        raise InsufficientBeats(f"need at least 2 intervals, got {ibis.size}")
    return 60000.0 / float(ibis.mean())


def rmssd(ibis) -> float:
    ibis = np.asarray(ibis, dtype=float)
    if ibis.size < 3:
        raise InsufficientBeats(f"need at least 3 intervals, got {ibis.size}")
    return float(np.sqrt(np.mean(np.diff(ibis) ** 2)))


def rmssd_runs(runs) -> float:
    """RMSSD pooled over runs of consecutive intervals (no differences across breaks)."""
    diffs = [np.diff(np.asarray(r, dtype=float)) for r in runs if len(r) >= 2]
    diffs = np.concatenate(diffs) if diffs else np.zeros(0)
    if diffs.size < 2:
        raise InsufficientBeats(f"need at least 2 successive differences, got {diffs.size}")
    return float(np.sqrt(np.mean(diffs ** 2)))


def tachogram(ibis, ibi_times, rate=TACHOGRAM_HZ):
    """Uniformly sampled IBI series (ms).

    The value at time t is the interval whose span contains t, read on a
    ``rate`` Hz grid starting at the first interval's opening beat.
    """
    ibis = np.asarray(ibis, dtype=float)
    ends = np.asarray(ibi_times, dtype=float)
    start = ends[0] - ibis[0]
    step = 1000.0 / rate
    grid = start + np.arange(int(math.floor((ends[-1] - start) / step)) + 1) * step
    k = np.minimum(np.searchsorted(ends, grid, side="left"), ibis.size - 1)
    return grid, ibis[k]


def band_powers(ibis, ibi_times):
    """(LF, HF) absolute powers (ms^2) of the tachogram."""
    ibis = np.asarray(ibis, dtype=float)
    ibi_times = np.asarray(ibi_times, dtype=float)
    if ibis.size < 2 or ibi_times[-1] - (ibi_times[0] - ibis[0]) < MIN_SPECTRAL_SPAN_MS:
        raise InsufficientDuration("frequency-domain HRV needs at least 30 s of beats")
    _, series = tachogram(ibis, ibi_times)
    series = series - series.mean()
    padded = np.zeros(1 << int(math.ceil(math.log2(series.size))))
    padded[:series.size] = series
    nperseg = min(256, padded.size)
    f, pxx = welch(padded, fs=TACHOGRAM_HZ, window="hann", nperseg=nperseg,
                   noverlap=nperseg // 2, detrend=False, scaling="density")
    df = f[1] - f[0]
    lf = float(pxx[(f >= LF_BAND[0]) & (f < LF_BAND[1])].sum() * df)
    hf = float(pxx[(f >= HF_BAND[0]) & (f <= HF_BAND[1])].sum() * df)
    return lf, hf


def frequency_metrics(ibis, ibi_times):
    """(lf_nu, hf_nu, lf/hf) from intervals and the times of their closing beats."""
    lf, hf = band_powers(ibis, ibi_times)
    total = lf + hf
    if not total > 0:
        raise ZeroPower("no power in the LF and HF bands")
    ratio = lf / hf if hf > 0 else math.inf
    return lf / total, hf / total, ratio


def hr_windows(ibis, ibi_times, window_s, origin_ms, end_ms):
    """Heart rate on a fixed grid of ``window_s`` windows starting at ``origin_ms``.

    An interval belongs to a window when both of its beats fall inside it.
    Windows with fewer than two intervals are left out.
    """
    ibis = np.asarray(ibis, dtype=float)
    ends = np.asarray(ibi_times, dtype=float)
    starts = ends - ibis
    w = window_s * 1000.0
    out = []
    k = 0
    while origin_ms + (k + 1) * w <= end_ms + 1e-6:
        a, b = origin_ms + k * w, origin_ms + (k + 1) * w
        sel = (starts >= a) & (ends < b)
        if sel.sum() >= 2:
            out.append(HrWindow(a, b, heart_rate(ibis[sel])))
        k += 1
    return out


def hrv_metrics(seq):
    """(rmssd, lf_nu, hf_nu, ratio) for an IbiSequence; unavailable parts are None."""
    try:
        r = rmssd_runs(seq.runs())
    except InsufficientBeats:
        r = None
    try:
        lf, hf, ratio = frequency_metrics(seq.ibis, seq.ibi_times)
    except (InsufficientDuration, ZeroPower):
        lf = hf = ratio = None
    return r, lf, hf, ratio


def build_report(seq, hr_window_s, origin_ms, end_ms, hrv_window_s=None) -> VitalsReport:
    r, lf, hf, ratio = hrv_metrics(seq)
    report = VitalsReport(
        hr_series=hr_windows(seq.ibis, seq.ibi_times, hr_window_s, origin_ms, end_ms),
        beats_ms=list(seq.beat_times),
        rmssd_ms=r,
        lf_nu=lf,
        hf_nu=hf,
        lf_hf_ratio=None if ratio is None or math.isinf(ratio) else ratio,
        n_beats=len(seq.beat_times),
    )
    if hrv_window_s:
        report.hrv_series = rolling_hrv(seq, hrv_window_s, origin_ms, end_ms)
    return report


def rolling_hrv(seq, window_s, origin_ms, end_ms):
    w = window_s * 1000.0
    ibis = np.asarray(seq.ibis, dtype=float)
    ends = np.asarray(seq.ibi_times, dtype=float)
    out = []
    k = 0
    while origin_ms + (k + 1) * w <= end_ms + 1e-6:
        a, b = origin_ms + k * w, origin_ms + (k + 1) * w
        sel = (ends - ibis >= a) & (ends < b)
        sub = IbiSequence([], list(ibis[sel]), list(ends[sel]))
        r, lf, hf, ratio = hrv_metrics(sub)
        out.append({
            "t_start_ms": float(a), "t_end_ms": float(b), "rmssd_ms": r,
            "lf_nu": lf, "hf_nu": hf,
            "lf_hf_ratio": None if ratio is None or math.isinf(ratio) else ratio,
        })
        k += 1
    return out
