"""Beat localisation on the assembled BVP and inter-beat-interval extraction.

Every acceptance test for a candidate peak looks at most ``radius`` samples
to either side. A peak can therefore be decided as soon as that much
right-hand context is final, and the beats found do not depend on how the
stream was chunked.

Accepted crests can then be re-timed on a companion wide-band trace, which
keeps the beat-to-beat variation the narrow band smooths away. The wide
crest is used only when a local quadratic fit pins its vertex tightly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

IBI_MIN_MS = 250.0
IBI_MAX_MS = 2000.0
MIN_DISTANCE_PERIODS = 0.6
PROMINENCE_STD = 0.3
REFINE_SEARCH_PERIODS = 0.2
REFINE_FIT_PERIODS = 0.15
REFINE_GATE_MS = 2.0


@dataclass
class IbiSequence:
    beat_times: list[float]
    ibis: list[float]
    # time of the beat closing each interval; breaks after long gaps mean
    # consecutive beats are not always joined by an interval
    ibi_times: list[float] = field(default_factory=list)
    gated_short: int = 0
    gated_long: int = 0

    def runs(self):
        """Split ibis into runs of directly consecutive intervals."""
        out, cur = [], []
        for k, (ibi, t) in enumerate(zip(self.ibis, self.ibi_times)):
            if cur and not math.isclose(t - ibi, self.ibi_times[k - 1], abs_tol=1e-6):
                out.append(cur)
                cur = []
            cur.append(ibi)
        if cur:
            out.append(cur)
        return out


def search_radius(fs, band_low_hz=0.7) -> int:
    return int(math.ceil(fs / band_low_hz)) + 1


def _refine(x, i):
    a, b, c = x[i - 1], x[i], x[i + 1]
    denom = a - 2.0 * b + c
    if not denom < 0:
        return 0.0
    return min(max(0.5 * (a - c) / denom, -0.5), 0.5)


def _vertex_stderr(y, j, h):
    """Standard error (samples) of the vertex of a quadratic fitted to y[j-h:j+h+1]."""
    t = np.arange(-h, h + 1, dtype=float)
    a = np.stack([t * t, t, np.ones_like(t)], axis=1)
    seg = y[j - h:j + h + 1]
    coef, *_ = np.linalg.lstsq(a, seg, rcond=None)
    a2, a1, _ = coef
    if not a2 < 0:
        return math.inf
    resid = seg - a @ coef
    cov = np.linalg.inv(a.T @ a) * float(resid @ resid) / max(t.size - 3, 1)
    grad = np.array([a1 / (2 * a2 * a2), -1.0 / (2 * a2), 0.0])
    return math.sqrt(max(float(grad @ cov @ grad), 0.0))


def refine_crest(wide, i, lo, hi, fs, f0, gate_ms=REFINE_GATE_MS):
    """Crest of ``wide`` near sample ``i`` as (index, sub-sample offset), or None.

    None means there is no interior maximum within a fifth of a period, or
    the local quadratic fit places the vertex less precisely than ``gate_ms``.
    """
    period = fs / f0
    r = max(1, int(round(REFINE_SEARCH_PERIODS * period)))
    h = max(2, int(round(REFINE_FIT_PERIODS * period)))
    a, b = i - r, i + r + 1
    if a - h < lo or b + h > hi:
        return None
    seg = wide[a:b]
    if not np.all(np.isfinite(seg)):
        return None
    j = a + int(np.argmax(seg))
    if j == a or j == b - 1:
        return None
    if _vertex_stderr(wide, j, h) * 1000.0 / fs > gate_ms:
        return None
    return j, _refine(wide, j)


def _decide(x, f0, i, lo, hi, fs):
    """True when candidate ``i`` passes the distance and prominence tests.

    ``lo:hi`` is the contiguous defined run around ``i``.
    """
    f = f0[i]
    if not (np.isfinite(f) and f > 0):
        return False
    xi = x[i]
    d = int(MIN_DISTANCE_PERIODS * fs / f)
    left = x[max(lo, i - d):i]
    right = x[i + 1:min(hi, i + d + 1)]
    if (left.size and left.max() >= xi) or (right.size and right.max() > xi):
        return False
    w = int(round(fs / f))
    a, b = max(lo, i - w), min(hi, i + w + 1)
    prominence = xi - max(x[a:i + 1].min(), x[i:b].min())
    return bool(prominence > 0 and prominence >= PROMINENCE_STD * x[a:b].std())


def _candidates(x, start, stop):
    """Indices in [start, stop) that are strict-left, weak-right local maxima."""
    lo, hi = max(start, 1), min(stop, x.size - 1)
    if hi <= lo:
        return np.zeros(0, dtype=int)
    mid = x[lo:hi]
    ok = (mid > x[lo - 1:hi - 1]) & (mid >= x[lo + 1:hi + 1])
    return np.flatnonzero(ok) + lo


def _run_bounds(defined, i, radius):
    a, b = max(0, i - radius), min(defined.size, i + radius + 1)
    left_gap = np.flatnonzero(~defined[a:i])
    right_gap = np.flatnonzero(~defined[i + 1:b])
    lo = a + left_gap[-1] + 1 if left_gap.size else a
    hi = i + 1 + right_gap[0] if right_gap.size else b
    return lo, hi


def _positions(x, f0, wide, start, stop, fs, radius, interpolate, gate_ms, stats=None):
    """(index, offset) of the beats decided in [start, stop)."""
    defined = np.isfinite(x)
    out = []
    for i in _candidates(x, start, stop):
        i = int(i)
        lo, hi = _run_bounds(defined, i, radius)
        if not _decide(x, f0, i, lo, hi, fs):
            continue
        pos = None
        if wide is not None:
            pos = refine_crest(wide, i, lo, hi, fs, f0[i], gate_ms)
            if stats is not None:
                stats["refined" if pos is not None else "unrefined"] += 1
        if pos is None:
            pos = i, (_refine(x, i) if interpolate else 0.0)
        out.append(pos)
    return out


def detect_peaks(bvp, fs, f0, t0=0.0, band_low_hz=0.7, interpolate=True,
                 wide=None, gate_ms=REFINE_GATE_MS) -> list[float]:
    """Beat times (ms) in a finalized BVP segment.

    ``f0`` is the local dominant pulse frequency, either a scalar or one
    value per sample. Undefined samples (NaN) split the segment. ``wide``
    is an optional companion trace used to refine each beat's timing.
    """
    x = np.asarray(bvp, dtype=float)
    f0 = np.broadcast_to(np.asarray(f0, dtype=float), x.shape)
    if wide is not None:
        wide = np.asarray(wide, dtype=float)
    radius = search_radius(fs, band_low_hz)
    pos = _positions(x, f0, wide, 0, x.size, fs, radius, interpolate, gate_ms)
    return [t0 + (i + off) * 1000.0 / fs for i, off in pos]


class StreamingBeatDetector:
    """Incremental :func:`detect_peaks` over a growing :class:`BvpStream`."""

    def __init__(self, stream, band_low_hz=0.7, interpolate=True, refine=True,
                 gate_ms=REFINE_GATE_MS):
        self.stream = stream
        self.band_low_hz = band_low_hz
        self.interpolate = interpolate
        self.refine = refine
        self.gate_ms = gate_ms
        self.beats: list[float] = []
        self.stats = {"refined": 0, "unrefined": 0}
        self.decided_upto = 0

    def pending(self) -> int:
        """Finalized samples not yet scanned for beats."""
        return self.stream.finalized_upto - self.decided_upto

    def update(self, final=False) -> list[float]:
        s = self.stream
        if s.t0 is None:
            return []
        radius = search_radius(s.fs, self.band_low_hz)
        upto = s.finalized_upto
        stop = upto if final else upto - radius
        if stop <= self.decided_upto:
            return []
        a = max(0, self.decided_upto - radius - 1)
        b = min(upto, stop + radius + 1)
        x, f0, wide = s.segment(a, b)
        pos = _positions(x, f0, wide if self.refine else None, self.decided_upto - a,
                         stop - a, s.fs, radius, self.interpolate, self.gate_ms, self.stats)
        new = [s.t0 + ((a + i) + off) * 1000.0 / s.fs for i, off in pos]
        self.decided_upto = stop
        self.beats.extend(new)
        return new


def extract_ibis(beat_times) -> IbiSequence:
    """Successive intervals with physiological gating.

    An interval shorter than 250 ms drops its earlier beat. An interval
    longer than 2000 ms keeps both beats but is not reported.
    """
    kept: list[float] = []
    ibis, ibi_times = [], []
    short = long_ = 0
    for t in beat_times:
        while kept and t - kept[-1] < IBI_MIN_MS:
            dropped = kept.pop()
            short += 1
            if ibi_times and ibi_times[-1] == dropped:
                ibis.pop()
                ibi_times.pop()
        if kept:
            d = t - kept[-1]
            if d > IBI_MAX_MS:
                long_ += 1
            else:
                ibis.append(d)
                ibi_times.append(t)
        kept.append(t)
    return IbiSequence(kept, ibis, ibi_times, short, long_)
