"""Running analysis window over an irregularly sampled trace.

Frames are buffered and linearly resampled onto a uniform grid at 30 or
60 Hz. The grid is anchored at the first frame after a (re)start, and a
``SignalWindow`` is cut whenever the next grid window is fully covered by
received frames.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSamples, NonPositiveRate

CHANNELS = ("r", "g", "b", "pitch", "roll", "yaw")


@dataclass
class SignalWindow:
    fs: int
    n: int
    channels: np.ndarray  # shape (6, n): r, g, b, pitch, roll, yaw
    t_start: float
    hop: int
    source_rate: float = float("nan")
    index: int = 0  # grid index of the first sample since the last reset

    @property
    def colour(self):
        return self.channels[:3]

    @property
    def orientation(self):
        return self.channels[3:]

    @property
    def t_end(self):
        return self.t_start + (self.n - 1) * 1000.0 / self.fs


def select_target_rate(source_rate: float) -> int:
    """Pick 30 or 60 Hz, whichever is nearer; 45 Hz resolves to 30."""
    if not source_rate > 0:
        raise NonPositiveRate(f"source frame rate must be positive, got {source_rate}")
    return 60 if abs(source_rate - 60) < abs(source_rate - 30) else 30


def window_length(fs: int, window_seconds: float = 8.53) -> int:
    return int(round(window_seconds * fs))


def resample_linear(times, values, fs: float, t_start: float, n: int) -> np.ndarray:
    """Sample ``values`` (known at ``times``, ms) at ``t_start + k*1000/fs``.

    Points outside the input span take the nearest endpoint value.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 2:
        raise InsufficientSamples(f"need at least 2 samples, got {times.size}")
    grid = t_start + np.arange(n) * (1000.0 / fs)
    return np.interp(grid, times, values)


class RunningWindow:
    """Per-stream window state. Call :meth:`push` once per frame."""

    # frames are compared against grid times with this slack (ms) so that
    # timestamps written with finite precision still close a window
    _EPS_MS = 1e-3

    def __init__(self, window_seconds=8.53, hop_samples=1, gap_reset_seconds=2.0, fs=None):
        if hop_samples < 1:
            raise ValueError("hop_samples must be >= 1")
        self.window_seconds = window_seconds
        self.hop_samples = hop_samples
        self.gap_reset_ms = gap_reset_seconds * 1000.0
        self.fs = fs
        self.n = window_length(fs, window_seconds) if fs else None
        if self.n is not None and hop_samples > self.n:
            raise ValueError("hop_samples cannot exceed the window length")
        self.resets = 0
        self._cap = 1024
        self._t = np.empty(self._cap)
        self._v = np.empty((self._cap, 6))
        self._lo = 0
        self._hi = 0
        self._t0 = None
        self._next = 0
        self._emitted = 0

    def _clear(self):
        self._lo = self._hi = 0
        self._t0 = None
        self._next = 0
        self._emitted = 0

    def _append(self, t, row):
        if self._hi == self._cap:
            live = self._hi - self._lo
            if live * 2 > self._cap:
                self._cap *= 2
                t_new = np.empty(self._cap)
                v_new = np.empty((self._cap, 6))
            else:
                t_new, v_new = self._t, self._v
            t_new[:live] = self._t[self._lo:self._hi]
            v_new[:live] = self._v[self._lo:self._hi]
            self._t, self._v = t_new, v_new
            self._lo, self._hi = 0, live
        self._t[self._hi] = t
        self._v[self._hi] = row
        self._hi += 1

    def estimated_source_rate(self) -> float:
        if self._hi - self._lo < 2:
            return float("nan")
        return 1000.0 / float(np.median(np.diff(self._t[self._lo:self._hi])))

    def push(self, frame) -> list[SignalWindow]:
        """Add one frame; return the windows (usually 0 or 1) it completes."""
        t = float(frame.timestamp)
        if self._hi > self._lo:
            last = self._t[self._hi - 1]
            if t <= last:
                raise ValueError("frame timestamps must strictly increase")
            if t - last > self.gap_reset_ms:
                self._clear()
                self.resets += 1
        if self._t0 is None:
            self._t0 = t
        self._append(t, (frame.r_mean, frame.g_mean, frame.b_mean, frame.pitch, frame.roll, frame.yaw))

        if self.fs is None:
            rate = self.estimated_source_rate()
            if not np.isfinite(rate):
                return []
            fs = select_target_rate(rate)
            n = window_length(fs, self.window_seconds)
            if t - self._t0 + self._EPS_MS < (n - 1) * 1000.0 / fs:
                return []
            self.fs, self.n = fs, n
            if self.hop_samples > n:
                raise ValueError("hop_samples cannot exceed the window length")

        out = []
        dt = 1000.0 / self.fs
        while self._t0 + (self._next + self.n - 1) * dt <= t + self._EPS_MS:
            out.append(self._cut(self._next))
            self._next += self.hop_samples
        if out:
            # keep the frame bracketing the next window start
            start = self._t0 + self._next * dt
            k = int(np.searchsorted(self._t[self._lo:self._hi], start, side="right")) - 1
            self._lo += max(k, 0)
        return out

    def _cut(self, index: int) -> SignalWindow:
        dt = 1000.0 / self.fs
        t_start = self._t0 + index * dt
        t_end = t_start + (self.n - 1) * dt
        ts = self._t[self._lo:self._hi]
        lo = max(int(np.searchsorted(ts, t_start, side="right")) - 1, 0)
        hi = min(int(np.searchsorted(ts, t_end, side="left")) + 1, ts.size)
        seg_t = ts[lo:hi]
        seg_v = self._v[self._lo + lo:self._lo + hi]
        grid = t_start + np.arange(self.n) * dt
        chans = np.empty((6, self.n))
        for c in range(6):
            chans[c] = np.interp(grid, seg_t, seg_v[:, c])
        inside = seg_t[(seg_t >= t_start - self._EPS_MS) & (seg_t <= t_end + self._EPS_MS)]
        rate = 1000.0 / float(np.median(np.diff(inside))) if inside.size >= 2 else 0.0
        hop = self.n if self._emitted == 0 else self.hop_samples
        self._emitted += 1
        return SignalWindow(self.fs, self.n, chans, t_start, hop, rate, index)
