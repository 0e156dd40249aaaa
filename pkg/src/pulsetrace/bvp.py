"""Overlap-add assembly of normalised filtered windows into one BVP stream."""
from __future__ import annotations

import math

import numpy as np

from .errors import NegativePlacement, ZeroVariance
from .spectral import FilteredBvpWindow


def normalize_window(win: FilteredBvpWindow) -> FilteredBvpWindow:
    v = np.asarray(win.values, dtype=float)
    sd = v.std()
    if not sd > 1e-12 * max(1.0, float(np.abs(v).max())):
        raise ZeroVariance("window has zero variance")
    return FilteredBvpWindow((v - v.mean()) / sd, win.fs, win.t_start, win.f0)


class BvpStream:
    """Running sum and coverage count per sample; values are read as sum/count.

    Sample ``i`` sits at ``t0 + i*1000/fs`` ms. ``t0`` is fixed by the first
    window added (or passed explicitly).
    """

    def __init__(self, fs, t0=None, window_samples=None):
        self.fs = fs
        self.t0 = t0
        self.window_samples = window_samples
        self._sum = np.zeros(0)
        self._count = np.zeros(0, dtype=np.int64)
        self._f0 = np.zeros(0)
        self._wide = np.zeros(0)
        self._len = 0
        self.finalized_upto = 0

    def __len__(self):
        return self._len

    def _grow(self, size):
        if size > self._sum.size:
            cap = max(size, 2 * self._sum.size, 1024)
            for name, dtype in (("_sum", float), ("_count", np.int64), ("_f0", float), ("_wide", float)):
                old = getattr(self, name)
                new = np.zeros(cap, dtype=dtype)
                new[:old.size] = old
                setattr(self, name, new)
        self._len = max(self._len, size)

    def shift_for(self, t_start) -> int:
        if self.t0 is None:
            self.t0 = t_start
        return int(math.floor((t_start - self.t0) * self.fs / 1000.0 + 0.5))

    def add(self, values, shift, f0=float("nan"), wide=None):
        """Accumulate one window; ``wide`` is an optional companion series
        (the beat-timing signal) averaged the same way."""
        n = len(values)
        if shift < 0:
            raise NegativePlacement(f"window would start {-shift} samples before the stream")
        if self.window_samples is None:
            self.window_samples = n
        self._grow(shift + n)
        self._sum[shift:shift + n] += values
        self._count[shift:shift + n] += 1
        self._f0[shift:shift + n] += f0
        if wide is not None:
            self._wide[shift:shift + n] += wide

    @property
    def values(self) -> np.ndarray:
        c = self._count[:self._len]
        out = np.full(self._len, np.nan)
        np.divide(self._sum[:self._len], c, out=out, where=c > 0)
        return out

    @property
    def counts(self) -> np.ndarray:
        return self._count[:self._len].copy()

    @property
    def f0(self) -> np.ndarray:
        """Mean dominant frequency of the windows covering each sample."""
        c = self._count[:self._len]
        out = np.full(self._len, np.nan)
        np.divide(self._f0[:self._len], c, out=out, where=c > 0)
        return out

    def segment(self, start, stop):
        """(values, f0, wide) for samples ``start:stop``; NaN where nothing was added."""
        c = self._count[start:stop]
        out = []
        for acc in (self._sum, self._f0, self._wide):
            a = np.full(c.size, np.nan)
            np.divide(acc[start:stop], c, out=a, where=c > 0)
            out.append(a)
        return tuple(out)

    def times(self, start=0, stop=None) -> np.ndarray:
        stop = self._len if stop is None else stop
        return self.t0 + np.arange(start, stop) * (1000.0 / self.fs)

    def finalize(self, now_ms) -> range:
        """Mark samples that no later window can reach; return the new index range.

        A window cut at time ``now_ms`` starts no earlier than one window
        length before it, so everything older is final.
        """
        if self.t0 is None or self.window_samples is None:
            return range(self.finalized_upto, self.finalized_upto)
        upto = math.floor((now_ms - self.t0) * self.fs / 1000.0 + 1e-9) - self.window_samples
        upto = min(max(upto, self.finalized_upto), self._len)
        new = range(self.finalized_upto, upto)
        self.finalized_upto = upto
        return new

    def finalize_all(self) -> range:
        new = range(self.finalized_upto, self._len)
        self.finalized_upto = self._len
        return new

    def finalized_samples(self):
        """(times, values) of finalized samples covered by at least one window."""
        k = self.finalized_upto
        if self.t0 is None or k == 0:
            return np.zeros(0), np.zeros(0)
        c = self._count[:k]
        keep = c > 0
        return self.times(0, k)[keep], (self._sum[:k][keep] / c[keep])


def overlap_add(stream: BvpStream, window: FilteredBvpWindow, shift=None, wide=None) -> BvpStream:
    """Add an already normalised window at ``shift`` (derived from t_start if omitted)."""
    if shift is None:
        shift = stream.shift_for(window.t_start)
    stream.add(window.values, shift, window.f0, wide)
    return stream


def finalize_region(stream: BvpStream, now_ms) -> range:
    return stream.finalize(now_ms)
