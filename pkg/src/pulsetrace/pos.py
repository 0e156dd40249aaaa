"""Plane-orthogonal-to-skin combination of the three colour traces."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, ZeroMeanChannel

# Rows project temporally normalised RGB onto the plane orthogonal to the
# skin-tone direction; both rows sum to zero, so (1, 1, 1) intensity changes
# vanish.
PROJECTION = np.array([[0.0, 1.0, -1.0], [-2.0, 1.0, 1.0]])

# normalised channels are O(1); spread below this is floating-point residue
_NUMERICAL_ZERO = 1e-12


@dataclass
class RawRppgWindow:
    values: np.ndarray
    fs: int
    t_start: float


def temporal_normalize(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    mean = x.mean()
    if not mean > 0:
        raise ZeroMeanChannel(f"channel mean must be positive, got {mean}")
    return x / mean


def pos_project(r, g, b, fs=30, t_start=0.0) -> RawRppgWindow:
    """Return ``S1 + alpha*S2`` for already normalised r, g, b series.

    ``alpha`` is the ratio of the population standard deviations of the two
    projections; a flat second projection gives ``alpha = 0``.
    """
    r, g, b = (np.asarray(c, dtype=float) for c in (r, g, b))
    if not r.shape == g.shape == b.shape:
        raise LengthMismatch(f"channel lengths differ: {r.shape}, {g.shape}, {b.shape}")
    s1 = g - b
    s2 = g + b - 2.0 * r
    sd1, sd2 = s1.std(), s2.std()
    if sd1 <= _NUMERICAL_ZERO and sd2 <= _NUMERICAL_ZERO:
        h = np.zeros_like(s1)
    elif sd2 <= _NUMERICAL_ZERO:
        h = s1
    else:
        h = s1 + (sd1 / sd2) * s2
    return RawRppgWindow(h, fs, t_start)


def extract_rppg(colour, fs=30, t_start=0.0) -> RawRppgWindow:
    """Normalise a (3, n) RGB block and project it."""
    r, g, b = (temporal_normalize(c) for c in colour)
    return pos_project(r, g, b, fs, t_start)
