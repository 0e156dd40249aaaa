"""Trace, ground-truth and results file formats.

Traces are CSV with the fixed header ``t_ms,r,g,b,pitch,roll,yaw``: one row
per video frame, holding the mean RoI colour and the head orientation in
degrees. Ground truth is either a ``beat_ms`` column of beat timestamps or a
``t_ms,bpm`` heart-rate series. Results are written as JSON.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, Iterator

from .errors import EmptyStream, MalformedRow, NonMonotoneTimestamp
from .vitals import HrWindow, VitalsReport

TRACE_HEADER = ("t_ms", "r", "g", "b", "pitch", "roll", "yaw")
BEATS_HEADER = ("beat_ms",)
HR_HEADER = ("t_ms", "bpm")


@dataclass(frozen=True, slots=True)
class FrameSample:
    timestamp: float
    r_mean: float
    g_mean: float
    b_mean: float
    pitch: float
    roll: float
    yaw: float

    @property
    def colour(self):
        return (self.r_mean, self.g_mean, self.b_mean)

    @property
    def orientation(self):
        return (self.pitch, self.roll, self.yaw)


@dataclass
class GroundTruth:
    source_kind: str
    beat_times: list[float] | None = None
    hr_series: list[tuple[float, float]] | None = None


def _lines(stream) -> Iterator[str]:
    if isinstance(stream, (bytes, bytearray)):
        stream = io.StringIO(stream.decode("utf-8"))
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    elif isinstance(stream, io.BufferedIOBase) or "b" in getattr(stream, "mode", ""):
        stream = io.TextIOWrapper(stream, encoding="utf-8")
    for line in stream:
        yield line


def _rows(stream, header: tuple[str, ...], require_header: bool) -> Iterator[tuple[int, list[str]]]:
    """Yield (line number, fields) for data rows, skipping blanks and the header."""
    reader = csv.reader(_lines(stream))
    first = True
    for lineno, fields in enumerate(reader, start=1):
        fields = [f.strip() for f in fields]
        if not fields or fields == [""]:
            continue
        if first:
            first = False
            if tuple(f.lower() for f in fields) == header:
                continue
            if require_header:
                raise MalformedRow(lineno, f"expected header {','.join(header)}")
        yield lineno, fields


def _finite(lineno: int, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MalformedRow(lineno, f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise MalformedRow(lineno, f"non-finite value: {text!r}")
    return value


def iter_trace(stream, require_header: bool = False) -> Iterator[FrameSample]:
    """Lazily parse a trace, validating each row as it arrives.

    Suitable for live input (stdin): rows are yielded as soon as they are read.
    Raises ``EmptyStream`` at the end if no data row was seen.
    """
    last_t = None
    seen = False
    for lineno, fields in _rows(stream, TRACE_HEADER, require_header):
        if len(fields) != 7:
            raise MalformedRow(lineno, f"expected 7 columns, got {len(fields)}")
        t, r, g, b, pitch, roll, yaw = (_finite(lineno, f) for f in fields)
        if min(r, g, b) < 0:
            raise MalformedRow(lineno, "negative channel mean")
        if last_t is not None and t <= last_t:
            raise NonMonotoneTimestamp(lineno)
        last_t = t
        seen = True
        yield FrameSample(t, r, g, b, pitch, roll, yaw)
    if not seen:
        raise EmptyStream()


def parse_trace(stream, require_header: bool = False) -> list[FrameSample]:
    return list(iter_trace(stream, require_header))


def parse_ground_truth(stream, kind: str) -> GroundTruth:
    if kind == "beats":
        beats = []
        for lineno, fields in _rows(stream, BEATS_HEADER, False):
            if len(fields) != 1:
                raise MalformedRow(lineno, "expected a single beat_ms column")
            t = _finite(lineno, fields[0])
            if beats and t <= beats[-1]:
                raise NonMonotoneTimestamp(lineno)
            beats.append(t)
        return GroundTruth("beats", beat_times=beats)
    if kind == "hr":
        series = []
        for lineno, fields in _rows(stream, HR_HEADER, False):
            if len(fields) != 2:
                raise MalformedRow(lineno, "expected t_ms,bpm")
            t, bpm = _finite(lineno, fields[0]), _finite(lineno, fields[1])
            if series and t <= series[-1][0]:
                raise NonMonotoneTimestamp(lineno)
            if not 20 < bpm < 250:
                raise MalformedRow(lineno, f"bpm {bpm} outside (20, 250)")
            series.append((t, bpm))
        return GroundTruth("hr", hr_series=series)
    raise ValueError(f"unknown ground truth kind {kind!r}; expected 'beats' or 'hr'")


def write_trace(samples: Iterable[FrameSample], out: IO[str]) -> None:
    out.write(",".join(TRACE_HEADER) + "\n")
    for s in samples:
        out.write(
            f"{s.timestamp:.6f},{s.r_mean:.6f},{s.g_mean:.6f},{s.b_mean:.6f},"
            f"{s.pitch:.6f},{s.roll:.6f},{s.yaw:.6f}\n"
        )


def write_beats(beat_times: Iterable[float], out: IO[str]) -> None:
    out.write("beat_ms\n")
    for t in beat_times:
        out.write(f"{t:.6f}\n")


# --- results JSON -----------------------------------------------------------

def _num(x):
    return None if x is None else float(x)


def results_dict(report: VitalsReport, bvp=None) -> dict:
    if report.rmssd_ms is None and report.lf_nu is None:
        hrv = None
    else:
        hrv = {
            "rmssd_ms": _num(report.rmssd_ms),
            "lf_nu": _num(report.lf_nu),
            "hf_nu": _num(report.hf_nu),
            "lf_hf_ratio": _num(report.lf_hf_ratio),
        }
    doc = {
        "hr_series": [w.to_dict() for w in report.hr_series],
        "beats_ms": [float(t) for t in report.beats_ms],
        "hrv": hrv,
        "n_beats": int(report.n_beats),
        "truncated": bool(report.truncated),
        "diagnostics": dict(sorted(report.diagnostics.items())),
    }
    if report.hrv_series is not None:
        doc["hrv_series"] = [dict(entry) for entry in report.hrv_series]
    if bvp is not None:
        times, values = bvp.finalized_samples()
        doc["bvp"] = [{"t_ms": float(t), "value": float(v)} for t, v in zip(times, values)]
    return doc


def write_results(report: VitalsReport, bvp=None) -> bytes:
    """Serialise a report (and optionally the finalized BVP) to UTF-8 JSON bytes."""
    return (json.dumps(results_dict(report, bvp), indent=1) + "\n").encode("utf-8")


def read_results(data) -> tuple[VitalsReport, list[tuple[float, float]] | None]:
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    doc = json.loads(data)
    hrv = doc.get("hrv") or {}
    report = VitalsReport(
        hr_series=[HrWindow.from_dict(w) for w in doc["hr_series"]],
        beats_ms=list(doc["beats_ms"]),
        rmssd_ms=hrv.get("rmssd_ms"),
        lf_nu=hrv.get("lf_nu"),
        hf_nu=hrv.get("hf_nu"),
        lf_hf_ratio=hrv.get("lf_hf_ratio"),
        n_beats=doc.get("n_beats", len(doc["beats_ms"])),
        truncated=doc.get("truncated", False),
        diagnostics=doc.get("diagnostics", {}),
        hrv_series=doc.get("hrv_series"),
    )
    bvp = doc.get("bvp")
    if bvp is not None:
        bvp = [(e["t_ms"], e["value"]) for e in bvp]
    return report, bvp
