"""Acceptance gate: one PASS/FAIL line per primary criterion.

Run under pytest (lines are repeated in the terminal summary) or directly:
``python3 tests/test_acceptance.py``.
"""
import io
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from pulsetrace.harness import SynthSpec, evaluate_hr, evaluate_hrv, synth_trace
from pulsetrace.pipeline import STAGES, Pipeline, PipelineConfig, process_frames, stage_summary
from pulsetrace.trace_io import parse_trace, write_results, write_trace

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []

HERE = os.path.dirname(os.path.abspath(__file__))
HR_WINDOW_S = 15


def verdict(name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def info(name, detail):
    line = f"[INFO] {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def hr_mae(spec, config=None):
    frames, truth = synth_trace(spec)
    rep, _ = process_frames(frames, config)
    if not rep.hr_series:
        return None, rep
    return evaluate_hr(rep.hr_series, truth, HR_WINDOW_S, frames[0].timestamp).mae_bpm, rep


def test_steady_hr():
    spec = SynthSpec(duration_s=60, hr_bpm=72, snr_db=10, fps=30, seed=0)
    frames, truth = synth_trace(spec)
    buf = io.StringIO()
    write_trace(frames, buf)
    data = buf.getvalue().encode()
    t0 = time.perf_counter()
    rep, _ = process_frames(parse_trace(data))
    write_results(rep)
    runtime = time.perf_counter() - t0
    mae = evaluate_hr(rep.hr_series, truth, HR_WINDOW_S, 0.0).mae_bpm
    verdict("steady HR", mae <= 1.0 and runtime <= 2.0,
            f"MAE {mae:.3f} bpm (<= 1.0), CSV-to-JSON runtime {runtime:.2f} s (<= 2 s)")


def test_hr_sweep():
    rows, ok = [], True
    for bpm in (45, 60, 90, 120, 150, 180):
        mae, _ = hr_mae(SynthSpec(duration_s=60, hr_bpm=bpm, snr_db=10, seed=bpm))
        ok &= mae is not None and mae <= 2.0
        rows.append(f"{bpm}:{'none' if mae is None else f'{mae:.2f}'}")
    for bpm in (40, 210):
        _, rep = hr_mae(SynthSpec(duration_s=60, hr_bpm=bpm, snr_db=10, seed=bpm))
        locked = rep.diagnostics.get("windows_used", 0)
        ok &= not rep.hr_series and locked == 0
        rows.append(f"{bpm}:{len(rep.hr_series)} windows/{locked} locks")
    verdict("HR sweep + band edges", ok, "MAE bpm (<= 2.0) " + ", ".join(rows))


def _motion_spec():
    # pulse at 1.2 Hz; a 2.0 Hz motion tone of the same colour amplitude,
    # also present on all three head angles
    return SynthSpec(duration_s=60, hr_bpm=72, snr_db=10, motion_hz=2.0,
                     motion_color_amplitude=0.01, motion_orientation_deg=5.0, seed=21)


def test_motion_suppression():
    on, _ = hr_mae(_motion_spec(), PipelineConfig(suppress_motion=True))
    off, rep_off = hr_mae(_motion_spec(), PipelineConfig(suppress_motion=False))
    off_v = math.inf if off is None else off
    verdict("motion suppression", on is not None and on <= 2.0 and off_v > on,
            f"MAE {on:.3f} bpm with suppression (<= 2), {off_v:.2f} bpm without (strictly larger)")


def test_tracking():
    mae, _ = hr_mae(SynthSpec(duration_s=90, hr_bpm=140, hr_end_bpm=80, snr_db=10, seed=5))
    verdict("tracking 140->80 bpm", mae is not None and mae <= 3.0, f"MAE {mae:.3f} bpm (<= 3.0)")


def _rmssd_case(target, snr_db, seed):
    spec = SynthSpec(duration_s=120, hr_bpm=72, rr_jitter_ms=target / math.sqrt(2), snr_db=snr_db, seed=seed)
    frames, truth = synth_trace(spec)
    rep, _ = process_frames(frames)
    res = evaluate_hrv(rep.beats_ms, truth)
    return rep.rmssd_ms, res.rmssd_error_ms


def test_rmssd():
    # i.i.d. RR jitter of sd s gives RMSSD s*sqrt(2); scenarios carry no sensor noise
    rows, ok = [], True
    for target in (10, 40, 70):
        got, err = _rmssd_case(target, None, seed=target)
        ok &= err <= 10.0 and err <= 20.0
        rows.append(f"{target} ms: err {err:.2f}")
    zero, _ = _rmssd_case(0, None, seed=1)
    ok &= zero <= 5.0
    rows.append(f"zero jitter: {zero:.2f} ms (<= 5)")
    verdict("RMSSD accuracy", ok, "error <= 10 ms; " + "; ".join(rows))
    noisy = [f"{t}:{_rmssd_case(t, 10.0, seed=t)[1]:.1f}" for t in (0, 10, 40, 70)]
    info("RMSSD at SNR 10 dB", "abs error ms " + ", ".join(noisy))


def test_frequency_hrv():
    vals, ok = [], True
    for f_mod in (0.10, 0.25):
        frames, _ = synth_trace(SynthSpec(duration_s=120, hr_bpm=72, rr_modulation_hz=f_mod,
                                          rr_modulation_depth_ms=40, snr_db=10, seed=3))
        rep, _ = process_frames(frames)
        ok &= rep.lf_nu is not None and abs(rep.lf_nu + rep.hf_nu - 1.0) <= 1e-9
        ok &= (rep.lf_nu >= 0.8) if f_mod < 0.15 else (rep.hf_nu >= 0.8)
        vals.append(f"{f_mod} Hz: lf_nu {rep.lf_nu:.3f} hf_nu {rep.hf_nu:.3f}")
    verdict("frequency-domain HRV", ok, "; ".join(vals) + "; lf_nu + hf_nu == 1 +/- 1e-9")


NYQUIST_SEEDS = range(8)


def _low_rate_run(bpm, seed):
    spec = SynthSpec(duration_s=60, hr_bpm=bpm, snr_db=10, fps_segments=[[20, 5], [40, 30]], seed=seed)
    frames, truth = synth_trace(spec)
    rep, _ = process_frames(frames)
    low = [w for w in rep.hr_series if w.low_rate]
    err = evaluate_hr(low, truth).mae_bpm if low else math.inf
    return rep.diagnostics.get("low_rate_windows", 0), err


def test_nyquist_degradation():
    # 150 bpm is exactly half the 5 fps rate, so the outcome depends on the
    # pulse phase against the frame clock; judged over a fixed seed set
    runs = [_low_rate_run(150, seed) for seed in NYQUIST_SEEDS]
    errs = [e for _, e in runs]
    flagged = all(n > 0 for n, _ in runs)
    med = float(np.median(errs))
    for bpm in (155, 165):
        above = [_low_rate_run(bpm, seed)[1] for seed in NYQUIST_SEEDS]
        info(f"low frame rate at {bpm} bpm", "HR error in flagged windows per seed "
             + ", ".join(f"{e:.1f}" for e in above) + " bpm")
    verdict("Nyquist degradation (expected failure)", flagged and med > 5.0,
            f"low-rate windows flagged in {sum(n > 0 for n, _ in runs)}/{len(runs)} runs; "
            f"HR error in flagged windows per seed " + ", ".join(f"{e:.1f}" for e in errs)
            + f" bpm, median {med:.1f} (> 5)")


def test_unit_property_suites():
    files = sorted(f for f in os.listdir(HERE)
                   if f.startswith("test_") and f.endswith(".py") and f != "test_acceptance.py")
    out = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *files],
                         cwd=HERE, capture_output=True, text=True)
    tail = out.stdout.strip().splitlines()[-1] if out.stdout.strip() else out.stderr.strip()[-200:]
    verdict("unit/property suites", out.returncode == 0, tail)


def test_throughput():
    frames, _ = synth_trace(SynthSpec(duration_s=300, hr_bpm=72, snr_db=10, fps=30))
    pipe = Pipeline(timing=True)
    t0 = time.perf_counter()
    for f in frames:
        pipe.push(f)
    pipe.finish()
    per_frame = 1000.0 * (time.perf_counter() - t0) / len(frames)
    rows = stage_summary(pipe.frame_times)
    stages = ", ".join(f"{r['stage']} {r['mean_ms']:.3f}" for r in rows)
    ok = per_frame <= 2.0 and [r["stage"] for r in rows] == list(STAGES)
    verdict("throughput", ok, f"{per_frame:.3f} ms/frame mean (<= 2); stage means ms: {stages}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
