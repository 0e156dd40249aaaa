import io
import math

import numpy as np
import pytest

from pulsetrace.errors import InsufficientDuration, InvalidSpec, NoOverlap
from pulsetrace.harness import SynthSpec, evaluate_hr, evaluate_hrv, synth_arrays, synth_trace, truth_hr
from pulsetrace.trace_io import GroundTruth, write_beats, write_trace
from pulsetrace.vitals import HrWindow


def test_constant_rate_beats():
    frames, truth = synth_trace(SynthSpec(duration_s=60, hr_bpm=72))
    assert abs(len(truth.beat_times) - 72) <= 1
    assert np.allclose(np.diff(truth.beat_times), 60000 / 72, atol=1e-6)
    assert len(frames) == 1800


def _bytes(spec):
    frames, truth = synth_trace(spec)
    a, b = io.StringIO(), io.StringIO()
    write_trace(frames, a)
    write_beats(truth.beat_times, b)
    return a.getvalue(), b.getvalue()


def test_deterministic():
    spec = SynthSpec(duration_s=20, rr_jitter_ms=20, snr_db=5, fps_jitter_ms=3, seed=11)
    assert _bytes(spec) == _bytes(SynthSpec(**spec.to_dict()))
    assert _bytes(spec) != _bytes(SynthSpec(**{**spec.to_dict(), "seed": 12}))


def test_jitter_rmssd():
    _, truth = synth_trace(SynthSpec(duration_s=300, rr_jitter_ms=30, seed=1))
    b = np.asarray(truth.beat_times)
    ibis = np.diff(b)
    # successive differences straight from the beat list
    r = math.sqrt(np.sum(np.diff(ibis) ** 2) / (ibis.size - 1))
    assert r == pytest.approx(30 * math.sqrt(2), rel=0.10)


def test_pulse_on_green_and_crest_on_beats():
    t, ch, truth = synth_arrays(SynthSpec(duration_s=10, hr_bpm=60, fps=1000))
    assert np.all(ch[0] == 110.0) and np.all(ch[2] == 80.0)
    for b in truth:
        k = int(round(b))
        lo, hi = max(k - 200, 0), min(k + 200, t.size)
        if lo > 0 and hi < t.size:
            assert abs(t[lo + np.argmax(ch[1, lo:hi])] - b) <= 1.0


def test_motion_in_colour_and_orientation():
    t, ch, _ = synth_arrays(SynthSpec(duration_s=10, motion_hz=2.0, motion_color_amplitude=0.01,
                                      motion_orientation_deg=5.0, pulse_amplitude=0.0))
    for c in (ch[1] / 95.0 - 1.0, ch[3]):
        f = np.fft.rfftfreq(t.size, 1 / 30)
        assert f[np.argmax(np.abs(np.fft.rfft(c)))] == pytest.approx(2.0, abs=0.1)


def test_fps_segments():
    t, _, _ = synth_arrays(SynthSpec(duration_s=20, fps_segments=[[10, 5]]))
    d = np.diff(t)
    assert np.allclose(d[t[1:] <= 10000], 1000 / 30)
    assert np.allclose(d[t[:-1] >= 10000], 200)


@pytest.mark.parametrize("bad", [{"duration_s": 0}, {"fps": -1}, {"waveform": "square"},
                                 {"hr_bpm": 0}, {"rr_jitter_ms": -1}, {"unknown": 1}])
def test_invalid_spec(bad):
    with pytest.raises(InvalidSpec):
        SynthSpec.from_dict(bad)


def _truth_72():
    return GroundTruth("beats", beat_times=list(np.arange(0.0, 60000.0, 60000.0 / 72)))


def _windows(offsets):
    return [HrWindow(k * 15000.0, (k + 1) * 15000.0, 72.0 + e) for k, e in enumerate(offsets)]


def test_mae_identical():
    assert evaluate_hr(_windows([0, 0, 0]), _truth_72()).mae_bpm == pytest.approx(0.0, abs=1e-9)


def test_mae_offset():
    assert evaluate_hr(_windows([3, 3, 3]), _truth_72()).mae_bpm == pytest.approx(3.0)


def test_mae_mixed():
    res = evaluate_hr(_windows([1, -2, 3]), _truth_72(), 15, 0.0)
    assert res.mae_bpm == pytest.approx((1 + 2 + 3) / 3)
    assert res.mae_bpm == pytest.approx(np.mean([abs(r["error_bpm"]) for r in res.per_window]))
    assert res.coverage == pytest.approx(1.0)


def test_mae_order_invariant():
    ws = _windows([1, -2, 3])
    assert evaluate_hr(ws[::-1], _truth_72()).mae_bpm == evaluate_hr(ws, _truth_72()).mae_bpm


def test_mae_no_overlap():
    ws = [HrWindow(100000.0, 115000.0, 70.0)]
    with pytest.raises(NoOverlap):
        evaluate_hr(ws, _truth_72())


def test_truth_from_hr_series():
    gt = GroundTruth("hr", hr_series=[(0.0, 70.0), (5000.0, 74.0), (20000.0, 90.0)])
    assert truth_hr(gt, 0.0, 15000.0) == pytest.approx(72.0)


def _beats_from(ibis, t0=0.0):
    return list(t0 + np.concatenate([[0.0], np.cumsum(ibis)]))


def test_hrv_identical():
    rng = np.random.default_rng(0)
    beats = _beats_from(800 + rng.normal(0, 30, 100))
    res = evaluate_hrv(beats, GroundTruth("beats", beat_times=beats))
    assert (res.rmssd_error_ms, res.lf_nu_error, res.hf_nu_error, res.ratio_error) == (0, 0, 0, 0)


def test_hrv_translation():
    rng = np.random.default_rng(1)
    beats = _beats_from(800 + rng.normal(0, 30, 100))
    res = evaluate_hrv([b + 10.0 for b in beats], GroundTruth("beats", beat_times=beats))
    assert res.rmssd_error_ms == pytest.approx(0.0, abs=1e-9)


def test_hrv_error_subtraction():
    # truth alternates 800 +/- 20, so every successive difference is 40 ms
    truth = _beats_from(800 + 20 * (-1.0) ** np.arange(60))
    # predicted differences cycle +10, -20, +15, -10, +20, -15
    diffs = np.tile([10, -20, 15, -10, 20, -15], 10)
    pred = _beats_from(800 + np.concatenate([[0], np.cumsum(diffs)]))
    want = abs(40.0 - math.sqrt((100 + 400 + 225) / 3))
    assert want == pytest.approx(24.45, abs=0.005)
    res = evaluate_hrv(pred, GroundTruth("beats", beat_times=truth))
    assert res.rmssd_error_ms == pytest.approx(want, rel=1e-12)


def test_hrv_too_short():
    beats = _beats_from([800] * 20)
    with pytest.raises(InsufficientDuration):
        evaluate_hrv(beats, GroundTruth("beats", beat_times=beats))
