import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from multiradar.errors import InsufficientPeaks, InvalidInput, NoMatches
from multiradar.sigproc import RealSeries
from multiradar.vitals import (
    MatchResult,
    PeakConfig,
    RespiratoryEstimate,
    compute_metrics,
    detect_peaks,
    intervals_from_peaks,
    match_intervals,
)

from conftest import sine

FS = 100.0


def metric_oracle(est, ref, tol):
    n = len(est)
    rmse = math.sqrt(math.fsum((a - b) ** 2 for a, b in zip(est, ref)) / n)
    errs = [abs(60.0 / a - 60.0 / b) for a, b in zip(est, ref)]
    return rmse, math.fsum(errs) / n, sum(e < tol for e in errs) / n


# --- peak detection ------------------------------------------------------------------


def test_peak_config_validation():
    with pytest.raises(InvalidInput):
        PeakConfig(min_separation=0)
    with pytest.raises(InvalidInput):
        PeakConfig(min_prominence=-0.1)


def test_sinusoid_peaks():
    p = detect_peaks(RealSeries(sine(0.25, FS, 60.0), FS))
    assert abs(p.size - 15) <= 1
    np.testing.assert_allclose(np.diff(p), 4.0, atol=0.02)
    np.testing.assert_allclose(p, 1.0 + 4.0 * np.arange(p.size), atol=1e-3)


def test_constant_has_no_peaks():
    assert detect_peaks(RealSeries(np.full(1000, 3.0), FS)).size == 0


def test_ripple_is_suppressed():
    x = sine(0.25, FS, 60.0) + 0.1 * sine(2.0, FS, 60.0)
    p = detect_peaks(RealSeries(x, FS), PeakConfig(min_separation=1.5))
    assert abs(p.size - 15) <= 1
    np.testing.assert_allclose(np.diff(p), 4.0, atol=0.1)


def test_subsample_refinement():
    # peaks fall between samples; the parabola recovers them far better than a sample
    x = sine(0.3, FS, 30.0, phase=0.4)
    p = detect_peaks(RealSeries(x, FS))
    truth = (0.25 - 0.4 / (2 * np.pi)) / 0.3 + np.arange(p.size) / 0.3
    assert np.max(np.abs(p - truth)) < 2e-3


def test_short_signal_rejected():
    with pytest.raises(InvalidInput):
        detect_peaks(RealSeries(np.ones(300), FS), PeakConfig(min_separation=1.5))
    with pytest.raises(InvalidInput):
        detect_peaks(np.ones(1000))


def test_start_time_offsets_peaks():
    x = sine(0.25, FS, 30.0)
    a = detect_peaks(RealSeries(x, FS))
    b = detect_peaks(RealSeries(x, FS, start_time=12.5))
    np.testing.assert_allclose(b, a + 12.5)


@given(st.floats(1e-3, 1e3), st.integers(0, 1000))
def test_positive_scaling_keeps_peaks(c, seed):
    r = np.random.default_rng(seed)
    x = sine(0.25, FS, 40.0) + 0.2 * r.standard_normal(4000)
    a = detect_peaks(RealSeries(x, FS))
    b = detect_peaks(RealSeries(c * x, FS))
    np.testing.assert_allclose(b, a, atol=1e-9)


# --- intervals -----------------------------------------------------------------------


def test_interval_examples():
    est = intervals_from_peaks([0.0, 3.0, 6.0])
    np.testing.assert_array_equal(est.intervals, [3.0, 3.0])
    np.testing.assert_array_equal(est.rates, [20.0, 20.0])
    est = intervals_from_peaks([0.0, 4.0])
    np.testing.assert_array_equal(est.intervals, [4.0])
    np.testing.assert_array_equal(est.rates, [15.0])
    assert est.mean_rate == 15.0


def test_too_few_peaks():
    with pytest.raises(InsufficientPeaks):
        intervals_from_peaks([1.0])
    with pytest.raises(InsufficientPeaks):
        intervals_from_peaks([])


@given(st.integers(0, 2**31))
def test_intervals_match_pairwise_differences(seed):
    p = np.cumsum(np.random.default_rng(seed).uniform(0.5, 8.0, 100))
    est = intervals_from_peaks(p)
    assert est.intervals.tolist() == [p[i + 1] - p[i] for i in range(99)]
    assert est.rates.tolist() == [60.0 / (p[i + 1] - p[i]) for i in range(99)]


def test_estimate_validation():
    with pytest.raises(InvalidInput):
        RespiratoryEstimate(np.array([2.0, 1.0]), np.array([-1.0]), np.array([-60.0]))
    with pytest.raises(InvalidInput):
        RespiratoryEstimate(np.array([1.0, 2.0]), np.array([1.0, 1.0]), np.array([60.0]))


# --- matching ------------------------------------------------------------------------

REF = np.arange(10) * 4.0 + 1.0


def test_identical_trains():
    m = match_intervals(REF, REF)
    assert m.n_pairs == 9
    np.testing.assert_array_equal(m.est_intervals, m.ref_intervals)
    assert m.unmatched_reference == m.unmatched_estimate == 0
    assert m.pairs == tuple((j, j) for j in range(10))


def test_shifted_train():
    m = match_intervals(REF + 0.1, REF)
    assert m.n_pairs == 9
    np.testing.assert_allclose(m.est_intervals, m.ref_intervals, atol=1e-9)


def test_missing_interior_peak():
    est = np.delete(REF, 4)
    m = match_intervals(est, REF)
    assert m.unmatched_reference == 1
    assert 4 not in dict(m.pairs)
    assert m.n_pairs == 9 - 2


def test_extra_estimate_is_ignored():
    est = np.sort(np.r_[REF, 10.9])
    m = match_intervals(est, REF)
    assert m.n_pairs == 9
    assert m.unmatched_estimate == 1
    np.testing.assert_array_equal(m.est_intervals, m.ref_intervals)


def test_window_is_half_the_local_interval():
    ref = np.array([0.0, 4.0, 8.0, 12.0])
    assert match_intervals(np.array([0.0, 5.99, 8.0, 12.0]), ref).pairs == ((0, 0), (1, 1), (2, 2), (3, 3))
    m = match_intervals(np.array([0.0, 6.01, 8.0, 12.0]), ref)
    assert m.pairs == ((0, 0), (2, 2), (3, 3))
    assert m.n_pairs == 1
    # the window follows the mean of the two neighboring intervals: (2 + 6) / 2 / 2 = 2
    ref = np.array([0.0, 2.0, 8.0, 10.0])
    assert 1 in dict(match_intervals(np.array([0.0, 3.99, 8.0, 10.0]), ref).pairs)
    assert 1 not in dict(match_intervals(np.array([0.0, 4.01, 8.0, 10.0]), ref).pairs)


def test_one_to_one_greedy():
    # both estimates fall in reference 1's window; the nearer one wins it
    ref = np.array([0.0, 4.0, 8.0])
    m = match_intervals(np.array([0.0, 3.5, 4.2, 8.0]), ref)
    assert dict(m.pairs)[1] == 2
    assert m.unmatched_estimate == 1


def test_no_matches():
    with pytest.raises(NoMatches):
        match_intervals(np.array([100.0, 200.0]), REF)
    with pytest.raises(NoMatches):
        match_intervals(np.array([0.0, 6.01, 8.0]), np.array([0.0, 4.0, 8.0]))
    with pytest.raises(InvalidInput):
        match_intervals(np.array([]), REF)


def test_accepts_estimates():
    m = match_intervals(intervals_from_peaks(REF + 0.05), intervals_from_peaks(REF))
    assert isinstance(m, MatchResult) and m.n_pairs == 9


# --- metrics -------------------------------------------------------------------------


def test_perfect_pairs():
    rep = compute_metrics(np.array([[3.0, 3.0], [4.0, 4.0]]))
    assert (rep.rmse_rri, rep.mae_rr, rep.accuracy) == (0.0, 0.0, 1.0)
    assert rep.matched_count == 2


def test_hand_computed_errors():
    rep = compute_metrics(np.array([[3.1, 3.0], [2.7, 3.0]]))
    assert rep.rmse_rri == pytest.approx(math.sqrt((0.01 + 0.09) / 2), rel=1e-12)
    e1, e2 = abs(60 / 3.1 - 20), abs(60 / 2.7 - 20)
    assert rep.mae_rr == pytest.approx((e1 + e2) / 2, rel=1e-12)
    assert rep.accuracy == 0.5  # 0.645 bpm passes, 2.222 bpm does not


def test_tolerance_boundary_is_strict():
    # 60 / 1.875 = 32 and 60 / 2 = 30 exactly in binary floating point
    rep = compute_metrics(np.array([[2.0, 1.875]]), tolerance=2.0)
    assert rep.mae_rr == 2.0
    assert rep.accuracy == 0.0
    assert compute_metrics(np.array([[2.0, 1.875]]), tolerance=2.0 + 1e-12).accuracy == 1.0


@given(st.integers(0, 2**31))
def test_metrics_match_oracle(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(1, 60))
    ref = r.uniform(1.5, 10.0, n)
    est = ref + r.normal(0, 0.5, n).clip(-1.0, 1.0)
    tol = float(r.uniform(0.5, 4.0))
    rep = compute_metrics(np.column_stack([est, ref]), tol)
    rmse, mae, acc = metric_oracle(est, ref, tol)
    assert rep.rmse_rri == pytest.approx(rmse, rel=1e-12, abs=1e-15)
    assert rep.mae_rr == pytest.approx(mae, rel=1e-12, abs=1e-15)
    assert rep.accuracy == acc


@given(st.integers(0, 2**31), st.floats(-100, 100))
def test_time_shift_invariance(seed, shift):
    r = np.random.default_rng(seed)
    ref = np.cumsum(r.uniform(3.0, 5.0, 20))
    est = ref + r.normal(0, 0.2, 20)
    est.sort()
    a = compute_metrics(match_intervals(est, ref))
    b = compute_metrics(match_intervals(est + shift, ref + shift))
    assert b.matched_count == a.matched_count
    assert b.rmse_rri == pytest.approx(a.rmse_rri, abs=1e-9)
    assert b.mae_rr == pytest.approx(a.mae_rr, abs=1e-7)
    assert b.accuracy == a.accuracy


@given(st.integers(0, 2**31))
def test_accuracy_monotone_in_tolerance(seed):
    r = np.random.default_rng(seed)
    ref = r.uniform(2, 8, 30)
    pairs = np.column_stack([ref + r.normal(0, 0.4, 30).clip(-1, 1), ref])
    accs = [compute_metrics(pairs, t).accuracy for t in (0.0, 0.5, 1.0, 2.0, 5.0, 100.0)]
    assert accs == sorted(accs)


@given(st.integers(0, 2**31), st.booleans())
def test_zero_rmse_iff_equal(seed, equal):
    r = np.random.default_rng(seed)
    ref = r.uniform(2, 8, 10)
    est = ref.copy()
    if not equal:
        est[r.integers(10)] += 0.01
    assert (compute_metrics(np.column_stack([est, ref])).rmse_rri == 0.0) == equal


def test_metric_input_validation():
    with pytest.raises(InvalidInput):
        compute_metrics(np.empty((0, 2)))
    with pytest.raises(InvalidInput):
        compute_metrics(np.array([[1.0, -1.0]]))
    with pytest.raises(InvalidInput):
        compute_metrics(np.array([1.0, 2.0]))
    with pytest.raises(InvalidInput):
        compute_metrics(np.array([[1.0, 1.0]]), tolerance=-1)


def test_report_serializes():
    m = match_intervals(np.delete(REF, 4), REF)
    d = compute_metrics(m).to_dict()
    assert d["unmatched_reference"] == 1
    assert d["matched_count"] == 7
    assert set(d) >= {"rmse_rri", "mae_rr", "accuracy", "tolerance"}
