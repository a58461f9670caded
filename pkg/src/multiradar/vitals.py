"""Breath detection, interval matching and respiration accuracy metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .errors import InsufficientPeaks, InvalidInput, NoMatches
from .sigproc import RealSeries

__all__ = [
    "PeakConfig",
    "RespiratoryEstimate",
    "MatchResult",
    "MetricReport",
    "detect_peaks",
    "intervals_from_peaks",
    "match_intervals",
    "compute_metrics",
    "DEFAULT_TOLERANCE_BPM",
]

DEFAULT_TOLERANCE_BPM = 2.0


@dataclass(frozen=True)
class PeakConfig:
    """Peak picking thresholds.

    ``min_separation`` is in seconds (1.5 s caps the detectable rate at
    40 bpm). ``min_prominence`` is a multiple of the signal's standard
    deviation, which makes detection invariant to positive rescaling.
    """

    min_separation: float = 1.5
    min_prominence: float = 0.3

    def __post_init__(self):
        if not (np.isfinite(self.min_separation) and self.min_separation > 0):
            raise InvalidInput(f"min_separation must be > 0, got {self.min_separation}")
        if not (np.isfinite(self.min_prominence) and self.min_prominence >= 0):
            raise InvalidInput(f"min_prominence must be >= 0, got {self.min_prominence}")


@dataclass(frozen=True)
class RespiratoryEstimate:
    """Peak times (s) with the intervals between them (s) and per-interval rates (bpm)."""

    peak_times: np.ndarray
    intervals: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.peak_times, dtype=float)
        if p.ndim != 1 or not np.all(np.isfinite(p)):
            raise InvalidInput("peak_times must be a finite 1-D array")
        if np.any(np.diff(p) <= 0):
            raise InvalidInput("peak_times must be strictly increasing")
        y = np.asarray(self.intervals, dtype=float)
        nu = np.asarray(self.rates, dtype=float)
        if y.shape != (max(p.size - 1, 0),) or nu.shape != y.shape:
            raise InvalidInput("intervals and rates must have one entry per consecutive peak pair")
        for name, a in (("peak_times", p), ("intervals", y), ("rates", nu)):
            a = a.copy()
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @property
    def mean_rate(self):
        return float(np.mean(self.rates)) if self.rates.size else float("nan")


@dataclass(frozen=True)
class MatchResult:
    """Paired intervals ``(estimated, reference)`` plus bookkeeping.

    ``pairs`` lists ``(reference_index, estimate_index)`` peak matches in
    reference order.
    """

    est_intervals: np.ndarray
    ref_intervals: np.ndarray
    pairs: tuple
    unmatched_reference: int
    unmatched_estimate: int

    @property
    def n_pairs(self):
        return int(self.ref_intervals.size)


@dataclass(frozen=True)
class MetricReport:
    """Interval RMSE (s), rate MAE (bpm) and the fraction of intervals within tolerance."""

    rmse_rri: float
    mae_rr: float
    accuracy: float
    tolerance: float
    matched_count: int
    unmatched_reference: int = 0
    unmatched_estimate: int = 0

    def to_dict(self):
        return dict(self.__dict__)


def detect_peaks(signal: RealSeries, cfg: PeakConfig = PeakConfig()) -> np.ndarray:
    """Times of breath peaks in ``signal``, refined to sub-sample precision.

    Local maxima must rise at least ``cfg.min_prominence * std(signal)``
    above their surroundings; when two are closer than
    ``cfg.min_separation`` the higher one wins. Each surviving index is moved
    to the vertex of the parabola through it and its two neighbors.
    """
    if not isinstance(signal, RealSeries):
        raise InvalidInput(f"expected RealSeries, got {type(signal).__name__}")
    x = signal.samples
    fs = signal.sample_rate
    if not x.size > 2 * cfg.min_separation * fs:
        raise InvalidInput(
            f"signal of {x.size} samples is too short for min_separation {cfg.min_separation} s"
        )
    sd = float(np.std(x))
    if sd == 0.0:
        return np.empty(0)
    distance = max(1, int(np.ceil(cfg.min_separation * fs - 1e-9)))
    idx, _ = find_peaks(x, prominence=cfg.min_prominence * sd, distance=distance)
    if idx.size == 0:
        return np.empty(0)
    y0, y1, y2 = x[idx - 1], x[idx], x[idx + 1]
    denom = y0 - 2 * y1 + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(denom < 0, 0.5 * (y0 - y2) / denom, 0.0)
    delta = np.clip(delta, -0.5, 0.5)
    return signal.start_time + (idx + delta) / fs


def intervals_from_peaks(peak_times) -> RespiratoryEstimate:
    """Intervals ``y = diff(peaks)`` and rates ``60 / y``.

    >>> intervals_from_peaks([0.0, 3.0, 6.0]).rates
    array([20., 20.])
    """
    p = np.asarray(peak_times, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise InsufficientPeaks(f"need at least 2 peaks, got {p.size}")
    y = np.diff(p)
    return RespiratoryEstimate(p, y, 60.0 / y)


def _peak_times(x):
    if isinstance(x, RespiratoryEstimate):
        return x.peak_times
    p = np.asarray(x, dtype=float)
    if p.ndim != 1 or np.any(np.diff(p) <= 0):
        raise InvalidInput("peak times must be a strictly increasing 1-D array")
    return p


def match_intervals(est, ref) -> MatchResult:
    """Pair estimated breaths with reference breaths and collect interval pairs.

    Each reference peak accepts estimated peaks within half the mean of its
    adjacent reference intervals. Matching is one-to-one, greedy in order of
    increasing time distance. An interval pair is formed for every two
    consecutive reference peaks that are both matched, so a missed breath
    removes the two intervals that touch it.

    Parameters
    ----------
    est, ref : RespiratoryEstimate or array_like of peak times
    """
    e = _peak_times(est)
    r = _peak_times(ref)
    if e.size == 0 or r.size == 0:
        raise InvalidInput("both peak trains must be non-empty")
    if r.size < 2:
        raise NoMatches("reference needs at least 2 peaks to define a matching window")
    ry = np.diff(r)
    local = np.empty(r.size)
    local[0], local[-1] = ry[0], ry[-1]
    local[1:-1] = 0.5 * (ry[:-1] + ry[1:])
    half = 0.5 * local

    cand = []
    for j in range(r.size):
        lo = np.searchsorted(e, r[j] - half[j], side="left")
        hi = np.searchsorted(e, r[j] + half[j], side="right")
        for i in range(lo, hi):
            cand.append((abs(e[i] - r[j]), j, i))
    cand.sort()
    ref_to_est = {}
    used = set()
    for _, j, i in cand:
        if j in ref_to_est or i in used:
            continue
        ref_to_est[j] = i
        used.add(i)
    if not ref_to_est:
        raise NoMatches("no estimated peak falls inside any reference window")

    est_y, ref_y = [], []
    for j in range(r.size - 1):
        if j in ref_to_est and j + 1 in ref_to_est:
            est_y.append(e[ref_to_est[j + 1]] - e[ref_to_est[j]])
            ref_y.append(r[j + 1] - r[j])
    if not ref_y:
        raise NoMatches("no two consecutive reference peaks were both matched")
    pairs = tuple(sorted(ref_to_est.items()))
    return MatchResult(
        est_intervals=np.asarray(est_y),
        ref_intervals=np.asarray(ref_y),
        pairs=pairs,
        unmatched_reference=int(r.size - len(ref_to_est)),
        unmatched_estimate=int(e.size - len(ref_to_est)),
    )


def compute_metrics(pairs, tolerance: float = DEFAULT_TOLERANCE_BPM) -> MetricReport:
    """RMSE of intervals, MAE of rates and the accuracy fraction.

    An interval counts as accurate when its rate error is strictly below
    ``tolerance`` bpm.

    Parameters
    ----------
    pairs : MatchResult or array_like, shape (N, 2)
        Columns are (estimated interval, reference interval) in seconds.
    tolerance : float
        Rate tolerance in bpm.
    """
    unmatched_r = unmatched_e = 0
    if isinstance(pairs, MatchResult):
        est_y, ref_y = pairs.est_intervals, pairs.ref_intervals
        unmatched_r, unmatched_e = pairs.unmatched_reference, pairs.unmatched_estimate
    else:
        a = np.asarray(pairs, dtype=float)
        if a.ndim != 2 or a.shape[1] != 2:
            raise InvalidInput(f"pairs must have shape (N, 2), got {a.shape}")
        est_y, ref_y = a[:, 0], a[:, 1]
    if est_y.size < 1:
        raise InvalidInput("need at least one interval pair")
    if np.any(est_y <= 0) or np.any(ref_y <= 0) or not np.all(np.isfinite(est_y + ref_y)):
        raise InvalidInput("intervals must be finite and positive")
    if not (np.isfinite(tolerance) and tolerance >= 0):
        raise InvalidInput(f"tolerance must be >= 0, got {tolerance}")
    rate_err = np.abs(60.0 / est_y - 60.0 / ref_y)
    return MetricReport(
        rmse_rri=float(np.sqrt(np.mean((est_y - ref_y) ** 2))),
        mae_rr=float(np.mean(rate_err)),
        accuracy=float(np.count_nonzero(rate_err < tolerance) / rate_err.size),
        tolerance=float(tolerance),
        matched_count=int(est_y.size),
        unmatched_reference=int(unmatched_r),
        unmatched_estimate=int(unmatched_e),
    )
