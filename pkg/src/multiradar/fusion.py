"""Combine the respiratory modes of several radars into one waveform.

The chain picks the mode whose shared center frequency sits closest to the
expected breathing rate, takes the strongest channel as the timing
reference, shifts every other channel onto it, and projects the aligned
channels onto the leading eigenvector of their correlation matrix.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, NoRespiratoryMode
from .mvmd import MultiChannelSeries, mvmd_decompose
from .sigproc import RealSeries, fractional_shift, hermitian_eig
from .vmd import VmdConfig

__all__ = [
    "FusionConfig",
    "FusedSignal",
    "Alignment",
    "PcaResult",
    "select_respiratory_mode",
    "pick_reference_channel",
    "align_channels",
    "integrate_pca",
    "fuse",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FusionConfig:
    """Fusion settings.

    Parameters
    ----------
    f_rr : float
        Expected breathing frequency in Hz.
    max_align_lag : float
        Largest inter-channel delay searched, in seconds. It is further
        limited to just under a quarter of the record.
    respiratory_band : (float, float)
        The selected mode must have its center inside this band (Hz).
    remove_mean : bool
        Subtract each channel's mean before decomposition. Unwrapped radar
        phase carries an arbitrary offset that would otherwise need a mode of
        its own.
    """

    f_rr: float = 0.30
    max_align_lag: float = 5.0
    respiratory_band: tuple = (0.1, 0.7)
    remove_mean: bool = True

    def __post_init__(self):
        lo, hi = (float(v) for v in self.respiratory_band)
        if not lo < self.f_rr < hi:
            raise InvalidInput(f"need f_lo < f_rr < f_hi, got {lo} < {self.f_rr} < {hi}")
        if not self.max_align_lag > 0:
            raise InvalidInput(f"max_align_lag must be > 0, got {self.max_align_lag}")
        object.__setattr__(self, "respiratory_band", (lo, hi))

    def replace(self, **changes):
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return FusionConfig(**kw)


@dataclass(frozen=True)
class Alignment:
    """Aligned channels, their delays in seconds and zero-power flags."""

    aligned: MultiChannelSeries
    lags: np.ndarray
    flagged: tuple


@dataclass(frozen=True)
class PcaResult:
    upsilon: RealSeries
    weights: np.ndarray
    eigenvalues: np.ndarray
    correlation: np.ndarray


@dataclass(frozen=True)
class FusedSignal:
    """Integrated respiratory waveform and the decisions that produced it.

    ``selected_mode`` and ``reference_channel`` are 0-based indices.
    ``lags`` are per-channel delays in seconds relative to the reference.
    """

    upsilon: RealSeries
    weights: np.ndarray
    reference_channel: int
    lags: np.ndarray
    selected_mode: int
    eigenvalues: np.ndarray
    center_freqs: np.ndarray
    channel_ids: tuple = ()
    flagged: tuple = ()
    converged: bool = True

    def metadata(self):
        return {
            "channel_ids": list(self.channel_ids),
            "weights": [float(w) for w in self.weights],
            "eigenvalues": [float(s) for s in self.eigenvalues],
            "lags_s": [float(t) for t in self.lags],
            "reference_channel": int(self.reference_channel),
            "selected_mode": int(self.selected_mode),
            "center_freqs_hz": [float(w / (2 * np.pi)) for w in self.center_freqs],
            "flagged_channels": list(self.flagged),
            "converged": bool(self.converged),
        }


def select_respiratory_mode(center_freqs, cfg: FusionConfig = FusionConfig()) -> int:
    """Index of the mode nearest ``2*pi*f_rr``; ties go to the lower frequency.

    >>> import numpy as np
    >>> select_respiratory_mode(2 * np.pi * np.array([0.05, 0.30, 1.20]))
    1
    """
    w = np.atleast_1d(np.asarray(center_freqs, dtype=float))
    if w.size < 1:
        raise InvalidInput("need at least one center frequency")
    target = 2 * np.pi * cfg.f_rr
    dist = np.abs(w - target)
    best = dist.min()
    tied = np.flatnonzero(np.isclose(dist, best, rtol=1e-9, atol=1e-12 * target))
    k = int(tied[np.argmin(w[tied])])
    f = w[k] / (2 * np.pi)
    lo, hi = cfg.respiratory_band
    if not lo <= f <= hi:
        raise NoRespiratoryMode(
            f"closest mode is at {f:.4g} Hz, outside the respiratory band [{lo}, {hi}] Hz"
        )
    return k


def _as_multichannel(imfs):
    if isinstance(imfs, MultiChannelSeries):
        return imfs
    if isinstance(imfs, RealSeries):
        return MultiChannelSeries.from_series([imfs])
    return MultiChannelSeries.from_series(imfs)


def pick_reference_channel(imfs) -> int:
    """Channel with the largest mean square; ties go to the lowest index."""
    x = _as_multichannel(imfs).data
    return int(np.argmax(np.mean(x * x, axis=1)))


def _coherent_lag(ref, sig, max_lag):
    """Fractional lag (samples) maximizing the normalized correlation of ``ref`` and ``sig``.

    Each lag's overlap sum is divided by the overlap energies, so shrinking
    overlaps at large lags do not pull the peak toward zero. The integer
    peak follows the same tie rule as :func:`xcorr_peak_lag` and is refined
    by the vertex of a parabola through its neighbors.
    """
    a, b = ref, sig
    ea = np.concatenate(([0.0], np.cumsum(a * a)))
    eb = np.concatenate(([0.0], np.cumsum(b * b)))
    n = a.size
    lags = np.arange(-max_lag, max_lag + 1)
    rho = np.empty(lags.size)
    for i, lag in enumerate(lags):
        if lag >= 0:
            m = min(n, b.size - lag)
            num = np.dot(a[:m], b[lag : lag + m])
            den = np.sqrt(ea[m] * (eb[lag + m] - eb[lag]))
        else:
            m = min(n + lag, b.size)
            num = np.dot(a[-lag : -lag + m], b[:m])
            den = np.sqrt((ea[-lag + m] - ea[-lag]) * eb[m])
        rho[i] = num / den if den > 0 else 0.0
    # exact periodicity makes distant lags equal to round-off; treat those as ties
    tied = lags[rho >= rho.max() - 1e-12]
    k = int(tied[np.lexsort((tied > 0, np.abs(tied)))[0]])
    i = k + max_lag
    if 0 < i < lags.size - 1:
        lo, mid, hi = rho[i - 1], rho[i], rho[i + 1]
        den = lo - 2 * mid + hi
        if den < 0:
            return k + float(np.clip(0.5 * (lo - hi) / den, -0.5, 0.5))
    return float(k)


def align_channels(imfs, c0: int, cfg: FusionConfig = FusionConfig()) -> Alignment:
    """Delay-compensate every channel against channel ``c0``.

    The delay of channel ``c`` is the peak of the overlap-normalized
    cross-correlation of ``(ref=c0, sig=c)`` (positive when ``c`` lags),
    refined to a fraction of a sample, and the channel is advanced by that
    amount with a circular frequency-domain shift.
    Channels with zero power are passed through with lag 0 and flagged.
    """
    x = _as_multichannel(imfs)
    C, N = x.data.shape
    if not 0 <= c0 < C:
        raise InvalidInput(f"reference channel {c0} out of range for {C} channels")
    fs = x.sample_rate
    duration = N / fs
    max_lag = int(np.floor(cfg.max_align_lag * fs))
    max_lag = min(max_lag, int(np.ceil(duration / 4 * fs)) - 1, N - 1)
    max_lag = max(max_lag, 0)
    ref = x.channel(c0)
    out = np.array(x.data)
    lags = np.zeros(C)
    flagged = []
    for c in range(C):
        if c == c0:
            continue
        u = x.channel(c)
        if not np.any(u.samples):
            flagged.append(c)
            log.warning("channel %s has zero power; passed through unaligned", x.channel_ids[c])
            continue
        tau = _coherent_lag(ref.samples, u.samples, max_lag) / fs
        if not abs(tau) < duration / 4:
            tau = np.trunc(tau * fs) / fs
        shifted = fractional_shift(u, -tau) if tau else u
        lags[c] = tau
        out[c] = shifted.samples
    aligned = MultiChannelSeries(out, fs, x.channel_ids, x.start_time)
    return Alignment(aligned, lags, tuple(flagged))


def integrate_pca(aligned, c0: int = 0) -> PcaResult:
    """First principal component of the aligned channels.

    ``R`` is the mean of outer products of the raw channel vectors (no
    centering or scaling). The projection ``v1 @ u`` is sign-fixed so that
    it correlates non-negatively with channel ``c0``.
    """
    x = _as_multichannel(aligned)
    U = x.data
    C, N = U.shape
    if not 0 <= c0 < C:
        raise InvalidInput(f"reference channel {c0} out of range for {C} channels")
    R = U @ U.T / N
    R = 0.5 * (R + R.T)
    sigma, V = hermitian_eig(R)
    v1 = V[:, 0].copy()
    ups = v1 @ U
    if np.dot(ups, U[c0]) < 0:
        v1 = -v1
        ups = -ups
    return PcaResult(RealSeries(ups, x.sample_rate, x.start_time), v1, sigma, R)


def fuse(displacements, vmd_cfg: VmdConfig = VmdConfig(), fusion_cfg: FusionConfig = FusionConfig()) -> FusedSignal:
    """Run decomposition, mode selection, alignment and PCA integration.

    With a single channel the result is the selected mode itself.
    """
    x = _as_multichannel(displacements)
    data = x.data
    if fusion_cfg.remove_mean:
        data = data - data.mean(axis=1, keepdims=True)
        x = MultiChannelSeries(data, x.sample_rate, x.channel_ids, x.start_time)
    ms = mvmd_decompose(x, vmd_cfg)
    k = select_respiratory_mode(ms.center_freqs, fusion_cfg)
    imfs = MultiChannelSeries(ms.modes[k], x.sample_rate, x.channel_ids, x.start_time)
    c0 = pick_reference_channel(imfs)
    al = align_channels(imfs, c0, fusion_cfg)
    pca = integrate_pca(al.aligned, c0)
    return FusedSignal(
        upsilon=pca.upsilon,
        weights=pca.weights,
        reference_channel=c0,
        lags=al.lags,
        selected_mode=k,
        eigenvalues=pca.eigenvalues,
        center_freqs=ms.center_freqs,
        channel_ids=x.channel_ids,
        flagged=al.flagged,
        converged=ms.converged,
    )
