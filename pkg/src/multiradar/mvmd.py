"""Multivariate VMD: one set of center frequencies shared by every channel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .sigproc import RealSeries
from .vmd import VmdConfig, _decompose

__all__ = ["MultiChannelSeries", "MultiModeSet", "mvmd_decompose"]


@dataclass(frozen=True)
class MultiChannelSeries:
    """``C`` equally long real channels sampled at a common rate.

    Parameters
    ----------
    data : array_like, shape (C, N)
    sample_rate : float
        Hz.
    channel_ids : sequence of str, optional
        Labels, default ``"0", "1", ...``.
    start_time : float, optional
    """

    data: np.ndarray
    sample_rate: float
    channel_ids: tuple = ()
    start_time: float = 0.0

    def __post_init__(self):
        d = np.array(self.data, dtype=float, copy=True)
        if d.ndim == 1:
            d = d[None, :]
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 2:
            raise InvalidInput(f"expected a (C, N) array with N >= 2, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise InvalidInput("channel data must be finite")
        if not (np.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise InvalidInput(f"sample_rate must be > 0, got {self.sample_rate}")
        ids = tuple(str(i) for i in self.channel_ids) or tuple(str(i) for i in range(d.shape[0]))
        if len(ids) != d.shape[0]:
            raise InvalidInput(f"{len(ids)} channel ids for {d.shape[0]} channels")
        d.flags.writeable = False
        object.__setattr__(self, "data", d)
        object.__setattr__(self, "channel_ids", ids)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        object.__setattr__(self, "start_time", float(self.start_time))

    @classmethod
    def from_series(cls, series, channel_ids=()):
        series = list(series)
        if not series:
            raise InvalidInput("need at least one channel")
        fs = series[0].sample_rate
        n = len(series[0])
        for s in series[1:]:
            if len(s) != n:
                raise InvalidInput(f"channel lengths differ: {n} vs {len(s)}")
            if not np.isclose(s.sample_rate, fs, rtol=1e-12, atol=0.0):
                raise InvalidInput(f"channel sample rates differ: {fs} vs {s.sample_rate}")
        return cls(np.stack([s.samples for s in series]), fs, channel_ids, series[0].start_time)

    @property
    def n_channels(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[1]

    @property
    def times(self):
        return self.start_time + np.arange(self.n_samples) / self.sample_rate

    def channel(self, c):
        return RealSeries(self.data[c], self.sample_rate, self.start_time)

    def select(self, indices):
        indices = list(indices)
        return MultiChannelSeries(
            self.data[indices],
            self.sample_rate,
            tuple(self.channel_ids[i] for i in indices),
            self.start_time,
        )


@dataclass(frozen=True)
class MultiModeSet:
    """Result of :func:`mvmd_decompose`.

    ``modes`` has shape ``(K, C, N)``. There is exactly one center frequency
    per mode (``center_freqs``, rad/s, ascending); no per-channel frequency
    exists. ``duals`` holds the final Lagrange multipliers in the time
    domain, shape ``(C, N)``.
    """

    modes: np.ndarray
    center_freqs: np.ndarray
    duals: np.ndarray
    sample_rate: float
    iterations_used: int
    converged: bool
    channel_ids: tuple = ()
    residuals: np.ndarray | None = None
    start_time: float = 0.0

    @property
    def K(self):
        return self.modes.shape[0]

    @property
    def n_channels(self):
        return self.modes.shape[1]

    @property
    def center_freqs_hz(self):
        return self.center_freqs / (2 * np.pi)

    def reconstruction_error(self):
        """Per-channel ``||x_c - sum_k u_kc|| / ||x_c||`` (``inf`` for an all-zero channel with a non-zero residual)."""
        res = np.linalg.norm(self.residuals, axis=1)
        sig = np.linalg.norm(self.residuals + self.modes.sum(axis=0), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(sig > 0, res / np.where(sig > 0, sig, 1.0), np.where(res > 0, np.inf, 0.0))
        return out

    def mode(self, k, c):
        return RealSeries(self.modes[k, c], self.sample_rate, self.start_time)


def mvmd_decompose(x: MultiChannelSeries, cfg: VmdConfig = VmdConfig()) -> MultiModeSet:
    """Jointly decompose all channels into ``cfg.K`` modes with shared center frequencies.

    Mode spectra are updated per channel with the common ``omega_k``; the
    center update pools the mode power of every channel (or a single channel
    when ``cfg.centroid_channel`` is set). With one channel this is exactly
    :func:`multiradar.vmd.vmd_decompose`.
    """
    if isinstance(x, RealSeries):
        x = MultiChannelSeries(x.samples[None, :], x.sample_rate, start_time=x.start_time)
    if not isinstance(x, MultiChannelSeries):
        raise InvalidInput(f"expected MultiChannelSeries, got {type(x).__name__}")
    modes, omega, duals, n_iter, converged = _decompose(np.asarray(x.data), x.sample_rate, cfg)
    residuals = np.asarray(x.data) - modes.sum(axis=0)
    return MultiModeSet(
        modes=modes,
        center_freqs=omega,
        duals=duals,
        sample_rate=x.sample_rate,
        iterations_used=n_iter,
        converged=converged,
        channel_ids=x.channel_ids,
        residuals=residuals,
        start_time=x.start_time,
    )
