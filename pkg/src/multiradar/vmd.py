"""Variational mode decomposition.

The solver works on the one-sided spectrum of the (mirror-extended) signal
and alternates three updates until the modes stop moving:

* each mode spectrum is the Wiener-filtered residual
  ``(X - sum_{i!=k} U_i + Lambda/2) / (1 + 2*alpha*(omega - omega_k)**2)``;
* each center frequency is the power-weighted centroid of its mode;
* the dual spectrum ascends along the reconstruction error with step ``eta``.

The same routine handles one channel or many. With several channels every
mode keeps a single center frequency whose centroid pools all channels, which
is what :mod:`multiradar.mvmd` exposes; :func:`vmd_decompose` is the
one-channel case of that code path.

Frequencies inside the solver are normalized to rad/sample so that ``alpha``
is dimensionless and behaves the same at any sample rate. Center frequencies
are reported in rad/s.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .sigproc import RealSeries, Spectrum

__all__ = [
    "VmdConfig",
    "ModeSet",
    "vmd_decompose",
    "update_mode_spectrum",
    "update_center_frequency",
]

log = logging.getLogger(__name__)

_EPS = 1e-12
_SWEEPS = ("gauss-seidel", "jacobi")


@dataclass(frozen=True)
class VmdConfig:
    """Solver settings shared by VMD and MVMD.

    Parameters
    ----------
    K : int
        Number of modes.
    alpha : float
        Bandwidth penalty; larger values give narrower modes.
    eta : float
        Dual ascent step. ``0`` drops the exact-reconstruction constraint,
        which is the usual choice for noisy data.
    tol : float
        Stop when the summed relative mode increment falls below this.
    max_iter : int
        Iteration cap.
    init : str or sequence of float
        ``"uniform"`` spreads the initial centers over ``(0, fs/4]`` Hz,
        ``"spectral-peaks"`` starts at the K strongest spectral peaks, and a
        sequence gives explicit starting frequencies in Hz.
    boundary : bool
        Mirror-extend the input by half its length on each side.
    sweep : {"gauss-seidel", "jacobi"}
        Order of the per-mode updates within one iteration. Gauss-Seidel
        feeds each freshly updated mode into the next; Jacobi updates all
        modes from the previous iterate and can oscillate when two centers
        coincide.
    centroid_channel : int or None
        ``None`` pools every channel in the center-frequency update; an
        index restricts the centroid to that channel.
    """

    K: int = 3
    alpha: float = 2000.0
    eta: float = 0.1
    tol: float = 1e-7
    max_iter: int = 500
    init: object = "uniform"
    boundary: bool = True
    sweep: str = "gauss-seidel"
    centroid_channel: int | None = None

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise InvalidInput(f"K must be a positive integer, got {self.K}")
        if not self.alpha > 0:
            raise InvalidInput(f"alpha must be > 0, got {self.alpha}")
        if not self.eta >= 0:
            raise InvalidInput(f"eta must be >= 0, got {self.eta}")
        if not self.tol > 0:
            raise InvalidInput(f"tol must be > 0, got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InvalidInput(f"max_iter must be >= 1, got {self.max_iter}")
        if self.sweep not in _SWEEPS:
            raise InvalidInput(f"sweep must be one of {_SWEEPS}, got {self.sweep!r}")
        if isinstance(self.init, str):
            if self.init not in ("uniform", "spectral-peaks"):
                raise InvalidInput(f"unknown init policy {self.init!r}")
        else:
            freqs = tuple(float(f) for f in self.init)
            if len(freqs) != self.K:
                raise InvalidInput(f"init lists {len(freqs)} frequencies for K={self.K}")
            if any(not (np.isfinite(f) and f >= 0) for f in freqs):
                raise InvalidInput("explicit init frequencies must be finite and >= 0")
            object.__setattr__(self, "init", freqs)
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "max_iter", int(self.max_iter))

    def replace(self, **changes):
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return VmdConfig(**kw)


@dataclass(frozen=True)
class ModeSet:
    """Result of :func:`vmd_decompose`.

    ``modes`` has shape ``(K, N)`` and is ordered by ascending
    ``center_freqs`` (rad/s). ``residual`` is defined as the input minus the
    sum of the modes.
    """

    modes: np.ndarray
    center_freqs: np.ndarray
    residual: np.ndarray
    sample_rate: float
    iterations_used: int
    converged: bool
    start_time: float = 0.0

    @property
    def K(self):
        return self.modes.shape[0]

    @property
    def center_freqs_hz(self):
        return self.center_freqs / (2 * np.pi)

    def mode(self, k):
        return RealSeries(self.modes[k], self.sample_rate, self.start_time)


def update_mode_spectrum(residual_spectrum, dual_spectrum, alpha, omega_k):
    """Wiener-filter update of one mode spectrum.

    ``residual_spectrum`` must already exclude mode ``k``. Returns
    ``(residual + dual/2) / (1 + 2*alpha*(omega - omega_k)**2)`` bin by bin,
    with ``omega`` taken from the spectrum's own grid.
    """
    if not residual_spectrum.same_grid(dual_spectrum):
        raise InvalidInput("residual and dual spectra are on different bin grids")
    if residual_spectrum.bins.shape != dual_spectrum.bins.shape:
        raise InvalidInput(
            f"spectrum shapes differ: {residual_spectrum.bins.shape} vs {dual_spectrum.bins.shape}"
        )
    w = residual_spectrum.frequencies
    gain = 1.0 / (1.0 + 2.0 * alpha * (w - omega_k) ** 2)
    bins = (residual_spectrum.bins + dual_spectrum.bins / 2) * gain
    return Spectrum(bins, residual_spectrum.bin_spacing, residual_spectrum.one_sided)


def update_center_frequency(mode_spectrum, previous=None):
    """Power-weighted centroid of the non-negative frequency bins.

    Leading axes of ``mode_spectrum.bins`` (channels) are pooled: their
    per-channel numerators and denominators are summed with ``math.fsum``,
    so the result does not depend on channel order. When the spectrum holds
    no energy the ``previous`` center is returned unchanged.
    """
    w = mode_spectrum.frequencies
    keep = w >= 0
    p = np.abs(mode_spectrum.bins[..., keep]) ** 2
    p = p.reshape(-1, p.shape[-1])
    num = math.fsum((p @ w[keep]).tolist())
    den = math.fsum(p.sum(axis=1).tolist())
    if den > 0:
        return num / den
    if previous is None:
        raise InvalidInput("mode spectrum has no energy and no previous center was given")
    log.debug("zero-energy mode; keeping center frequency %g", previous)
    return float(previous)


def _mirror(x):
    n = x.shape[-1]
    h = n // 2
    return np.concatenate([x[..., :h][..., ::-1], x, x[..., h:][..., ::-1]], axis=-1), h


def _parseval_weights(n_bins, length):
    wts = np.full(n_bins, 2.0)
    wts[0] = 1.0
    if length % 2 == 0:
        wts[-1] = 1.0
    return wts / length


def _initial_centers(X, cfg, fs, dw):
    K = cfg.K
    uniform = np.arange(1, K + 1) / K * (np.pi / 2)
    if isinstance(cfg.init, tuple):
        return 2 * np.pi * np.asarray(cfg.init) / fs
    if cfg.init == "uniform":
        return uniform
    n_bins = X.shape[-1]
    power = (np.abs(X) ** 2).reshape(-1, n_bins).sum(axis=0)
    left = np.concatenate([[-np.inf], power[:-1]])
    right = np.concatenate([power[1:], [-np.inf]])
    peaks = np.flatnonzero((power > left) & (power >= right) & (power > 0))
    peaks = peaks[np.argsort(-power[peaks], kind="stable")][:K]
    centers = list(peaks * dw)
    for u in uniform:
        if len(centers) >= K:
            break
        if not np.any(np.isclose(centers, u)):
            centers.append(u)
    return np.sort(np.asarray(centers[:K], dtype=float))


def _decompose(x, fs, cfg):
    """Core solver on a ``(C, N)`` array; returns modes ``(K, C, N)``, centers in rad/s, duals, iterations, converged."""
    C, N = x.shape
    K = cfg.K
    if N < 8 * K:
        raise InvalidInput(f"signal length {N} is shorter than 8*K = {8 * K}")
    if not np.all(np.isfinite(x)):
        raise InvalidInput("input contains non-finite values")
    if cfg.centroid_channel is not None and not 0 <= cfg.centroid_channel < C:
        raise InvalidInput(f"centroid_channel {cfg.centroid_channel} out of range for C={C}")

    if cfg.boundary:
        f, h = _mirror(x)
    else:
        f, h = x, 0
    T = f.shape[-1]
    X = np.fft.rfft(f, axis=-1)
    n_bins = X.shape[-1]
    dw = 2 * np.pi / T
    wts = _parseval_weights(n_bins, T)

    omega = _initial_centers(X, cfg, fs, dw).astype(float)
    U = np.zeros((K, C, n_bins), dtype=complex)
    lam = np.zeros((C, n_bins), dtype=complex)
    lam_spec = Spectrum(lam, dw)
    converged = False
    n_iter = 0
    for n_iter in range(1, cfg.max_iter + 1):
        U_prev = U.copy()
        total_prev = U_prev.sum(axis=0)
        for k in range(K):
            if cfg.sweep == "jacobi":
                others = total_prev - U_prev[k]
            else:
                others = U[:k].sum(axis=0) + U_prev[k + 1 :].sum(axis=0)
            uk = update_mode_spectrum(Spectrum(X - others, dw), lam_spec, cfg.alpha, omega[k])
            U[k] = uk.bins
        for k in range(K):
            sel = U[k] if cfg.centroid_channel is None else U[k, cfg.centroid_channel]
            omega[k] = update_center_frequency(Spectrum(sel, dw), previous=omega[k])
        if cfg.eta > 0:
            lam = lam + cfg.eta * (X - U.sum(axis=0))
            lam_spec = Spectrum(lam, dw)
        inc = (np.abs(U - U_prev) ** 2) @ wts
        ref = (np.abs(U_prev) ** 2) @ wts
        crit = math.fsum((inc / (ref + _EPS)).ravel().tolist())
        if crit < cfg.tol:
            converged = True
            break

    order = np.argsort(omega, kind="stable")
    modes = np.fft.irfft(U[order], n=T, axis=-1)[..., h : h + N]
    duals = np.fft.irfft(lam, n=T, axis=-1)[..., h : h + N]
    return modes, omega[order] * fs, duals, n_iter, converged


def vmd_decompose(x: RealSeries, cfg: VmdConfig = VmdConfig()) -> ModeSet:
    """Split one real series into ``cfg.K`` narrowband modes.

    Examples
    --------
    >>> import numpy as np
    >>> t = np.arange(6000) / 100
    >>> x = RealSeries(np.sin(2 * np.pi * 0.25 * t), 100.0)
    >>> ms = vmd_decompose(x, VmdConfig(K=1))
    >>> round(float(ms.center_freqs_hz[0]), 2)
    0.25
    """
    if not isinstance(x, RealSeries):
        raise InvalidInput(f"expected RealSeries, got {type(x).__name__}")
    data = x.samples[None, :]
    modes, omega, _, n_iter, converged = _decompose(data, x.sample_rate, cfg)
    modes = modes[:, 0, :]
    residual = x.samples - modes.sum(axis=0)
    return ModeSet(
        modes=modes,
        center_freqs=omega,
        residual=residual,
        sample_rate=x.sample_rate,
        iterations_used=n_iter,
        converged=converged,
        start_time=x.start_time,
    )
