"""Shared DSP primitives.

Series containers, the analytic signal, phase unwrapping, lag search,
frequency-domain shifting, a small Hermitian eigensolver and the Taylor
taper. Every function here is pure and returns new arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput

__all__ = [
    "RealSeries",
    "ComplexSeries",
    "Spectrum",
    "HermitianMatrix",
    "hilbert",
    "unwrap_phase",
    "xcorr_peak_lag",
    "fractional_shift",
    "hermitian_eig",
    "taylor_window",
    "TAYLOR_NBAR",
    "TAYLOR_SIDELOBE_DB",
]

TAYLOR_NBAR = 4
TAYLOR_SIDELOBE_DB = -30.0

_MAX_EIG_DIM = 64


def _frozen(a):
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class RealSeries:
    """Uniformly sampled real signal.

    Parameters
    ----------
    samples : array_like
        1-D finite values, at least two of them.
    sample_rate : float
        Sampling frequency in Hz.
    start_time : float, optional
        Time of the first sample in seconds.
    """

    samples: np.ndarray
    sample_rate: float
    start_time: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.samples)
        if np.iscomplexobj(x):
            raise InvalidInput("RealSeries samples must be real")
        x = x.astype(float)
        if x.ndim != 1:
            raise InvalidInput(f"RealSeries samples must be 1-D, got shape {x.shape}")
        if x.size < 2:
            raise InvalidInput("RealSeries needs at least 2 samples")
        if not np.all(np.isfinite(x)):
            raise InvalidInput("RealSeries samples must be finite")
        if not (np.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise InvalidInput(f"sample_rate must be > 0, got {self.sample_rate}")
        object.__setattr__(self, "samples", _frozen(x))
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        object.__setattr__(self, "start_time", float(self.start_time))

    def __len__(self):
        return self.samples.size

    @property
    def duration(self):
        return self.samples.size / self.sample_rate

    @property
    def times(self):
        return self.start_time + np.arange(self.samples.size) / self.sample_rate

    def with_samples(self, samples):
        return RealSeries(samples, self.sample_rate, self.start_time)


@dataclass(frozen=True)
class ComplexSeries:
    """Uniformly sampled complex signal (same length contract as :class:`RealSeries`)."""

    samples: np.ndarray
    sample_rate: float
    start_time: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.samples).astype(complex)
        if x.ndim != 1 or x.size < 2:
            raise InvalidInput("ComplexSeries needs a 1-D array of at least 2 samples")
        if not np.all(np.isfinite(x)):
            raise InvalidInput("ComplexSeries samples must be finite")
        if not (np.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise InvalidInput(f"sample_rate must be > 0, got {self.sample_rate}")
        object.__setattr__(self, "samples", _frozen(x))
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        object.__setattr__(self, "start_time", float(self.start_time))

    def __len__(self):
        return self.samples.size

    @property
    def real(self):
        return RealSeries(self.samples.real, self.sample_rate, self.start_time)

    @property
    def imag(self):
        return RealSeries(self.samples.imag, self.sample_rate, self.start_time)


@dataclass(frozen=True)
class Spectrum:
    """Discrete spectrum on a uniform angular-frequency grid.

    ``bins`` may carry leading axes (e.g. one row per channel); the last axis
    is frequency. One-sided spectra hold bins ``0 .. n-1`` at angular
    frequencies ``k * bin_spacing``. Two-sided spectra use FFT ordering.

    The unit of ``bin_spacing`` is whatever angular unit the caller works in
    (rad/s for physical spectra, rad/sample for normalized ones); the
    mode-update formulas are unit-agnostic.
    """

    bins: np.ndarray
    bin_spacing: float
    one_sided: bool = True

    def __post_init__(self):
        b = np.asarray(self.bins).astype(complex)
        if b.ndim < 1 or b.shape[-1] < 1:
            raise InvalidInput("Spectrum needs at least one bin")
        if not (np.isfinite(self.bin_spacing) and self.bin_spacing > 0):
            raise InvalidInput(f"bin_spacing must be > 0, got {self.bin_spacing}")
        object.__setattr__(self, "bins", b)
        object.__setattr__(self, "bin_spacing", float(self.bin_spacing))

    @property
    def n_bins(self):
        return self.bins.shape[-1]

    @property
    def frequencies(self):
        n = self.n_bins
        if self.one_sided:
            return np.arange(n) * self.bin_spacing
        return np.fft.fftfreq(n, d=1.0 / n) * self.bin_spacing

    def same_grid(self, other):
        return (
            self.one_sided == other.one_sided
            and self.n_bins == other.n_bins
            and np.isclose(self.bin_spacing, other.bin_spacing, rtol=1e-12, atol=0.0)
        )

    @classmethod
    def of(cls, x: RealSeries, two_sided=False):
        """Spectrum of a real series with bin spacing in rad/s."""
        n = len(x)
        spacing = 2 * np.pi * x.sample_rate / n
        if two_sided:
            return cls(np.fft.fft(x.samples), spacing, one_sided=False)
        return cls(np.fft.rfft(x.samples), spacing, one_sided=True)


@dataclass(frozen=True)
class HermitianMatrix:
    """Square complex matrix with ``entries == entries.conj().T``.

    Construct with :meth:`from_array` to symmetrize a nearly Hermitian input
    exactly; direct construction validates the asymmetry instead.
    """

    entries: np.ndarray
    tol: float = field(default=1e-8, repr=False)

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise InvalidInput(f"HermitianMatrix must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidInput("HermitianMatrix entries must be finite")
        _check_hermitian(a, self.tol)
        object.__setattr__(self, "entries", _frozen(a))

    @property
    def dimension(self):
        return self.entries.shape[0]

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a)
        return cls((a + a.conj().T) / 2)


def _check_hermitian(a, tol):
    scale = np.linalg.norm(a)
    asym = np.linalg.norm(a - a.conj().T)
    if asym > tol * max(scale, np.finfo(float).tiny):
        raise InvalidInput(f"matrix is not Hermitian (relative asymmetry {asym / scale:.3g})")


def _as_real_series(x, name="x"):
    if isinstance(x, RealSeries):
        return x
    raise InvalidInput(f"{name} must be a RealSeries, got {type(x).__name__}")


def hilbert(x: RealSeries) -> ComplexSeries:
    """Analytic signal ``x + j H[x]`` by the one-sided spectrum method.

    Negative-frequency bins are zeroed, positive bins doubled, DC and Nyquist
    kept. The transform length equals the input length, so the output's own
    DFT has no negative-frequency content and its real part reproduces the
    input to round-off. No edge tapering is applied.
    """
    x = _as_real_series(x)
    n = len(x)
    if n < 4:
        raise InvalidInput(f"hilbert needs at least 4 samples, got {n}")
    spec = np.fft.fft(x.samples)
    h = np.zeros(n)
    h[0] = 1.0
    if n % 2 == 0:
        h[n // 2] = 1.0
        h[1 : n // 2] = 2.0
    else:
        h[1 : (n + 1) // 2] = 2.0
    z = np.fft.ifft(spec * h)
    # the real part is the input by construction; pin it to avoid round-off drift
    z = x.samples + 1j * z.imag
    return ComplexSeries(z, x.sample_rate, x.start_time)


def unwrap_phase(phi) -> np.ndarray:
    """Remove ``2*pi`` jumps so consecutive differences lie in ``(-pi, pi]``.

    The correction added to each sample is an exact integer multiple of
    ``2*pi``; already-unwrapped input is returned unchanged.
    """
    p = np.asarray(phi, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidInput("unwrap_phase needs a non-empty 1-D array")
    if p.size == 1:
        return p.copy()
    d = np.diff(p)
    two_pi = 2 * np.pi
    wrapped = np.mod(d + np.pi, two_pi) - np.pi
    wrapped[wrapped == -np.pi] = np.pi
    turns = np.rint((wrapped - d) / two_pi)
    out = p.copy()
    out[1:] += two_pi * np.cumsum(turns)
    return out


def xcorr_peak_lag(ref: RealSeries, sig: RealSeries, max_lag: int) -> int:
    """Integer lag at which ``sig`` best matches ``ref``.

    Returns the ``tau`` in ``[-max_lag, max_lag]`` maximizing
    ``sum_t ref[t] * sig[t + tau]`` over the overlapping samples, so a
    ``sig`` that is ``ref`` delayed by ``k`` samples yields ``+k``. Ties go to
    the smallest ``|tau|``, then to the negative lag. Evaluated directly in
    the time domain.
    """
    ref = _as_real_series(ref, "ref")
    sig = _as_real_series(sig, "sig")
    if not np.isclose(ref.sample_rate, sig.sample_rate, rtol=1e-12, atol=0.0):
        raise InvalidInput(
            f"sample rates differ: {ref.sample_rate} vs {sig.sample_rate}"
        )
    max_lag = int(max_lag)
    if max_lag < 0:
        raise InvalidInput("max_lag must be non-negative")
    a, b = ref.samples, sig.samples
    if max_lag >= min(a.size, b.size):
        raise InvalidInput(f"max_lag {max_lag} must be < min length {min(a.size, b.size)}")
    best_lag, best_val = 0, None
    # visit lags in tie-break priority order: 0, -1, +1, -2, +2, ...
    for mag in range(max_lag + 1):
        for lag in ((0,) if mag == 0 else (-mag, mag)):
            if lag >= 0:
                n = min(a.size, b.size - lag)
                val = float(np.dot(a[:n], b[lag : lag + n]))
            else:
                n = min(a.size + lag, b.size)
                val = float(np.dot(a[-lag : -lag + n], b[:n]))
            if best_val is None or val > best_val:
                best_lag, best_val = lag, val
    return best_lag


def fractional_shift(x: RealSeries, tau: float) -> RealSeries:
    """Delay ``x`` by ``tau`` seconds with a circular frequency-domain shift.

    Computes ``real(IFFT(FFT(x) * exp(-j*omega*tau)))``; positive ``tau``
    moves features later in time.
    """
    x = _as_real_series(x)
    tau = float(tau)
    if not abs(tau) < x.duration / 4:
        raise InvalidInput(f"|tau|={abs(tau)} s must be < duration/4 = {x.duration / 4} s")
    if tau == 0.0:
        return x.with_samples(x.samples)
    n = len(x)
    omega = 2 * np.pi * np.fft.fftfreq(n, d=1.0 / x.sample_rate)
    y = np.fft.ifft(np.fft.fft(x.samples) * np.exp(-1j * omega * tau)).real
    return x.with_samples(y)


def _jacobi_rotate(a, v, p, q):
    apq = a[p, q]
    mag = abs(apq)
    if mag == 0.0:
        return
    phase = apq / mag
    zeta = (a[q, q].real - a[p, p].real) / (2.0 * mag)
    if abs(zeta) > 1e150:
        t = 0.5 / zeta
    else:
        t = (1.0 if zeta >= 0 else -1.0) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c
    # unitary U acting on columns (p, q): makes a[p, q] real, then a real Givens rotation
    u_pp, u_pq = c, s
    u_qp, u_qq = -s * np.conj(phase), c * np.conj(phase)
    col_p = a[:, p].copy()
    col_q = a[:, q].copy()
    a[:, p] = col_p * u_pp + col_q * u_qp
    a[:, q] = col_p * u_pq + col_q * u_qq
    row_p = a[p, :].copy()
    row_q = a[q, :].copy()
    a[p, :] = np.conj(u_pp) * row_p + np.conj(u_qp) * row_q
    a[q, :] = np.conj(u_pq) * row_p + np.conj(u_qq) * row_q
    a[p, q] = 0.0
    a[q, p] = 0.0
    a[p, p] = a[p, p].real
    a[q, q] = a[q, q].real
    vp = v[:, p].copy()
    vq = v[:, q].copy()
    v[:, p] = vp * u_pp + vq * u_qp
    v[:, q] = vp * u_pq + vq * u_qq


def hermitian_eig(R, max_sweeps=100):
    """Eigen-decomposition of a small Hermitian matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    R : HermitianMatrix or array_like
        Matrix of dimension at most 64.
    max_sweeps : int
        Cap on full off-diagonal sweeps; convergence is quadratic, so a
        handful normally suffices.

    Returns
    -------
    eigenvalues : ndarray
        Real eigenvalues sorted in descending order.
    eigenvectors : ndarray
        Orthonormal columns; column ``i`` pairs with ``eigenvalues[i]``.
        Each column is rotated so its largest-magnitude entry is real and
        non-negative. Real input gives real output.
    """
    if isinstance(R, HermitianMatrix):
        a0 = np.asarray(R.entries)
    else:
        a0 = np.asarray(R)
        if a0.ndim != 2 or a0.shape[0] != a0.shape[1] or a0.shape[0] < 1:
            raise InvalidInput(f"expected a square matrix, got shape {a0.shape}")
        if not np.all(np.isfinite(a0)):
            raise InvalidInput("matrix entries must be finite")
        _check_hermitian(a0, 1e-8)
    n = a0.shape[0]
    if n > _MAX_EIG_DIM:
        raise InvalidInput(f"dimension {n} exceeds {_MAX_EIG_DIM}")
    is_real = not np.iscomplexobj(a0) or not np.any(a0.imag)
    a = ((a0 + a0.conj().T) / 2).astype(complex)
    v = np.eye(n, dtype=complex)
    scale = np.linalg.norm(a)
    if scale > 0:
        for _ in range(max_sweeps):
            off = np.linalg.norm(a - np.diag(np.diag(a)))
            if off <= 1e-15 * scale:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    if abs(a[p, q]) > 1e-300:
                        _jacobi_rotate(a, v, p, q)
    w = np.diag(a).real.copy()
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    for i in range(n):
        j = int(np.argmax(np.abs(v[:, i])))
        ph = v[j, i] / abs(v[j, i])
        v[:, i] = v[:, i] * np.conj(ph)
    if is_real:
        v = v.real.copy()
    return w, v


def taylor_window(n, nbar=TAYLOR_NBAR, sidelobe_db=TAYLOR_SIDELOBE_DB):
    """Symmetric Taylor taper with peak 1 at the window center.

    ``sidelobe_db`` is the (negative) design level of the ``nbar - 1``
    near-in sidelobes. Even lengths are normalized by the continuous center
    value, so their largest sample is slightly below 1. A length-1 window is
    ``[1.0]`` whatever ``nbar`` is.
    """
    n = int(n)
    if n < 1:
        raise InvalidInput(f"window length must be >= 1, got {n}")
    if not sidelobe_db < 0:
        raise InvalidInput(f"sidelobe_db must be negative, got {sidelobe_db}")
    if n == 1:
        return np.ones(1)
    nbar = int(nbar)
    if nbar < 1:
        raise InvalidInput(f"nbar must be >= 1, got {nbar}")
    if nbar >= n:
        raise InvalidInput(f"nbar ({nbar}) must be < n ({n})")
    eta = 10 ** (-sidelobe_db / 20.0)
    A = np.arccosh(eta) / np.pi
    sigma2 = nbar**2 / (A**2 + (nbar - 0.5) ** 2)
    ms = np.arange(1, nbar)
    fm = np.empty(nbar - 1)
    for i, m in enumerate(ms):
        num = np.prod(1 - m**2 / (sigma2 * (A**2 + (ms - 0.5) ** 2)))
        others = ms[ms != m]
        den = 2 * np.prod(1 - m**2 / others**2)
        fm[i] = (-1) ** (m + 1) * num / den
    x = np.arange(n) - (n - 1) / 2.0
    w = 1 + 2 * np.cos(2 * np.pi * np.outer(x, ms) / n) @ fm
    center = 1 + 2 * np.sum(fm)
    w = w / center
    # exact mirror symmetry
    return (w + w[::-1]) / 2
