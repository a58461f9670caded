"""Breathing motion and FMCW echo synthesis for closed-loop tests.

Subjects are point scatterers on a 2-D floor plan. Each breathes with a
quasi-periodic chest waveform; a radar sees that motion scaled by an
orientation gain that depends on which side of the torso faces it. The echo
model is the ideal dechirped FMCW beat signal, so the radar pipeline inverts
it exactly in the noiseless case.

Geometry conventions: positions are meters, headings are degrees
counter-clockwise from the +x axis, and a radar's ``boresight_deg`` is the
heading its array faces. Angles seen by a radar are positive
counter-clockwise from its boresight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import lfilter

from .errors import InvalidInput, InvalidScenario
from .radar import SPEED_OF_LIGHT, RadarConfig, RadarCube
from .sigproc import RealSeries

__all__ = [
    "BreathingModel",
    "BreathingTrace",
    "generate_breathing",
    "RadarPlacement",
    "Subject",
    "StaticScatterer",
    "ScenarioConfig",
    "GroundTruth",
    "orientation_gain",
    "radar_view",
    "simulate_subjects",
    "ground_truth",
    "synthesize_cube",
    "preset",
    "PRESETS",
]

_CHUNK_FRAMES = 500


@dataclass(frozen=True)
class BreathingModel:
    """Chest displacement model ``A(t) * sum_h a_h sin(2 pi h phi(t))``.

    Parameters
    ----------
    base_rate : float
        Mean breathing frequency, Hz.
    amplitude : float
        Fundamental amplitude, meters.
    harmonic_levels : tuple of float
        Relative amplitudes of harmonics 2, 3, ...
    rate_jitter : float
        Standard deviation of the fractional rate fluctuation. The
        fluctuation is an Ornstein-Uhlenbeck process clipped at 3 sigma.
    amplitude_jitter : float
        Same for the amplitude.
    jitter_time : float
        Correlation time of both fluctuations, seconds.
    initial_phase : float or None
        Starting phase in cycles. ``None`` draws it from the seed.
    """

    base_rate: float = 0.25
    amplitude: float = 4e-3
    harmonic_levels: tuple = ()
    rate_jitter: float = 0.0
    amplitude_jitter: float = 0.0
    jitter_time: float = 8.0
    initial_phase: float | None = None

    def __post_init__(self):
        if not 0.1 <= self.base_rate <= 0.7:
            raise InvalidInput(f"base_rate must lie in [0.1, 0.7] Hz, got {self.base_rate}")
        if not 0.5e-3 <= self.amplitude <= 15e-3:
            raise InvalidInput(f"amplitude must lie in [0.5, 15] mm, got {self.amplitude * 1e3} mm")
        for name in ("rate_jitter", "amplitude_jitter"):
            v = getattr(self, name)
            # 3-sigma clipping keeps the rate and amplitude positive
            if not 0 <= v < 1 / 3:
                raise InvalidInput(f"{name} must lie in [0, 1/3), got {v}")
        if not self.jitter_time > 0:
            raise InvalidInput(f"jitter_time must be > 0, got {self.jitter_time}")
        levels = tuple(float(a) for a in self.harmonic_levels)
        if any(not np.isfinite(a) for a in levels):
            raise InvalidInput("harmonic levels must be finite")
        object.__setattr__(self, "harmonic_levels", levels)

    @property
    def coefficients(self):
        return (1.0,) + self.harmonic_levels

    def shape(self, phase):
        """Unit-amplitude waveform at ``phase`` cycles."""
        phase = np.asarray(phase, dtype=float)
        out = np.zeros_like(phase)
        for h, a in enumerate(self.coefficients, start=1):
            if a:
                out += a * np.sin(2 * np.pi * h * phase)
        return out

    def extremum_phase(self, which="max"):
        """Phase in ``[0, 1)`` cycles of the waveform's maximum (or minimum)."""
        sgn = -1.0 if which == "max" else 1.0
        if not any(self.harmonic_levels):
            return 0.25 if which == "max" else 0.75
        grid = np.arange(4096) / 4096
        i = int(np.argmin(sgn * self.shape(grid)))
        res = minimize_scalar(
            lambda p: sgn * float(self.shape(p)),
            bounds=(grid[i] - 1 / 4096, grid[i] + 1 / 4096),
            method="bounded",
            options={"xatol": 1e-13},
        )
        return float(res.x % 1.0)


@dataclass(frozen=True)
class BreathingTrace:
    """Generated chest motion with exact ground truth.

    ``phase`` is in cycles, ``rate`` in Hz; peak and trough times are where
    the phase crosses the waveform's extremum phases.
    """

    waveform: RealSeries
    phase: np.ndarray
    rate: np.ndarray
    peak_times: np.ndarray
    trough_times: np.ndarray


def _ou(rng, n, dt, tau, sigma):
    if sigma == 0:
        rng.standard_normal(n)  # keep the draw count independent of the jitter settings
        return np.zeros(n)
    a = np.exp(-dt / tau)
    e = sigma * np.sqrt(1 - a * a) * rng.standard_normal(n)
    e[0] /= np.sqrt(1 - a * a)  # start in the stationary distribution
    y = lfilter([1.0], [1.0, -a], e)
    return np.clip(y, -3 * sigma, 3 * sigma)


def _crossings(phase, t, target):
    lo = np.ceil(phase[0] - target)
    hi = np.floor(phase[-1] - target)
    if hi < lo:
        return np.empty(0)
    levels = np.arange(lo, hi + 1) + target
    return np.interp(levels, phase, t)


def generate_breathing(model: BreathingModel, duration: float, rate: float = 100.0, seed=0) -> BreathingTrace:
    """Sample a breathing waveform and its exact peak times.

    The phase is the trapezoidal integral of the jittered instantaneous rate,
    so with zero jitter it is exactly linear and the waveform is a pure
    sinusoid (plus any harmonics).
    """
    if not duration > 0 or not rate > 0:
        raise InvalidInput("duration and rate must be > 0")
    n = int(round(duration * rate))
    if n < 2:
        raise InvalidInput("duration too short for the sample rate")
    rng = np.random.default_rng(seed)
    dt = 1.0 / rate
    t = np.arange(n) * dt
    phi0 = rng.uniform() if model.initial_phase is None else float(model.initial_phase)
    if model.initial_phase is not None:
        rng.uniform()
    f = model.base_rate * (1 + _ou(rng, n, dt, model.jitter_time, model.rate_jitter))
    amp = model.amplitude * (1 + _ou(rng, n, dt, model.jitter_time, model.amplitude_jitter))
    phase = np.empty(n)
    phase[0] = phi0
    phase[1:] = phi0 + np.cumsum(0.5 * (f[1:] + f[:-1]) * dt)
    if model.rate_jitter == 0:
        phase = phi0 + model.base_rate * t
    wave = amp * model.shape(phase)
    return BreathingTrace(
        waveform=RealSeries(wave, rate),
        phase=phase,
        rate=f,
        peak_times=_crossings(phase, t, model.extremum_phase("max")),
        trough_times=_crossings(phase, t, model.extremum_phase("min")),
    )


@dataclass(frozen=True)
class RadarPlacement:
    """A radar on the floor plan.

    ``noise_snr_db`` is the per-element SNR after range compression for a
    unit-reflectivity scatterer at the scenario's reference range; ``inf``
    disables noise.
    """

    position: tuple = (0.0, 0.0)
    boresight_deg: float = 90.0
    config: RadarConfig = field(default_factory=RadarConfig)
    noise_snr_db: float = 20.0
    radar_id: str = "1"

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(p) for p in self.position))
        if len(self.position) != 2:
            raise InvalidScenario("radar position must be 2-D")
        object.__setattr__(self, "radar_id", str(self.radar_id))


@dataclass(frozen=True)
class Subject:
    """A breathing person modeled as one scatterer at the chest surface.

    ``orientation_deg`` is the heading the subject faces. The echo comes
    from ``torso_radius`` in front of ``position`` along the line to the
    radar.
    """

    position: tuple = (0.0, 1.5)
    orientation_deg: float = -90.0
    breathing: BreathingModel = field(default_factory=BreathingModel)
    reflectivity: float = 1.0
    torso_radius: float = 0.15
    static: bool = False

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(p) for p in self.position))
        if len(self.position) != 2:
            raise InvalidScenario("subject position must be 2-D")


@dataclass(frozen=True)
class StaticScatterer:
    position: tuple
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(p) for p in self.position))


@dataclass(frozen=True)
class ScenarioConfig:
    """Radars, subjects and clutter with one seed that fixes every random draw.

    ``orientation_gains`` maps the angle between a subject's heading and the
    direction to a radar (0, 90 and 180 degrees) to the fraction of chest
    motion that radar sees; intermediate angles interpolate linearly.
    ``reference_range`` sets the range of unit echo amplitude for the
    inverse-square spreading loss; ``None`` disables the loss.
    """

    radars: tuple
    subjects: tuple
    duration: float = 60.0
    seed: int = 0
    orientation_gains: tuple = (1.0, 0.4, 0.6)
    clutter: tuple = ()
    reference_range: float | None = 1.5
    name: str = "custom"

    def __post_init__(self):
        radars = tuple(self.radars)
        subjects = tuple(self.subjects)
        if not radars:
            raise InvalidScenario("a scenario needs at least one radar")
        if not subjects:
            raise InvalidScenario("a scenario needs at least one subject")
        if not self.duration > 0:
            raise InvalidScenario(f"duration must be > 0, got {self.duration}")
        ids = [r.radar_id for r in radars]
        if len(set(ids)) != len(ids):
            raise InvalidScenario(f"radar ids must be unique, got {ids}")
        gains = tuple(float(g) for g in self.orientation_gains)
        if len(gains) != 3 or any(g < 0 for g in gains):
            raise InvalidScenario("orientation_gains needs three non-negative values")
        if self.reference_range is not None and not self.reference_range > 0:
            raise InvalidScenario("reference_range must be > 0")
        object.__setattr__(self, "radars", radars)
        object.__setattr__(self, "subjects", subjects)
        object.__setattr__(self, "clutter", tuple(self.clutter))
        object.__setattr__(self, "orientation_gains", gains)
        object.__setattr__(self, "seed", int(self.seed))

    def n_frames(self, radar_index=0):
        return int(round(self.duration * self.radars[radar_index].config.slow_time_rate))

    def replace(self, **changes):
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return ScenarioConfig(**kw)

    def to_dict(self):
        def sub(s):
            d = dict(s.__dict__)
            d["breathing"] = dict(s.breathing.__dict__)
            return d

        return {
            "name": self.name,
            "duration": self.duration,
            "seed": self.seed,
            "orientation_gains": list(self.orientation_gains),
            "reference_range": self.reference_range,
            "radars": [
                {
                    "radar_id": r.radar_id,
                    "position": list(r.position),
                    "boresight_deg": r.boresight_deg,
                    "noise_snr_db": r.noise_snr_db,
                    "config": r.config.to_dict(),
                }
                for r in self.radars
            ],
            "subjects": [sub(s) for s in self.subjects],
            "clutter": [dict(c.__dict__) for c in self.clutter],
        }

    @classmethod
    def from_dict(cls, d):
        radars = tuple(
            RadarPlacement(
                position=r["position"],
                boresight_deg=r.get("boresight_deg", 90.0),
                config=RadarConfig.from_dict(r["config"]) if "config" in r else RadarConfig(),
                noise_snr_db=float(r.get("noise_snr_db", 20.0)),
                radar_id=r.get("radar_id", str(i + 1)),
            )
            for i, r in enumerate(d["radars"])
        )
        subjects = []
        for s in d["subjects"]:
            s = dict(s)
            b = s.pop("breathing", {})
            if "harmonic_levels" in b:
                b["harmonic_levels"] = tuple(b["harmonic_levels"])
            subjects.append(Subject(breathing=BreathingModel(**b), **s))
        clutter = tuple(StaticScatterer(**c) for c in d.get("clutter", ()))
        return cls(
            radars=radars,
            subjects=tuple(subjects),
            duration=d.get("duration", 60.0),
            seed=d.get("seed", 0),
            orientation_gains=tuple(d.get("orientation_gains", (1.0, 0.4, 0.6))),
            clutter=clutter,
            reference_range=d.get("reference_range", 1.5),
            name=d.get("name", "custom"),
        )


def orientation_gain(subject: Subject, radar_position, gains=(1.0, 0.4, 0.6)) -> float:
    """Fraction of chest motion visible from ``radar_position``."""
    v = np.subtract(radar_position, subject.position)
    look = np.degrees(np.arctan2(v[1], v[0]))
    psi = abs((look - subject.orientation_deg + 180.0) % 360.0 - 180.0)
    return float(np.interp(psi, [0.0, 90.0, 180.0], gains))


def radar_view(scenario: ScenarioConfig, radar_index: int, subject_index: int):
    """``(nominal range, angle from boresight, orientation gain)`` of a subject seen by a radar."""
    radar = scenario.radars[radar_index]
    subj = scenario.subjects[subject_index]
    v = np.subtract(subj.position, radar.position)
    dist = float(np.hypot(*v))
    r0 = dist - subj.torso_radius
    theta = np.arctan2(v[1], v[0]) - np.radians(radar.boresight_deg)
    theta = float((theta + np.pi) % (2 * np.pi) - np.pi)
    return r0, theta, orientation_gain(subj, radar.position, scenario.orientation_gains)


def _subject_seed(scenario, i):
    return np.random.SeedSequence([scenario.seed, 0, i])


def _radar_seed(scenario, m):
    return np.random.SeedSequence([scenario.seed, 1, m])


def simulate_subjects(scenario: ScenarioConfig):
    """Breathing traces for every subject, sampled at the first radar's frame rate."""
    rate = scenario.radars[0].config.slow_time_rate
    return [
        generate_breathing(s.breathing, scenario.duration, rate, np.random.default_rng(_subject_seed(scenario, i)))
        for i, s in enumerate(scenario.subjects)
    ]


@dataclass(frozen=True)
class GroundTruth:
    """Chest motion per subject and the radial range change each radar should measure.

    ``radial[m][i]`` is subject ``i``'s range change (meters) seen by radar
    ``m``; it decreases when the chest expands toward that radar.
    """

    times: np.ndarray
    chest: tuple
    radial: tuple
    peak_times: tuple
    trough_times: tuple
    radar_ids: tuple


def ground_truth(scenario: ScenarioConfig, traces=None) -> GroundTruth:
    if traces is None:
        traces = simulate_subjects(scenario)
    radial = []
    for m in range(len(scenario.radars)):
        row = []
        for i, subj in enumerate(scenario.subjects):
            _, _, g = radar_view(scenario, m, i)
            b = 0.0 if subj.static else g
            row.append(-b * traces[i].waveform.samples)
        radial.append(tuple(row))
    return GroundTruth(
        times=traces[0].waveform.times,
        chest=tuple(tr.waveform.samples for tr in traces),
        radial=tuple(radial),
        peak_times=tuple(tr.peak_times for tr in traces),
        trough_times=tuple(tr.trough_times for tr in traces),
        radar_ids=tuple(r.radar_id for r in scenario.radars),
    )


def _amplitude(scenario, reflectivity, r):
    if scenario.reference_range is None:
        return reflectivity
    return reflectivity * (scenario.reference_range / r) ** 2


def _noise_sigma(cfg: RadarConfig, snr_db):
    if not np.isfinite(snr_db):
        return 0.0
    w = cfg.range_weights()
    # post-compression SNR of a unit echo: |sum w|^2 / (sigma^2 * sum w^2)
    return float(np.sqrt(w.sum() ** 2 / (np.sum(w * w) * 10 ** (snr_db / 10))))


def synthesize_cube(scenario: ScenarioConfig, radar_index: int, traces=None) -> RadarCube:
    """IQ samples of one radar for the whole scenario.

    Every scatterer contributes
    ``A * a_m(theta) * exp(j (2 pi f_b(t) tau + 4 pi f_0 r(t) / c))`` with
    beat frequency ``f_b = 2 B r(t) / (c T_c)`` and sweep start frequency
    ``f_0 = center_freq - B / 2``, so the phase at mid-sweep corresponds to
    the center frequency. Circular complex Gaussian noise is added per
    fast-time sample. Output is ``complex64``.
    """
    if not 0 <= radar_index < len(scenario.radars):
        raise InvalidScenario(f"radar index {radar_index} out of range")
    placement = scenario.radars[radar_index]
    cfg = placement.config
    if traces is None:
        traces = simulate_subjects(scenario)
    T = scenario.n_frames(radar_index)
    if any(len(tr.waveform) != T for tr in traces):
        raise InvalidScenario("all radars must share the slow-time rate of the first radar")
    M, Nf = cfg.n_elements, cfg.fast_samples
    k_carrier = 4 * np.pi * (cfg.center_freq - cfg.bandwidth / 2) / SPEED_OF_LIGHT
    fast = np.arange(Nf) / cfg.fast_time_rate
    r_lo, r_hi = cfg.ranges[0], cfg.ranges[-1]
    th_lo, th_hi = cfg.angles[0], cfg.angles[-1]
    if r_hi >= cfg.max_range:
        raise InvalidScenario(f"range grid exceeds the unambiguous range {cfg.max_range:.3f} m")

    # (range series, steering vector, amplitude) per scatterer
    scatterers = []
    for i, subj in enumerate(scenario.subjects):
        r0, theta, g = radar_view(scenario, radar_index, i)
        if not (r_lo <= r0 <= r_hi and th_lo <= theta <= th_hi):
            raise InvalidScenario(
                f"subject {i} at range {r0:.3f} m, angle {np.degrees(theta):.1f} deg "
                f"is outside radar {placement.radar_id}'s grid"
            )
        gain = 0.0 if subj.static else g
        r_t = r0 - gain * traces[i].waveform.samples
        scatterers.append((r_t, cfg.steering([theta])[0], _amplitude(scenario, subj.reflectivity, r0)))
    for c in scenario.clutter:
        v = np.subtract(c.position, placement.position)
        r0 = float(np.hypot(*v))
        theta = float((np.arctan2(v[1], v[0]) - np.radians(placement.boresight_deg) + np.pi) % (2 * np.pi) - np.pi)
        if not (0 < r0 < cfg.max_range and abs(theta) < np.pi / 2):
            raise InvalidScenario(f"clutter at {c.position} is not visible to radar {placement.radar_id}")
        scatterers.append((np.full(T, r0), cfg.steering([theta])[0], _amplitude(scenario, c.amplitude, r0)))

    sigma = _noise_sigma(cfg, placement.noise_snr_db)
    rng = np.random.default_rng(_radar_seed(scenario, radar_index))
    cube = np.empty((M, Nf, T), dtype=np.complex64)
    k_beat = 2 * np.pi * 2 * cfg.bandwidth / (SPEED_OF_LIGHT * cfg.sweep_time)
    for start in range(0, T, _CHUNK_FRAMES):
        stop = min(start + _CHUNK_FRAMES, T)
        block = np.zeros((M, Nf, stop - start), dtype=complex)
        for r_t, a, amp in scatterers:
            r = r_t[start:stop]
            beat = np.exp(1j * (k_beat * np.outer(fast, r) + k_carrier * r[None, :]))
            block += amp * a[:, None, None] * beat[None, :, :]
        if sigma > 0:
            z = rng.standard_normal((M, Nf, stop - start, 2))
            block += (sigma / np.sqrt(2)) * (z[..., 0] + 1j * z[..., 1])
        cube[:, :, start:stop] = block
    return RadarCube(cube, cfg.fast_time_rate)


PRESETS = {
    "C1": (1.5, "front"),
    "C2": (1.5, "side"),
    "C3": (1.5, "back"),
    "C4": (3.0, "front"),
    "C5": (3.0, "side"),
    "C6": (3.0, "back"),
}

_HEADINGS = {"front": -90.0, "side": 0.0, "back": 90.0}


def preset(
    name,
    seed=0,
    duration=60.0,
    snr_db=20.0,
    breathing: BreathingModel | None = None,
    radar_ids=None,
    clutter=True,
):
    """Desk-scale scene for conditions C1 to C6.

    One seated subject at ``(0, D)`` with ``D`` 1.5 m or 3.0 m faces the
    radars (front), faces sideways toward +x (side) or faces away (back).
    Radars 1 to 3 stand on the x axis at -0.5, 0 and 0.5 m; radar 4 stands off
    to the left at ``(-1.2, 0.3 D)``. Every radar is aimed at the subject.

    Parameters
    ----------
    snr_db : float or sequence of float
        One value for all radars or one per radar.
    breathing : BreathingModel, optional
        Defaults to a mildly irregular 0.25 Hz breather with a second harmonic.
    radar_ids : sequence of str, optional
        Keep only these radars.
    clutter : bool
        Add a static reflector behind the subject.
    """
    key = str(name).upper()
    if key not in PRESETS:
        raise InvalidScenario(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    dist, facing = PRESETS[key]
    subj_pos = (0.0, dist)
    positions = {"1": (-0.5, 0.0), "2": (0.0, 0.0), "3": (0.5, 0.0), "4": (-1.2, 0.3 * dist)}
    ids = list(positions) if radar_ids is None else [str(r) for r in radar_ids]
    snrs = np.broadcast_to(np.asarray(snr_db, dtype=float), (len(ids),))
    radars = []
    for rid, snr in zip(ids, snrs):
        if rid not in positions:
            raise InvalidScenario(f"preset radars are 1-4, got {rid!r}")
        p = positions[rid]
        aim = float(np.degrees(np.arctan2(subj_pos[1] - p[1], subj_pos[0] - p[0])))
        radars.append(RadarPlacement(p, aim, RadarConfig(), float(snr), rid))
    if breathing is None:
        breathing = BreathingModel(
            base_rate=0.25,
            amplitude=4e-3,
            harmonic_levels=(0.25,),
            rate_jitter=0.08,
            amplitude_jitter=0.08,
        )
    subject = Subject(subj_pos, _HEADINGS[facing], breathing)
    walls = (StaticScatterer((0.3, dist + 1.2), 2.0),) if clutter else ()
    return ScenarioConfig(
        radars=tuple(radars),
        subjects=(subject,),
        duration=duration,
        seed=seed,
        clutter=walls,
        name=key,
    )
