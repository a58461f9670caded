"""Seeded comparison of single-radar and fused respiration estimates.

A method string is ``conv:<radar id>`` (one radar, VMD and peak picking)
or ``prop:<id>+<id>+...`` (multi-radar fusion); ``prop:all`` fuses every
radar in the scene.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientPeaks, InvalidInput, NoMatches, NoRespiratoryMode, NoTarget
from .fusion import FusionConfig, fuse
from .mvmd import MultiChannelSeries
from .radar import process_cube
from .simulator import ScenarioConfig, ground_truth, preset, simulate_subjects, synthesize_cube
from .sigproc import RealSeries
from .vitals import PeakConfig, compute_metrics, detect_peaks, match_intervals
from .vmd import VmdConfig

__all__ = [
    "Method",
    "parse_method",
    "ExperimentConfig",
    "TrialResult",
    "ExperimentResult",
    "scene_displacements",
    "evaluate_methods",
    "run_experiment",
    "DEFAULT_VMD",
]

log = logging.getLogger(__name__)

# two modes: breathing and everything above it
DEFAULT_VMD = VmdConfig(K=2)

_EXPECTED_FAILURES = (NoRespiratoryMode, NoMatches, InsufficientPeaks, NoTarget)


@dataclass(frozen=True)
class Method:
    kind: str
    radars: tuple

    @property
    def name(self):
        if self.kind == "conv":
            return f"conv:{self.radars[0]}"
        return "prop:" + "+".join(self.radars)


def parse_method(text, available=None) -> Method:
    """Parse ``conv:<id>``, ``prop:<id>+<id>`` or ``prop:all``."""
    kind, _, rest = str(text).partition(":")
    kind = kind.strip().lower()
    if kind not in ("conv", "prop") or not rest:
        raise InvalidInput(f"method must look like conv:<id> or prop:<id>+<id>, got {text!r}")
    if kind == "prop" and rest.strip() == "all":
        if available is None:
            raise InvalidInput("prop:all needs the scene's radar list")
        ids = tuple(available)
    else:
        ids = tuple(r.strip() for r in rest.split("+"))
    if kind == "conv" and len(ids) != 1:
        raise InvalidInput(f"conv takes exactly one radar, got {ids}")
    if len(set(ids)) != len(ids) or not all(ids):
        raise InvalidInput(f"radar ids must be distinct and non-empty: {ids}")
    if available is not None:
        missing = [r for r in ids if r not in available]
        if missing:
            raise InvalidInput(f"method {text!r} names radars {missing} not in the scene {list(available)}")
    return Method(kind, ids)


@dataclass(frozen=True)
class ExperimentConfig:
    """What to run: a preset (or explicit scenario), seeds, SNR and methods."""

    preset: str = "C1"
    seeds: tuple = tuple(range(20))
    duration: float = 60.0
    snr_db: object = 20.0
    radar_ids: tuple | None = None
    methods: tuple | None = None
    vmd: VmdConfig = DEFAULT_VMD
    fusion: FusionConfig = field(default_factory=FusionConfig)
    peaks: PeakConfig = field(default_factory=PeakConfig)
    tolerance: float = 2.0
    estimate_sign: float = -1.0
    scenario: ScenarioConfig | None = None

    def scene(self, seed):
        if self.scenario is not None:
            return self.scenario.replace(seed=seed)
        return preset(self.preset, seed=seed, duration=self.duration, snr_db=self.snr_db, radar_ids=self.radar_ids)


@dataclass(frozen=True)
class TrialResult:
    seed: int
    metrics: dict  # method name -> MetricReport or None on failure
    errors: dict  # method name -> error text


@dataclass(frozen=True)
class ExperimentResult:
    methods: tuple
    trials: tuple

    def summary(self):
        """One row per method with metric means over successful seeds."""
        rows = []
        for m in self.methods:
            ok = [t.metrics[m] for t in self.trials if t.metrics.get(m) is not None]
            row = {"method": m, "n_seeds": len(self.trials), "n_failed": len(self.trials) - len(ok)}
            for key in ("rmse_rri", "mae_rr", "accuracy"):
                row[key] = float(np.mean([getattr(r, key) for r in ok])) if ok else None
            rows.append(row)
        return rows

    def per_seed(self, key="rmse_rri", failed=np.nan):
        """Array ``(n_seeds, n_methods)`` of one metric; failures become ``failed``."""
        return np.array(
            [[getattr(t.metrics[m], key) if t.metrics.get(m) is not None else failed for m in self.methods] for t in self.trials]
        )

    def to_dict(self):
        return {
            "methods": list(self.methods),
            "summary": self.summary(),
            "trials": [
                {
                    "seed": t.seed,
                    "metrics": {m: (r.to_dict() if r is not None else None) for m, r in t.metrics.items()},
                    "errors": dict(t.errors),
                }
                for t in self.trials
            ],
        }


def scene_displacements(scenario: ScenarioConfig):
    """Synthesize and process every radar; returns ``(MultiChannelSeries, reference peak times)``."""
    traces = simulate_subjects(scenario)
    truth = ground_truth(scenario, traces)
    series = []
    for m, placement in enumerate(scenario.radars):
        cube = synthesize_cube(scenario, m, traces)
        series.append(process_cube(cube, placement.config).displacement)
    ids = [r.radar_id for r in scenario.radars]
    return MultiChannelSeries.from_series(series, ids), truth.peak_times[0]


def evaluate_methods(displacements: MultiChannelSeries, reference_peaks, methods, cfg: ExperimentConfig):
    """Score each method on one set of displacements; returns ``(metrics, errors)`` dicts."""
    ids = list(displacements.channel_ids)
    metrics, errors = {}, {}
    for method in methods:
        idx = [ids.index(r) for r in method.radars]
        try:
            fused = fuse(displacements.select(idx), cfg.vmd, cfg.fusion)
            est = RealSeries(cfg.estimate_sign * fused.upsilon.samples, fused.upsilon.sample_rate)
            peaks = detect_peaks(est, cfg.peaks)
            metrics[method.name] = compute_metrics(match_intervals(peaks, reference_peaks), cfg.tolerance)
        except _EXPECTED_FAILURES as exc:
            metrics[method.name] = None
            errors[method.name] = f"{type(exc).__name__}: {exc}"
            log.info("%s failed: %s", method.name, exc)
    return metrics, errors


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    if not cfg.seeds:
        raise InvalidInput("need at least one seed")
    trials = []
    methods = None
    for seed in cfg.seeds:
        scene = cfg.scene(int(seed))
        available = [r.radar_id for r in scene.radars]
        if methods is None:
            texts = cfg.methods or [f"conv:{r}" for r in available] + ["prop:all"]
            methods = [parse_method(t, available) for t in texts]
        disp, ref = scene_displacements(scene)
        metrics, errors = evaluate_methods(disp, ref, methods, cfg)
        trials.append(TrialResult(int(seed), metrics, errors))
    return ExperimentResult(tuple(m.name for m in methods), tuple(trials))
