"""Command-line interface.

Subcommands: ``simulate``, ``process``, ``decompose``, ``fuse``,
``evaluate`` and ``experiment``. Reports go to stdout as JSON unless
``--out`` names a file. Every subcommand accepts ``--config FILE.json``
whose keys are the option names (dashes or underscores); explicit flags
override the file.

Exit codes: 0 success, 2 validation error, 3 I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io as fio
from .errors import MultiRadarError, ParseError
from .experiment import DEFAULT_VMD, ExperimentConfig, run_experiment
from .fusion import FusionConfig, fuse
from .mvmd import MultiChannelSeries, mvmd_decompose
from .radar import RadarConfig, process_cube
from .simulator import PRESETS, ScenarioConfig, ground_truth, preset, simulate_subjects, synthesize_cube
from .sigproc import RealSeries
from .vitals import PeakConfig, compute_metrics, detect_peaks, intervals_from_peaks, match_intervals
from .vmd import VmdConfig

log = logging.getLogger("multiradar")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgumentError(f"{self.prog}: {message}")


def _emit(report, out):
    text = fio.write_json(report, out)
    if out is None:
        print(text)


def _float_list(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _vmd_from(args):
    init = args.init
    if init not in ("uniform", "spectral-peaks"):
        init = tuple(_float_list(init))
    return VmdConfig(
        K=args.K, alpha=args.alpha, eta=args.eta, tol=args.tol, max_iter=args.max_iter, init=init,
        boundary=not args.no_boundary,
    )


def _fusion_from(args):
    return FusionConfig(
        f_rr=args.f_rr, max_align_lag=args.max_lag, respiratory_band=tuple(args.band),
        remove_mean=not args.keep_mean,
    )


# --- subcommands -------------------------------------------------------------


def cmd_simulate(args):
    if args.scenario:
        with open(args.scenario) as fh:
            scene = ScenarioConfig.from_dict(json.load(fh))
        scene = scene.replace(seed=args.seed, **({"duration": args.duration} if args.duration else {}))
    else:
        snr = args.snr_db if len(args.snr_db) > 1 else args.snr_db[0]
        scene = preset(
            args.preset, seed=args.seed, duration=args.duration or 60.0, snr_db=snr,
            radar_ids=args.radars, clutter=not args.no_clutter,
        )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    traces = simulate_subjects(scene)
    truth = ground_truth(scene, traces)
    files = []
    for m, placement in enumerate(scene.radars):
        cube = synthesize_cube(scene, m, traces)
        path = out_dir / f"radar_{placement.radar_id}.rcub"
        fio.write_cube(path, cube, placement.config, {"radar_id": placement.radar_id, "scenario": scene.name})
        files.append(path.name)
    cols = [truth.times]
    names = ["time_s"]
    for i, chest in enumerate(truth.chest):
        cols.append(chest)
        names.append(f"chest_subject_{i}")
    for m, rid in enumerate(truth.radar_ids):
        for i in range(len(scene.subjects)):
            cols.append(truth.radial[m][i])
            names.append(f"radar_{rid}" if len(scene.subjects) == 1 else f"radar_{rid}_subject_{i}")
    fio.write_table(out_dir / "ground_truth.csv", cols, names)
    fio.write_peaks(out_dir / "ground_truth_peaks.csv", truth.peak_times[0])
    manifest = {
        "preset": scene.name,
        "seed": scene.seed,
        "n_frames": scene.n_frames(),
        "cube_files": files,
        "ground_truth": "ground_truth.csv",
        "ground_truth_peaks": "ground_truth_peaks.csv",
        "scenario": scene.to_dict(),
    }
    fio.write_json(manifest, out_dir / "manifest.json")
    _emit(manifest, args.out)


def cmd_process(args):
    overrides = json.loads(args.radar_config) if args.radar_config else {}
    series, meta = [], []
    for p in args.cubes:
        cube, cfg, header = fio.read_cube(p)
        if overrides:
            cfg = RadarConfig.from_dict({**cfg.to_dict(), **overrides})
        res = process_cube(cube, cfg)
        rid = str(header.get("extra", {}).get("radar_id", Path(p).stem.removeprefix("radar_")))
        series.append(res.displacement)
        meta.append(
            {"radar_id": rid, "file": str(p), "r_max_m": res.r_max, "theta_max_deg": float(np.degrees(res.theta_max))}
        )
    ids = [m["radar_id"] for m in meta]
    disp = MultiChannelSeries.from_series(series, ids)
    fio.write_displacements(args.csv, disp)
    _emit({"displacement_csv": str(args.csv), "radars": meta}, args.out)


def cmd_decompose(args):
    x = fio.read_displacements(args.input)
    cfg = _vmd_from(args)
    if args.multichannel:
        ms = mvmd_decompose(x, cfg)
        results = [(None, ms.modes, ms.center_freqs, ms.iterations_used, ms.converged)]
    else:
        results = []
        for c in range(x.n_channels):
            ms = mvmd_decompose(x.select([c]), cfg)
            results.append((c, ms.modes, ms.center_freqs, ms.iterations_used, ms.converged))
    cols, names, report = [x.times], ["time_s"], []
    for c, modes, freqs, n_iter, conv in results:
        chans = range(x.n_channels) if c is None else [c]
        for k in range(modes.shape[0]):
            for j, cc in enumerate(chans):
                cols.append(modes[k, j])
                names.append(f"mode{k}_radar_{x.channel_ids[cc]}")
        report.append(
            {
                "channels": [x.channel_ids[cc] for cc in chans],
                "center_freqs_hz": [float(w / (2 * np.pi)) for w in freqs],
                "iterations": int(n_iter),
                "converged": bool(conv),
            }
        )
    if args.csv:
        fio.write_table(args.csv, cols, names)
    _emit({"multichannel": bool(args.multichannel), "decompositions": report}, args.out)


def cmd_fuse(args):
    x = fio.read_displacements(args.input)
    fused = fuse(x, _vmd_from(args), _fusion_from(args))
    if args.csv:
        fio.write_table(args.csv, [fused.upsilon.times, fused.upsilon.samples], ["time_s", "upsilon"])
    _emit(fused.metadata(), args.out)


def _load_peak_source(path, column, sign, peaks_cfg):
    names, a = fio.read_table(path)
    if names == ["peak_time_s"]:
        return a[:, 0]
    if not names or names[0] != "time_s":
        raise ParseError("expected a peak_time_s column or a time_s waveform table", 0, str(path))
    if column is None:
        j = 1
    elif column in names:
        j = names.index(column)
    else:
        raise ParseError(f"column {column!r} not found; have {names}", 0, str(path))
    fs = fio._uniform_rate(a[:, 0], str(path))
    return detect_peaks(RealSeries(sign * a[:, j], fs, float(a[0, 0])), peaks_cfg)


def cmd_evaluate(args):
    pk = PeakConfig(args.min_separation, args.min_prominence)
    est = _load_peak_source(args.estimate, args.estimate_column, args.estimate_sign, pk)
    ref = _load_peak_source(args.reference, args.reference_column, args.reference_sign, pk)
    est_train = intervals_from_peaks(est)
    ref_train = intervals_from_peaks(ref)
    report = compute_metrics(match_intervals(est_train, ref_train), args.tolerance)
    out = report.to_dict()
    out.update({"n_estimated_peaks": int(est.size), "n_reference_peaks": int(ref.size)})
    _emit(out, args.out)


def cmd_experiment(args):
    snr = args.snr_db if len(args.snr_db) > 1 else args.snr_db[0]
    seeds = tuple(args.seed_list) if args.seed_list else tuple(range(args.seed, args.seed + args.seeds))
    cfg = ExperimentConfig(
        preset=args.preset,
        seeds=seeds,
        duration=args.duration,
        snr_db=snr,
        radar_ids=tuple(args.radars) if args.radars else None,
        methods=tuple(args.methods) if args.methods else None,
        vmd=_vmd_from(args),
        fusion=_fusion_from(args),
        peaks=PeakConfig(args.min_separation, args.min_prominence),
        tolerance=args.tolerance,
    )
    result = run_experiment(cfg)
    if args.csv:
        rows = result.summary()
        keys = ["rmse_rri", "mae_rr", "accuracy"]
        with open(args.csv, "w") as fh:
            fh.write("method,n_seeds,n_failed," + ",".join(keys) + "\n")
            for r in rows:
                vals = ["" if r[k] is None else "%.17g" % r[k] for k in keys]
                fh.write(f"{r['method']},{r['n_seeds']},{r['n_failed']}," + ",".join(vals) + "\n")
    report = result.to_dict()
    report["config"] = {"preset": args.preset, "seeds": list(seeds), "snr_db": args.snr_db, "duration": args.duration}
    _emit(report if args.full else {"summary": report["summary"], "config": report["config"]}, args.out)


# --- parser --------------------------------------------------------------------


def _add_vmd(p):
    g = p.add_argument_group("decomposition")
    g.add_argument("--K", type=int, default=DEFAULT_VMD.K, help="number of modes")
    g.add_argument("--alpha", type=float, default=DEFAULT_VMD.alpha)
    g.add_argument("--eta", type=float, default=DEFAULT_VMD.eta)
    g.add_argument("--tol", type=float, default=DEFAULT_VMD.tol)
    g.add_argument("--max-iter", type=int, default=DEFAULT_VMD.max_iter)
    g.add_argument("--init", default="uniform", help="uniform, spectral-peaks or comma-separated Hz")
    g.add_argument("--no-boundary", action="store_true", help="skip mirror extension")


def _add_fusion(p):
    d = FusionConfig()
    g = p.add_argument_group("fusion")
    g.add_argument("--f-rr", type=float, default=d.f_rr, help="expected breathing rate, Hz")
    g.add_argument("--max-lag", type=float, default=d.max_align_lag, help="alignment search range, s")
    g.add_argument("--band", type=float, nargs=2, default=list(d.respiratory_band), metavar=("LO", "HI"))
    g.add_argument("--keep-mean", action="store_true", help="do not remove channel means before decomposition")


def _add_peaks(p):
    d = PeakConfig()
    p.add_argument("--min-separation", type=float, default=d.min_separation)
    p.add_argument("--min-prominence", type=float, default=d.min_prominence)
    p.add_argument("--tolerance", type=float, default=2.0, help="rate tolerance, bpm")


def build_parser():
    parser = _Parser(prog="multiradar", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON file of option defaults")
        p.add_argument("--out", help="write the JSON report here instead of stdout")

    p = sub.add_parser("simulate", help="synthesize radar cubes and ground truth")
    common(p)
    p.add_argument("--preset", default="C1", choices=sorted(PRESETS))
    p.add_argument("--scenario", help="scenario JSON (overrides --preset)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--duration", type=float)
    p.add_argument("--snr-db", type=_float_list, default=[20.0], help="one value or one per radar, comma-separated")
    p.add_argument("--radars", nargs="+")
    p.add_argument("--no-clutter", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("process", help="cube files to displacement CSV")
    common(p)
    p.add_argument("cubes", nargs="+")
    p.add_argument("--csv", required=True, help="displacement CSV to write")
    p.add_argument("--radar-config", help="JSON object of RadarConfig fields to override")
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("decompose", help="VMD per channel or joint MVMD")
    common(p)
    p.add_argument("input")
    p.add_argument("--multichannel", action="store_true")
    p.add_argument("--csv", help="mode waveforms CSV to write")
    _add_vmd(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("fuse", help="fuse displacement channels into one respiratory waveform")
    common(p)
    p.add_argument("input")
    p.add_argument("--csv", help="fused waveform CSV to write")
    _add_vmd(p)
    _add_fusion(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("evaluate", help="compare estimated and reference breaths")
    common(p)
    p.add_argument("--estimate", required=True, help="peak CSV or waveform CSV")
    p.add_argument("--reference", required=True, help="peak CSV or waveform CSV")
    p.add_argument("--estimate-column")
    p.add_argument("--reference-column")
    p.add_argument("--estimate-sign", type=float, default=-1.0,
                   help="multiplier applied to an estimate waveform before peak picking")
    p.add_argument("--reference-sign", type=float, default=1.0)
    _add_peaks(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="seeded single-radar vs fusion comparison")
    common(p)
    p.add_argument("--preset", default="C1", choices=sorted(PRESETS))
    p.add_argument("--seeds", type=int, default=20, help="number of seeds")
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--seed-list", type=int, nargs="+")
    p.add_argument("--duration", type=float, default=60.0)
    p.add_argument("--snr-db", type=_float_list, default=[20.0])
    p.add_argument("--radars", nargs="+")
    p.add_argument("--methods", nargs="+", help="conv:<id> or prop:<id>+<id> or prop:all")
    p.add_argument("--csv", help="summary table CSV to write")
    p.add_argument("--full", action="store_true", help="include per-seed results")
    _add_vmd(p)
    _add_fusion(p)
    _add_peaks(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def _apply_config(parser, argv):
    subs = parser._subparsers._group_actions[0].choices
    required = [a for p in subs.values() for a in p._actions if a.required and a.option_strings]
    # first pass only locates --config, so a required flag may come from the file
    for a in required:
        a.required = False
    try:
        args = parser.parse_args(argv)
    finally:
        for a in required:
            a.required = True
    sub = subs[args.command]
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise _ArgumentError("--config must hold a JSON object")
        known = {a.dest for a in sub._actions}
        defaults = {}
        for key, value in cfg.items():
            dest = key.replace("-", "_")
            if dest not in known or dest in ("config", "func", "help"):
                raise _ArgumentError(f"unknown config key {key!r} for {args.command}")
            defaults[dest] = value
        sub.set_defaults(**defaults)
        for a in sub._actions:
            if a.dest in defaults:
                a.required = False
    return parser.parse_args(argv)


def main(argv=None):
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        args.func(args)
    except _ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ParseError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (MultiRadarError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
