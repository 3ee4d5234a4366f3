"""Command-line entry point ``wavesource``.

Verbs::

    wavesource simulate       --config C [--out DIR] [--seed S]
    wavesource invert-static  --config C [--data M.json] [--out DIR] [--threads N]
    wavesource invert-moving  --config C [--data M.json] [--out DIR] [--threads N]
    wavesource plot-data      --config C --data RESULTS_DIR [--out DIR]

When ``--data`` is omitted the inversion verbs synthesize measurements from
the config first. Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import ExperimentConfig, load_config, trajectory_speed_ratio
from .core import NOISE_GENERATOR, add_noise
from .errors import NumericalError, ValidationError
from .forward import synthesize_moving, synthesize_static
from .invmoving import (
    TrajectoryEstimate,
    fourier_smooth,
    locate_per_step,
    repair_trajectory,
    segment_strokes,
)
from .invstatic import CoefficientField, cgnr_solve, extract_peaks
from .io import RunManifest, read_measurements, read_table, write_measurements, write_table

log = logging.getLogger("wavesource")


# -- pipelines ---------------------------------------------------------------

def simulate(cfg: ExperimentConfig):
    """Noisy measurements for the configured sources."""
    sig = cfg.build_signal()
    sensors = cfg.sensors.build()
    tg = cfg.build_timegrid()
    if cfg.sources.is_static:
        data = synthesize_static(cfg.sources.static_sources(), sensors, tg, sig, cfg.c)
    else:
        data = synthesize_moving(cfg.sources.build_trajectory(cfg.T), sensors, tg, sig, cfg.c)
    return add_noise(data, cfg.noise.level, cfg.noise.seed), sig


def invert_static(cfg, data, sig):
    field = cgnr_solve(data, cfg.grid.build(), sig, cfg.solver)
    return field, extract_peaks(field, cfg.solver)


def invert_moving(cfg, data, sig):
    raw = locate_per_step(data, cfg.grid.build(), sig)
    fixed = repair_trajectory(raw, sig, cfg.postprocess.repair_threshold)
    pp = cfg.postprocess
    smooth = fourier_smooth(fixed, pp.fourier_order) if len(fixed) >= 2 * pp.fourier_order + 1 \
        else None
    segs = segment_strokes(fixed, pp.gap_threshold, pp.segment_order)
    return raw, fixed, smooth, segs


def regime_warnings(cfg, data, sig):
    """Warn when the inversion is run outside its accuracy regime."""
    out = []
    ratio = trajectory_speed_ratio(cfg)
    if ratio is not None and ratio > 0.1:
        out.append(f"sampled max |v|/c = {ratio:.3g} > 0.1; indicator peaks may lag the source")
    g = cfg.grid
    diag = float(np.linalg.norm(np.subtract(g.upper, g.lower)))
    omega = sig.omega if sig.kind == "gaussian_sine" else None
    if omega is not None and diag * omega / data.c > 1.0 and not cfg.sources.is_static:
        out.append(f"grid diagonal * omega / c = {diag * omega / data.c:.3g} > 1; "
                   "travel-time spread across the grid is not small")
    for msg in out:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return out


# -- writers -----------------------------------------------------------------

def _write_field(path, field: CoefficientField):
    grid = field.grid
    pts = grid.points()
    ijk = np.stack(np.unravel_index(np.arange(grid.size), grid.shape), axis=1)
    rows = ((l, *ijk[l], *pts[l], field.values[l]) for l in range(grid.size))
    write_table(path, ["l", "i", "j", "k", "x", "y", "z", "c"], rows)


def _write_peaks(path, report):
    rows = ((n + 1, *p.ijk, *p.location, p.intensity) for n, p in enumerate(report.peaks))
    write_table(path, ["n", "i", "j", "k", "x", "y", "z", "intensity"], rows)


def _write_isosurface(path, grid, field, report):
    pts = grid.points()
    rows = ((int(l), *grid.ijk_of(int(l)), *pts[l], field.values[l]) for l in report.isosurface)
    write_table(path, ["l", "i", "j", "k", "x", "y", "z", "c"], rows)


def _write_estimate(path, est: TrajectoryEstimate):
    rows = ((k + 1, est.times[k], *est.locations[k], est.indicator[k], int(est.repaired[k]))
            for k in range(len(est)))
    write_table(path, ["k", "t", "sx", "sy", "sz", "indicator", "repaired"], rows)


def _fourier_rows(seg, model):
    for n, ax, ay, az, bx, by, bz in model.to_rows():
        yield (seg, n, ax, ay, az, bx, by, bz, model.period, model.offset)


def _write_fourier(path, models):
    rows = []
    for seg, model in models:
        if model is not None:
            rows.extend(_fourier_rows(seg, model))
    write_table(path, ["segment", "n", "ax", "ay", "az", "bx", "by", "bz", "period", "offset"],
                rows)


def _write_segments(path, segs, est):
    rows = ((s + 1, a + 1, b, b - a, int(m is not None))
            for s, ((a, b), m) in enumerate(zip(segs.segments, segs.models)))
    write_table(path, ["segment", "k_start", "k_end", "n_samples", "fourier"], rows)


# -- commands ----------------------------------------------------------------

def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, noise=replace(cfg.noise, seed=args.seed))
    return cfg


def _manifest(cmd, cfg):
    return RunManifest(command=cmd, config=cfg.to_dict(), tool_version=__version__,
                       generator=NOISE_GENERATOR, seed=cfg.noise.seed)


def _measurements(args, cfg, out, man):
    if args.data:
        data, sig = read_measurements(args.data)
        if data.noise is not None:
            man.generator, man.seed = data.noise.generator, data.noise.seed
        man.extra["data"] = str(args.data)
        return data, sig
    t0 = time.perf_counter()
    data, sig = simulate(cfg)
    man.timings["simulate"] = time.perf_counter() - t0
    j, c = write_measurements(data, sig, out)
    man.add_output("measurements", j, out)
    man.add_output("measurements_csv", c, out)
    return data, sig


def cmd_simulate(args):
    cfg = _load(args)
    out = Path(args.out)
    man = _manifest("simulate", cfg)
    t0 = time.perf_counter()
    data, sig = simulate(cfg)
    man.timings["simulate"] = time.perf_counter() - t0
    j, c = write_measurements(data, sig, out)
    man.add_output("measurements", j, out)
    man.add_output("measurements_csv", c, out)
    man.write(out / "simulate_manifest.json")
    return 0


def cmd_invert_static(args):
    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    man = _manifest("invert-static", cfg)
    data, sig = _measurements(args, cfg, out, man)
    regime_warnings(cfg, data, sig)
    t0 = time.perf_counter()
    field, report = invert_static(cfg, data, sig)
    man.timings["invert"] = time.perf_counter() - t0
    man.extra["solver"] = field.report.to_dict()
    man.extra["termination"] = report.termination
    man.extra["n_peaks"] = len(report)
    grid = field.grid
    for name, writer in (("coefficients", lambda p: _write_field(p, field)),
                         ("peaks", lambda p: _write_peaks(p, report)),
                         ("isosurface", lambda p: _write_isosurface(p, grid, field, report))):
        path = out / f"{name}.csv"
        writer(path)
        man.add_output(name, path, out)
    man.write(out / "invert-static_manifest.json")
    for n, p in enumerate(report.peaks, 1):
        print(f"peak {n}: ({p.location[0]:.3f}, {p.location[1]:.3f}, {p.location[2]:.3f}) "
              f"intensity {p.intensity:.4f}")
    return 0


def cmd_invert_moving(args):
    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    man = _manifest("invert-moving", cfg)
    data, sig = _measurements(args, cfg, out, man)
    regime_warnings(cfg, data, sig)
    t0 = time.perf_counter()
    raw, fixed, smooth, segs = invert_moving(cfg, data, sig)
    man.timings["invert"] = time.perf_counter() - t0
    man.extra["n_segments"] = len(segs)
    man.extra["n_repaired"] = int(fixed.repaired.sum())
    models = [(0, smooth)] + [(s + 1, m) for s, m in enumerate(segs.models)]
    for name, writer in (("estimate_raw", lambda p: _write_estimate(p, raw)),
                         ("estimate", lambda p: _write_estimate(p, fixed)),
                         ("fourier", lambda p: _write_fourier(p, models)),
                         ("segments", lambda p: _write_segments(p, segs, fixed))):
        path = out / f"{name}.csv"
        writer(path)
        man.add_output(name, path, out)
    man.write(out / "invert-moving_manifest.json")
    print(f"{len(fixed)} steps, {man.extra['n_repaired']} repaired, {len(segs)} segment(s)")
    return 0


def _model_from_rows(rows):
    from .invmoving import FourierModel
    n = rows["n"].astype(int)
    order = int(n.max())
    a = np.zeros((order, 3))
    b = np.zeros((order, 3))
    a0 = np.zeros(3)
    for r, nn in enumerate(n):
        av = [rows["ax"][r], rows["ay"][r], rows["az"][r]]
        if nn == 0:
            a0[:] = av
        else:
            a[nn - 1] = av
            b[nn - 1] = [rows["bx"][r], rows["by"][r], rows["bz"][r]]
    return FourierModel(a0, a, b, float(rows["period"][0]), float(rows["offset"][0]))


def cmd_plot_data(args):
    """Long-format CSV for field slices, isosurfaces, trajectory overlays and errors."""
    cfg = _load(args)
    src = Path(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    man = _manifest("plot-data", cfg)
    man.extra["inputs"] = str(src)

    def emit(name, header, rows):
        path = out / f"{name}.csv"
        write_table(path, header, rows)
        man.add_output(name, path, out)

    if (src / "coefficients.csv").exists():
        f = read_table(src / "coefficients.csv")
        shape = cfg.grid.shape
        ijk = np.stack([f["i"], f["j"], f["k"]], axis=1).astype(int)
        mid = [n // 2 for n in shape]
        rows = []
        for plane, axis in (("xy", 2), ("xz", 1), ("yz", 0)):
            sel = np.flatnonzero(ijk[:, axis] == mid[axis])
            rows += [(plane, f["x"][l], f["y"][l], f["z"][l], f["c"][l]) for l in sel]
        emit("field_slices", ["plane", "x", "y", "z", "c"], rows)
        iso = read_table(src / "isosurface.csv")
        emit("isosurface_cells", ["x", "y", "z", "c"],
             zip(iso["x"], iso["y"], iso["z"], iso["c"]))

    if (src / "estimate.csv").exists():
        raw = read_table(src / "estimate_raw.csv")
        est = read_table(src / "estimate.csv")
        t = est["t"]
        k = est["k"].astype(int)
        series = {"raw": np.stack([raw["sx"], raw["sy"], raw["sz"]], axis=1),
                  "estimate": np.stack([est["sx"], est["sy"], est["sz"]], axis=1)}
        four = read_table(src / "fourier.csv")
        seg_id = four["segment"].astype(int) if len(four["segment"]) else np.array([], int)
        if np.any(seg_id == 0):
            series["smooth"] = _model_from_rows({c: v[seg_id == 0] for c, v in four.items()})(t)
        if not cfg.sources.is_static:
            series = {"truth": cfg.sources.build_trajectory(cfg.T).position(t), **series}
        rows = [(name, kk, tt, *p) for name, pts in series.items()
                for kk, tt, p in zip(k, t, pts)]
        emit("trajectory_overlay", ["series", "k", "t", "x", "y", "z"], rows)
        if "truth" in series:
            rows = [(name, kk, tt, float(np.linalg.norm(p - q)))
                    for name, pts in series.items() if name != "truth"
                    for kk, tt, p, q in zip(k, t, pts, series["truth"])]
            emit("error_curves", ["series", "k", "t", "error"], rows)

    if not man.outputs:
        raise ValidationError("no inversion results found", "--data")
    man.write(out / "plot-data_manifest.json")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "invert-static": cmd_invert_static,
    "invert-moving": cmd_invert_moving,
    "plot-data": cmd_plot_data,
}


def build_parser():
    p = argparse.ArgumentParser(prog="wavesource", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="experiment YAML file")
        s.add_argument("--data", help="measurement manifest (JSON) or results directory")
        s.add_argument("--out", default="out", help="output directory (default: out)")
        s.add_argument("--seed", type=int, help="override noise.seed")
        s.add_argument("--threads", type=int, help="worker threads for the kernels")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads is not None:
            if args.threads < 1:
                raise ValidationError("must be >= 1", "--threads")
            kernels.set_num_threads(args.threads)
        if args.command == "plot-data" and not args.data:
            raise ValidationError("plot-data needs the results directory", "--data")
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
