"""Implementations of the CLI subcommands.

Outputs that must be reproducible (PFM maps, ``index.json``, reports, CSV
curves) never contain wall-clock data; timings go to ``timings.csv``.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import _jit
from .augmentation import ScaleAugmenter
from .data import Manifest, Sample, SampleError, manifest_entry
from .decoder import DepthEstimate, estimate_depth
from .fusion import FusionMode
from .io import read_pfm, write_pfm, write_ppm
from .metrics import EvalSettings, aggregate_testset, evaluate_sample, prepare_prediction, sparsification
from .plane_sweep import DEFAULT_RANGE, SweepConfig
from .rng import PCG32
from .view_selection import grow_selection


class CommandError(RuntimeError):
    pass


def parse_range(spec: str):
    """``gt`` | ``default`` | ``LO:HI``; returns the string tag or a (lo, hi) tuple."""
    if spec in ("gt", "default"):
        return spec
    try:
        lo, hi = (float(x) for x in spec.split(":"))
    except ValueError:
        raise CommandError(f"--range must be gt, default or LO:HI, got {spec!r}") from None
    return lo, hi


def sweep_config(sample: Sample, range_spec, n_hyp: int, patch: int) -> SweepConfig:
    if range_spec == "default":
        lo, hi = DEFAULT_RANGE
    elif range_spec == "gt":
        lo, hi = sample.depth_range()
    else:
        lo, hi = range_spec
    if lo == hi:
        # a constant-depth scene still needs an interval to sweep
        lo, hi = lo * 0.9, hi * 1.1
    return SweepConfig(lo, hi, n_hyp, patch)


def config_hash(settings: dict) -> str:
    return hashlib.sha256(json.dumps(settings, sort_keys=True).encode()).hexdigest()[:16]


def _with_hash(settings: dict) -> dict:
    settings = dict(settings)
    settings["kernels"] = "numba" if _jit.USE_NUMBA else "numpy"
    settings["config_hash"] = config_hash(settings)
    return settings


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n")


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _report_errors(errors) -> int:
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    return 1 if errors else 0


def _sweep_settings(args) -> dict:
    return {
        "range": args.range,
        "fusion": args.fusion,
        "hyps": args.hyps,
        "patch": args.patch,
        "softmin_temp": SweepConfig.softmin_temp,
        "weight_temp": SweepConfig.weight_temp,
    }


def cmd_estimate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest.load(args.manifest)
    rng_spec = parse_range(args.range)
    settings = _with_hash(_sweep_settings(args))
    entries, errors, timings = [], [], []
    for i in range(len(manifest)):
        sid = manifest.sample_id(i)
        try:
            sample = manifest.load_sample(i)
            cfg = sweep_config(sample, rng_spec, args.hyps, args.patch)
            t0 = time.perf_counter()
            est = estimate_depth(sample, cfg, FusionMode(args.fusion))
            timings.append((sid, time.perf_counter() - t0))
        except (SampleError, ValueError, OSError) as exc:
            errors.append(f"sample {sid}: {exc}")
            continue
        inv_name, unc_name = f"{sid}_invdepth.pfm", f"{sid}_uncert.pfm"
        write_pfm(out / inv_name, est.inv_depth)
        write_pfm(out / unc_name, est.uncertainty)
        entries.append({"id": sid, "invdepth": inv_name, "uncert": unc_name, "range": [cfg.d_min, cfg.d_max]})
    _write_json(out / "index.json", {"settings": settings, "samples": entries, "errors": errors})
    with open(out / "timings.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "seconds"])
        w.writerows(timings)
    return _report_errors(errors)


def load_prediction(pred_dir: Path, sid: str) -> tuple[DepthEstimate, bool]:
    """Read ``<sid>_invdepth.pfm`` (and ``<sid>_uncert.pfm`` when present)."""
    inv = read_pfm(pred_dir / f"{sid}_invdepth.pfm").astype(np.float64)
    unc_path = pred_dir / f"{sid}_uncert.pfm"
    unc = read_pfm(unc_path).astype(np.float64) if unc_path.is_file() else None
    if unc is not None and unc.shape != inv.shape:
        raise CommandError(f"sample {sid}: uncertainty shape {unc.shape} differs from inverse depth {inv.shape}")
    valid = np.isfinite(inv) & (inv > 0)
    has_unc = unc is not None
    unc = np.where(valid & np.isfinite(unc), unc, 0.0) if has_unc else np.zeros_like(inv)
    est = DepthEstimate(np.where(valid, inv, 0.0), unc, valid)
    return est, has_unc


def _check_shape(sid, pred_shape, gt_shape):
    if pred_shape[0] > gt_shape[0] or pred_shape[1] > gt_shape[1]:
        raise CommandError(f"sample {sid}: prediction shape {pred_shape} exceeds ground truth shape {gt_shape}")


def _read_timings(pred_dir: Path) -> dict:
    path = pred_dir / "timings.csv"
    if not path.is_file():
        return {}
    with open(path, newline="") as f:
        return {row["id"]: float(row["seconds"]) for row in csv.DictReader(f)}


def _write_curve(path: Path, res) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["fraction", "oracle", "uncert", "error"])
        for row in zip(res.fractions, res.oracle, res.uncertainty, res.error):
            w.writerow([repr(float(v)) for v in row])


def cmd_eval(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    curves = out / "sparsification"
    pred_dir = Path(args.predictions)
    manifest = Manifest.load(args.manifest)
    settings = EvalSettings.parse(args.align)
    timings = _read_timings(pred_dir) if args.with_runtime else {}
    records, metrics, errors = [], [], []
    for i in range(len(manifest)):
        sid = manifest.sample_id(i)
        try:
            sample = manifest.load_sample(i)
            pred, has_unc = load_prediction(pred_dir, sid)
            _check_shape(sid, pred.inv_depth.shape, sample.gt_depth.shape)
            m = evaluate_sample(pred, sample, settings)
            if has_unc:
                res = _sparsify_sample(pred, sample, settings)
                if res is not None:
                    m.ause = res.ause
                    curves.mkdir(exist_ok=True)
                    _write_curve(curves / f"{sid}.csv", res)
        except (SampleError, ValueError, OSError, CommandError) as exc:
            errors.append(f"sample {sid}: {exc}")
            continue
        metrics.append(m)
        records.append(
            {
                "id": sid,
                "rel": m.rel,
                "tau": m.tau,
                "m": m.m,
                "ause": _num(m.ause),
                "best_view_set": None,
                "runtime_s": _num(timings.get(sid)),
            }
        )
    report = _run_report(
        {"command": "eval", "alignment": settings.describe(), "range": args.range, "seed": args.seed},
        records,
        metrics,
        errors,
    )
    _write_json(out / "report.json", report)
    _write_sample_csv(out / "per_sample.csv", records)
    return _report_errors(errors)


def _run_report(settings, records, metrics, errors) -> dict:
    agg = aggregate_testset(metrics) if metrics else None
    runtimes = [r["runtime_s"] for r in records if r.get("runtime_s") is not None]
    return {
        "settings": _with_hash(settings),
        "samples": records,
        "testset": {
            "rel": _num(agg.rel) if agg else None,
            "tau": _num(agg.tau) if agg else None,
            "ause": _num(agg.ause) if agg else None,
            "runtime_s": float(np.mean(runtimes)) if runtimes else None,
            "n_samples": len(metrics),
        },
        "errors": errors,
    }


def _write_sample_csv(path: Path, records) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "rel", "tau", "ause"])
        for r in records:
            w.writerow([r["id"], repr(r["rel"]), repr(r["tau"]), "" if r["ause"] is None else repr(r["ause"])])


def _sparsify_sample(pred: DepthEstimate, sample: Sample, settings: EvalSettings):
    gt = np.asarray(sample.gt_depth, dtype=np.float64)
    depth, unc, _ = prepare_prediction(pred, gt, settings)
    ok = (depth > 0) & np.isfinite(depth) & (gt > 0) & np.isfinite(gt)
    if ok.sum() < 100:
        return None
    err = np.abs(depth[ok] - gt[ok]) / gt[ok]
    return sparsification(err, unc[ok])


def cmd_viewselect(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest.load(args.manifest)
    rng_spec = parse_range(args.range)
    settings = EvalSettings.parse(args.align)
    mode = FusionMode(args.fusion)
    records, metrics, errors = [], [], []
    for i in range(len(manifest)):
        sid = manifest.sample_id(i)
        try:
            sample = manifest.load_sample(i)
            cfg = sweep_config(sample, rng_spec, args.hyps, args.patch)

            def estimator(s, cfg=cfg):
                return estimate_depth(s, cfg, mode)

            sel = grow_selection(sample, estimator, settings)
            best = sample.with_views(sel.best_views)
            m = evaluate_sample(estimator(best), best, settings, with_ause=True)
        except (SampleError, ValueError, RuntimeError) as exc:
            errors.append(f"sample {sid}: {exc}")
            continue
        with open(out / f"{sid}_viewselect.csv", "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["size", "rel"])
            for size, rel in enumerate(sel.curve, start=1):
                w.writerow([size, repr(rel)])
        metrics.append(m)
        records.append(
            {
                "id": sid,
                "rel": m.rel,
                "tau": m.tau,
                "m": m.m,
                "ause": _num(m.ause),
                "best_view_set": sel.best_views,
                "order": sel.order,
                "pairwise": [[v, r] for v, r in sel.pairwise],
                "runtime_s": None,
            }
        )
    settings_echo = dict(_sweep_settings(args), command="viewselect", alignment=settings.describe(), seed=args.seed)
    _write_json(out / "report.json", _run_report(settings_echo, records, metrics, errors))
    return _report_errors(errors)


def cmd_sparsify(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    errors, records = [], []
    if args.input:
        with open(args.input, newline="") as f:
            rows = list(csv.DictReader(f))
        try:
            res = sparsification([float(r["error"]) for r in rows], [float(r["uncertainty"]) for r in rows])
        except (KeyError, ValueError) as exc:
            raise CommandError(f"{args.input}: {exc}") from None
        _write_curve(out / "sparsification.csv", res)
        records.append({"id": Path(args.input).stem, "ause": res.ause})
    else:
        if not args.predictions:
            raise CommandError("--manifest needs --predictions")
        manifest = Manifest.load(args.manifest)
        settings = EvalSettings.parse(args.align)
        for i in range(len(manifest)):
            sid = manifest.sample_id(i)
            try:
                sample = manifest.load_sample(i)
                pred, has_unc = load_prediction(Path(args.predictions), sid)
                if not has_unc:
                    raise CommandError("no uncertainty map")
                res = _sparsify_sample(pred, sample, settings)
                if res is None:
                    raise CommandError("fewer than 100 valid pixels")
            except (SampleError, ValueError, OSError, CommandError) as exc:
                errors.append(f"sample {sid}: {exc}")
                continue
            _write_curve(out / f"{sid}_sparsification.csv", res)
            records.append({"id": sid, "ause": res.ause})
    mean = float(np.mean([r["ause"] for r in records])) if records else None
    _write_json(out / "report.json", {"samples": records, "testset": {"ause": mean}, "errors": errors})
    return _report_errors(errors)


def _random_depth_sample(rng: np.random.Generator) -> Sample:
    from .data import View
    from .geometry import Intrinsics, Pose

    median = float(np.exp(rng.uniform(np.log(0.5), np.log(50.0))))
    depth = median * np.exp(rng.normal(0.0, 0.3, size=(16, 16)))
    k = Intrinsics(16.0, 16.0, 7.5, 7.5)
    img = np.zeros((16, 16, 3))
    view = View(img, Pose(np.eye(3), [0.1, 0.0, 0.0]), k)
    return Sample(View(img, Pose.identity(), k), [view], depth)


def cmd_augstats(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    aug = ScaleAugmenter(args.bins)
    pick = PCG32(args.seed)
    if args.manifest:
        manifest = Manifest.load(args.manifest)
        pool = [manifest.load_sample(i) for i in range(len(manifest))]
        draw = lambda: pool[pick.bounded(len(pool))]  # noqa: E731
    else:
        gen = np.random.Generator(np.random.PCG64(args.seed))
        draw = lambda: _random_depth_sample(gen)  # noqa: E731
    scales = []
    for _ in range(args.iterations):
        _, s = aug(draw())
        scales.append(s)
    aug.depths.to_csv(out / "augstats_depths.csv")
    aug.medians.to_csv(out / "augstats_medians.csv")
    c = aug.medians.counts
    _write_json(
        out / "report.json",
        {
            "settings": _with_hash({"command": "augstats", "iterations": args.iterations, "bins": args.bins,
                                    "seed": args.seed, "source": "manifest" if args.manifest else "random"}),
            "median_counts": {"min": int(c.min()), "max": int(c.max())},
            "scale": {"min": float(np.min(scales)), "max": float(np.max(scales))} if scales else None,
        },
    )
    return 0


def cmd_synth(args) -> int:
    from . import synth

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(args.samples):
        sid = f"synth{i:03d}"
        sample = synth.render(synth.random_scene(args.seed + i, args.size, args.views))
        write_ppm(out / f"{sid}_key.ppm", sample.keyview.image)
        write_pfm(out / f"{sid}_depth.pfm", sample.gt_depth)
        views = []
        for j, v in enumerate(sample.others, start=1):
            name = f"{sid}_view{j}.ppm"
            write_ppm(out / name, v.image)
            views.append((name, v.pose, v.intrinsics))
        entries.append(
            manifest_entry(sid, f"{sid}_key.ppm", f"{sid}_depth.pfm", sample.keyview.intrinsics, views,
                           sample.depth_range())
        )
    _write_json(out / "manifest.json", {"samples": entries})
    return 0


COMMANDS = {
    "estimate": cmd_estimate,
    "eval": cmd_eval,
    "viewselect": cmd_viewselect,
    "sparsify": cmd_sparsify,
    "augstats": cmd_augstats,
    "synth": cmd_synth,
}


def run(args) -> int:
    _jit.set_threads(args.threads)
    try:
        return COMMANDS[args.command](args)
    except (CommandError, SampleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
