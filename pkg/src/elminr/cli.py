"""Command-line interface: ``elminr {fit,beam,eval,render-partition,ablate}``.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import metrics
from .local_solver import SolverError
from .partition import load_partition, render_partition, save_partition
from .pipeline import FitConfig, build_partition, fit
from .tensor_io import SignalTensor, TensorFormatError, load_image, load_tensor, save_image, save_tensor

log = logging.getLogger("elminr")

EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


_DEFAULTS = FitConfig()

# (flag, config key, type, help)
_CONFIG_FLAGS = [
    ("--side", "side", int, "regular-mesh subdomain side in samples"),
    ("--tau", "tau", float, "BEAM energy threshold (selects threshold BEAM)"),
    ("--target-n", "target_n", int, "BEAM target region count (selects fixed-count BEAM)"),
    ("--atomic", "atomic", int, "BEAM atomic cell side"),
    ("--temporal-patch", "temporal_patch", int, "time-axis patch length for volumes"),
    ("--m", "m", int, "hidden neurons per local model"),
    ("--F", "F", int, "random Fourier feature frequencies"),
    ("--sigma-rff", "sigma_rff", float, "standard deviation of the RFF frequencies"),
    ("--ridge", "ridge", float, "Tikhonov ridge (default: 1e-10 * trace(H^T H) / m)"),
    ("--solver-mode", "solver_mode", str, "auto | normal | orthogonal | svd"),
    ("--overlap", "overlap", float, "partition-of-unity overlap in samples (default: max(2, side/8), 2 for BEAM)"),
    ("--global-seed", "global_seed", int, "seed for every random draw"),
    ("--rng-algorithm", "rng_algorithm", str, "pcg64 | philox"),
    ("--threads", "threads", int, "worker threads for the local solves (default: all cores)"),
]


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with flat FitConfig keys; flags override it")
    for flag, key, typ, text in _CONFIG_FLAGS:
        default = getattr(_DEFAULTS, key)
        if default is not None:
            text = f"{text} (default: {default})"
        p.add_argument(flag, dest=key, type=typ, default=argparse.SUPPRESS, help=text)
    p.add_argument("--use-rff", dest="use_rff", action="store_true", default=argparse.SUPPRESS,
                   help="encode coordinates with random Fourier features (default: True)")
    p.add_argument("--no-rff", dest="use_rff", action="store_false", default=argparse.SUPPRESS,
                   help="feed raw normalized coordinates to the hidden layer")
    p.add_argument("--no-bias-column", dest="bias_column", action="store_false",
                   default=argparse.SUPPRESS, help="drop the constant output feature (default: kept)")


def _config_from_args(args) -> FitConfig:
    values = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config not found: {path}")
        try:
            values.update(json.loads(path.read_text()))
        except json.JSONDecodeError as exc:
            raise UsageError(f"bad config file {path}: {exc}") from exc
    for f in fields(FitConfig):
        if hasattr(args, f.name):
            values[f.name] = getattr(args, f.name)
    try:
        return FitConfig.from_dict(values)
    except (TypeError, ValueError) as exc:
        raise UsageError(_pretty(str(exc))) from exc


def _pretty(msg: str) -> str:
    return msg.replace(">= ", "≥ ")


def _load_signal(path, layout=None) -> SignalTensor:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"input not found: {path}")
    try:
        if path.suffix.lower() == ".png":
            return load_image(path)
        return load_tensor(path, layout)
    except TensorFormatError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _write_outputs(out: Path, result, signal, timings: bool):
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(result.report.to_json(timings) + "\n")
    save_tensor(result.reconstruction, out / "recon.etns")
    if result.reconstruction.ndim == 2 and result.reconstruction.channels <= 3:
        save_image(result.reconstruction, out / "recon.png")
    save_partition(result.partition, out / "partition.txt")
    save_image(render_partition(result.partition, signal), out / "partition.png")


def cmd_fit(args) -> int:
    signal = _load_signal(args.input, args.layout)
    cfg = _config_from_args(args)
    if signal.has_time and cfg.temporal_patch is None:
        cfg.temporal_patch = 10
    partition = None
    if args.partition:
        partition = load_partition(args.partition)
    result = fit(signal, cfg, partition=partition)
    for phase, ms in result.report.timings_ms.items():
        log.info("%s: %.1f ms", phase, ms)
    _write_outputs(Path(args.out), result, signal, not args.omit_timings)
    print(json.dumps({"psnr_db": result.report.psnr_db, "n_regions": result.report.n_regions}))
    return 0


def cmd_beam(args) -> int:
    if args.tau is not None and args.target_n is not None:
        raise UsageError("--tau and --target-n are mutually exclusive")
    if args.tau is None and args.target_n is None:
        raise UsageError("one of --tau or --target-n is required")
    signal = _load_signal(args.input, args.layout)
    try:
        cfg = FitConfig(atomic=args.atomic, tau=args.tau, target_n=args.target_n)
        partition = build_partition(signal, cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_partition(partition, out / "partition.txt")
    save_image(render_partition(partition, signal), out / "partition.png")
    print(json.dumps({"n_regions": len(partition)}))
    return 0


def cmd_eval(args) -> int:
    pred = _load_signal(args.pred, args.layout)
    gt = _load_signal(args.gt, args.layout)
    if pred.values.shape != gt.values.shape:
        raise UsageError(f"shape mismatch: {pred.values.shape} vs {gt.values.shape}")
    try:
        per_channel = metrics.channel_psnr(pred, gt)
        result = {
            "psnr_db": float(np.mean(per_channel)),
            "psnr_per_channel": [float(v) for v in per_channel],
            "mae": metrics.mae(pred, gt),
            "mse": metrics.mse(pred, gt),
        }
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    print(json.dumps(result, sort_keys=True))
    return 0


def cmd_render_partition(args) -> int:
    if not Path(args.partition).exists():
        raise UsageError(f"input not found: {args.partition}")
    try:
        partition = load_partition(args.partition)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"bad partition file: {exc}") from exc
    signal = _load_signal(args.signal, args.layout)
    try:
        save_image(render_partition(partition, signal), args.out)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return 0


def _parse_int_list(text, name):
    try:
        items = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"{name} must be a comma-separated list of integers") from exc
    if not items:
        raise UsageError(f"{name} is empty")
    return items


def _parse_meshes(text):
    meshes = []
    for item in (v.strip() for v in text.split(",")):
        if not item:
            continue
        kind, _, arg = item.partition(":")
        try:
            if kind == "regular":
                meshes.append((item, {"side": int(arg)}))
            elif kind == "beam":
                meshes.append((item, {"target_n": int(arg)}))
            elif kind == "tau":
                meshes.append((item, {"tau": float(arg)}))
            else:
                raise ValueError
        except ValueError as exc:
            raise UsageError(f"bad mesh spec {item!r}; use regular:SIDE, beam:N or tau:T") from exc
    if not meshes:
        raise UsageError("--mesh-list is empty")
    return meshes


def ablate_rows(signal, m_list, meshes, seeds, base: dict, timings=True) -> list:
    """One row per (m, mesh, seed): ``m, mesh, N, seed, psnr_db, fit_ms``."""
    rows = []
    partitions = {}
    for name, mesh in meshes:
        cfg = FitConfig.from_dict({**base, **mesh})
        partitions[name] = build_partition(signal, cfg)
    for m in m_list:
        for name, mesh in meshes:
            for seed in range(seeds):
                cfg = FitConfig.from_dict({**base, **mesh, "m": m, "global_seed": base.get("global_seed", 0) + seed})
                t0 = time.perf_counter()
                result = fit(signal, cfg, partition=partitions[name])
                fit_ms = (time.perf_counter() - t0) * 1e3 if timings else 0.0
                rows.append({
                    "m": m, "mesh": name, "N": result.report.n_regions, "seed": cfg.global_seed,
                    "psnr_db": f"{result.report.psnr_db:.6f}", "fit_ms": f"{fit_ms:.1f}",
                })
    return rows


def cmd_ablate(args) -> int:
    m_list = _parse_int_list(args.m_list, "--m-list")
    if any(m < 1 for m in m_list):
        raise UsageError("m must be ≥ 1")
    meshes = _parse_meshes(args.mesh_list)
    if args.seeds < 1:
        raise UsageError("--seeds must be ≥ 1")
    signal = _load_signal(args.input, args.layout)
    base = _config_from_args(args).to_dict()
    for key in ("side", "tau", "target_n", "m"):
        base.pop(key)
    rows = ablate_rows(signal, m_list, meshes, args.seeds, base, timings=not args.omit_timings)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["m", "mesh", "N", "seed", "psnr_db", "fit_ms"], lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if args.out == "-":
        sys.stdout.write(buf.getvalue())
    else:
        Path(args.out).write_text(buf.getvalue())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elminr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log one line per phase")
    sub = parser.add_subparsers(dest="command", required=True)

    def layout_flag(p):
        p.add_argument("--layout", choices=["channels", "time"], default=None,
                       help="interpretation of rank-3 ETNS files (default: by trailing axis length)")

    p = sub.add_parser("fit", help="fit a signal and write reconstruction, partition and report")
    p.add_argument("input")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--partition", help="reuse a partition file instead of meshing")
    p.add_argument("--omit-timings", action="store_true", help="write zero timings for byte-stable reports")
    layout_flag(p)
    _add_config_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("beam", help="build a BEAM partition")
    p.add_argument("input")
    p.add_argument("--atomic", type=int, default=16, help="atomic cell side (default: 16)")
    p.add_argument("--tau", type=float, default=None, help="energy threshold")
    p.add_argument("--target-n", type=int, default=None, help="target region count")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    layout_flag(p)
    p.set_defaults(func=cmd_beam)

    p = sub.add_parser("eval", help="PSNR / MAE / MSE between two signals")
    p.add_argument("pred")
    p.add_argument("gt")
    layout_flag(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render-partition", help="draw a partition file over a signal")
    p.add_argument("partition")
    p.add_argument("signal")
    p.add_argument("--out", default="partition.png", help="output PNG (default: partition.png)")
    layout_flag(p)
    p.set_defaults(func=cmd_render_partition)

    p = sub.add_parser("ablate", help="PSNR grid over hidden widths, meshes and seeds (CSV)")
    p.add_argument("input")
    p.add_argument("--m-list", required=True, help="comma-separated hidden widths, e.g. 64,256,1024")
    p.add_argument("--mesh-list", default="regular:32",
                   help="comma-separated meshes: regular:SIDE, beam:N, tau:T (default: regular:32)")
    p.add_argument("--seeds", type=int, default=1, help="seeds per configuration (default: 1)")
    p.add_argument("--out", default="-", help="CSV path, '-' for stdout (default: -)")
    p.add_argument("--omit-timings", action="store_true", help="write fit_ms as 0 for byte-stable CSV")
    layout_flag(p)
    _add_config_flags(p)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="elminr: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"elminr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"elminr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"elminr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
