"""Command-line interface: generate, train, eval, sweep, roundtrip.

Exit codes are a stable contract: 0 success, 1 usage error, 2 I/O error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .autodiff import NumericError, ShapeError, Tensor
from .config import (
    ConfigError,
    RunManifest,
    apply_overrides,
    dataset_spec_from,
    file_sha256,
    parse_config_file,
    train_config_from,
)
from .data import DatasetSpec, KINDS, MalformedFileError, generate, load, save
from .evaluate import (
    evaluate,
    export_correspondence,
    sweep_beta,
    write_metrics_csv,
    write_sweep_csv,
)
from .flow import CheckpointError, load_checkpoint, save_checkpoint
from .kernels import KernelBank
from .report import correspondence_figure, sweep_figure, trace_figure
from .train import TrainingAbort, make_bank, train, write_trace_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="symot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a toy dataset CSV")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a flow from a config file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="key=value config file")
    src.add_argument("--manifest", help="re-run a previous run from its manifest")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--outdir", default="run")

    p = sub.add_parser("eval", help="evaluate a checkpoint on two datasets")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--x", required=True, help="source dataset CSV")
    p.add_argument("--z", required=True, help="target dataset CSV")
    p.add_argument("--outdir", default="eval")
    p.add_argument("--dataset", default="custom", help="label for the metrics row")
    p.add_argument("--method", default="symot-flow")
    p.add_argument("--beta", type=float, default=float("nan"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--svg", default=None, help="also render the scatter figure here")

    p = sub.add_parser("sweep", help="train one model per OT weight")
    p.add_argument("--config", required=True)
    p.add_argument("--betas", required=True, help="comma-separated weights")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--outdir", default="sweep")

    p = sub.add_parser("roundtrip", help="verify forward-inverse consistency")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-8)
    p.add_argument("--box", type=float, default=4.0, help="sample box half-width")
    return parser


def _load_run_inputs(args):
    if args.manifest:
        manifest = RunManifest.load(args.manifest)
        cfg = dict(manifest.config)
    else:
        cfg = parse_config_file(args.config)
    return apply_overrides(cfg, args.override)


def _resolve_datasets(cfg):
    sets = {}
    for side in ("x", "z"):
        path_key = f"data.{side}.path"
        if path_key in cfg:
            points = load(cfg[path_key])
            sets[side] = (points, {"path": cfg[path_key]})
        else:
            spec = dataset_spec_from(cfg, side)
            points = generate(spec)
            sets[side] = (
                points,
                {"kind": spec.kind, "n": spec.n, "noise": spec.noise, "seed": spec.seed},
            )
    return sets


def cmd_generate(args) -> int:
    spec = DatasetSpec(kind=args.kind, n=args.n, noise=args.noise, seed=args.seed)
    save(args.out, generate(spec))
    print(f"{args.out} sha256={file_sha256(args.out)}")
    return EXIT_OK


def cmd_train(args) -> int:
    started = time.monotonic()
    cfg = _load_run_inputs(args)
    config = train_config_from(cfg)
    sets = _resolve_datasets(cfg)
    x_data, x_desc = sets["x"]
    z_data, z_desc = sets["z"]

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    model, trace = train(x_data, z_data, config)

    ckpt_path = outdir / "checkpoint.symot"
    trace_path = outdir / "trace.csv"
    figure_path = outdir / "trace.svg"
    save_checkpoint(model, ckpt_path)
    write_trace_csv(trace_path, trace)
    trace_figure(trace, figure_path)

    manifest = RunManifest(
        config=cfg,
        datasets={
            "x": {**x_desc, "sha256": _points_hash(x_data)},
            "z": {**z_desc, "sha256": _points_hash(z_data)},
        },
        outputs={
            "checkpoint": str(ckpt_path),
            "trace_csv": str(trace_path),
            "trace_figure": str(figure_path),
        },
        duration_s=time.monotonic() - started,
        version=__version__,
    )
    manifest.save(outdir / "manifest.json")
    last = trace[-1]
    print(
        f"trained {config.epochs} epochs: total={last.total:.6g} "
        f"mmd_fwd={last.mmd_fwd:.6g} mmd_bwd={last.mmd_bwd:.6g}"
    )
    print(f"checkpoint={ckpt_path}")
    return EXIT_OK


def _points_hash(points: np.ndarray) -> str:
    import hashlib

    return hashlib.sha256(np.ascontiguousarray(points, dtype=np.float64).tobytes()).hexdigest()


def cmd_eval(args) -> int:
    model = load_checkpoint(args.checkpoint)
    x = load(args.x)
    z = load(args.z)
    bank = KernelBank.from_median(x, z)
    report = evaluate(model, bank, x, z)

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(
        outdir / "metrics.csv",
        [(args.dataset, args.method, args.beta, report, args.seed)],
    )
    export_correspondence(model, x, z, outdir / "correspondence.csv")
    if args.svg:
        correspondence_figure(model, x, z, args.svg)
    print(f"ot_fwd={report.ot_fwd:.6g}")
    print(f"ot_bwd={report.ot_bwd:.6g}")
    print(f"mmd_fwd={report.mmd_fwd:.6g}")
    print(f"mmd_bwd={report.mmd_bwd:.6g}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        betas = [float(b) for b in args.betas.split(",") if b.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --betas value: {exc}") from exc
    if not betas:
        raise UsageError("beta list is empty")

    cfg = apply_overrides(parse_config_file(args.config), args.override)
    config = train_config_from(cfg)
    sets = _resolve_datasets(cfg)
    x_data, _ = sets["x"]
    z_data, _ = sets["z"]
    n_test = int(cfg.get("eval.n_test", "2000"))
    seed_offset = int(cfg.get("eval.test_seed_offset", "1000"))
    x_test, z_test = _test_sets(cfg, n_test, seed_offset, x_data, z_data)

    def one(beta):
        return sweep_beta(config, [beta], x_data, z_data, x_test, z_test)[0]

    # Per-point failures are listed at the end; completed rows are kept.
    workers = max(1, int(os.environ.get("SYMOT_THREADS", "1")))
    results: list = [None] * len(betas)
    failures: list[str] = []
    if workers == 1:
        for i, beta in enumerate(betas):
            try:
                results[i] = one(beta)
            except RuntimeError as exc:
                failures.append(str(exc))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(one, b) for b in betas]
            for i, fut in enumerate(futures):
                try:
                    results[i] = fut.result()
                except RuntimeError as exc:
                    failures.append(str(exc))
    rows = [r for r in results if r is not None]

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(outdir / "sweep.csv", rows)
    if rows:
        sweep_figure(rows, outdir / "sweep.svg")
    for beta, ot, mmd in rows:
        print(f"beta={beta:g} ot={ot:.6g} mmd={mmd:.6g}")
    for failure in failures:
        print(failure, file=sys.stderr)
    return EXIT_NUMERIC if failures else EXIT_OK


def _test_sets(cfg, n_test, seed_offset, x_train, z_train):
    """Held-out draws with seeds disjoint from training, same kinds."""
    out = []
    for side, fallback in (("x", x_train), ("z", z_train)):
        if f"data.{side}.kind" in cfg:
            spec = dataset_spec_from(cfg, side)
            test_spec = DatasetSpec(
                kind=spec.kind, n=n_test, noise=spec.noise, seed=spec.seed + seed_offset
            )
            out.append(generate(test_spec))
        else:
            out.append(fallback)
    return out


def cmd_roundtrip(args) -> int:
    model = load_checkpoint(args.checkpoint)
    rng = np.random.Generator(
        np.random.Philox(key=np.random.SeedSequence([args.seed, 0x2B0C]).generate_state(2, np.uint64))
    )
    pts = rng.uniform(-args.box, args.box, size=(args.n, model.dim))
    x = Tensor(pts)
    recon = model.inverse(model.forward(x))
    err = float(np.max(np.abs(recon.data - pts)))
    print(f"max_roundtrip_error={err:.3e}")
    if err > args.tolerance:
        print(f"FAIL: exceeds tolerance {args.tolerance:g}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "roundtrip": cmd_roundtrip,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (MalformedFileError, CheckpointError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (TrainingAbort, NumericError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ShapeError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
