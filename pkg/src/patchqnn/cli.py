r"""
patchqnn.cli
============

Command-line entry point.

Subcommands
-----------
``prepare``
    Pool and normalise an MNIST IDX pair into an HDF5 dataset.
``train``
    Train one configuration and write its run directory.
``landscape``
    PCA plane of a finished run and the loss grid on it.
``hessian``
    Largest Hessian eigenvalue at the minimum-loss checkpoint.
``report``
    One table over several run directories.

Every artifact written into a run directory carries the configuration
hash; CSV files carry it through the JSON document written beside them
(``summary.json`` for ``metrics.csv``, ``landscape.json`` for ``landscape.csv``).
Commands reading a run refuse artifacts stamped with another hash.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import time
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from patchqnn.algorithms.hessian.power import (DENSE_MAX_DIM,
                                               dense_hessian_from_hvp,
                                               dominant_eigenvalue, hvp,
                                               power_iteration)
from patchqnn.algorithms.landscape.grid import grid_losses
from patchqnn.algorithms.landscape.pca import pca2
from patchqnn.algorithms.simulator.statevector import set_threads
from patchqnn.system.data import PreparedDataset, load_idx, prepare
from patchqnn.system.model import angles_loss_fn, flat_objective
from patchqnn.system.trainer import train
from patchqnn.utils.config import RunConfig
from patchqnn.utils.exceptions import (EXIT_CODES, ArtifactMismatchError,
                                       ConfigError)
from patchqnn.utils.io import (RunPaths, _load_checkpoint, _load_prepared,
                               _load_trajectory, _read_json,
                               _read_prepared_attrs, _save_checkpoint,
                               _save_prepared, _save_trajectory, _write_json,
                               file_sha256)
from patchqnn.utils.log_config import logger, setup_logging
from patchqnn.utils.printing import (format_hessian, format_ratios,
                                     format_report, format_summary_line,
                                     report_frame)


# Run directory helpers

def _write_csv(df: pd.DataFrame, filepath: str) -> None:
    # header is line 1; the hash travels in the JSON written next to it
    df.to_csv(filepath, index=False)


def _check_hash(found: Optional[str], expected: str, filepath: str) -> None:
    if found != expected:
        raise ArtifactMismatchError(
            f"{filepath} belongs to configuration {str(found)[:12]}, "
            f"run directory has {expected[:12]}"
        )


def _require(filepath: str, what: str) -> str:
    if not os.path.exists(filepath):
        raise ArtifactMismatchError(f"Missing {what}: {filepath}")
    return filepath


def _open_run(run_dir: str) -> Tuple[RunPaths, RunConfig]:
    paths = RunPaths(run_dir)
    doc = _read_json(_require(paths.config, "run configuration"))
    stamped = doc.pop("config_hash", None)
    cfg = RunConfig.from_dict(doc)
    _check_hash(stamped, cfg.config_hash, paths.config)
    return paths, cfg


def _load_dataset(filepath: str, cfg: RunConfig, subset: Optional[int]) -> PreparedDataset:
    dataset, _ = _load_prepared(filepath)
    if dataset.M != cfg.model.M:
        raise ConfigError([f"{filepath} holds {dataset.M}x{dataset.M} images, model.M={cfg.model.M}"])
    return dataset.head(subset)


def _start_logging(args: argparse.Namespace, log_dir: Optional[str] = None) -> None:
    level = logging.DEBUG if args.verbose else logging.INFO
    setup_logging(level=level, save_to_file=log_dir is not None, log_dir=log_dir or "logs")
    if args.threads is not None:
        set_threads(args.threads)


# Subcommands

def cmd_prepare(args: argparse.Namespace) -> int:
    """Pool and normalise an IDX pair; rewrites only when the sources changed."""
    _start_logging(args)
    source = file_sha256(args.images, args.labels)
    if os.path.exists(args.out):
        attrs = _read_prepared_attrs(args.out)
        if attrs["source_checksum"] == source:
            logger.info(f"{args.out} is up to date (checksum {attrs['checksum']})")
            print(attrs["checksum"])
            return 0
        logger.info(f"Sources of {args.out} changed; rewriting")
    raw = load_idx(args.images, args.labels)
    dataset = prepare(raw)
    checksum = _save_prepared(dataset, args.out, source)
    logger.info(f"Wrote {len(dataset)} records of {dataset.M}x{dataset.M} to {args.out}")
    print(checksum)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_file(args.config)
    cfg = cfg.with_overrides(**{
        "train.seed": args.seed,
        "train.restart_period": args.restart_period,
        "data.train_subset": args.subset,
        "data.test_subset": args.subset,
    })
    run_dir = args.out or os.path.join(cfg.output_dir, cfg.run_name)
    paths = RunPaths(run_dir)
    _start_logging(args, paths.logs)
    config_hash = cfg.config_hash
    _write_json({**cfg.to_dict(), "config_hash": config_hash}, paths.config)
    logger.info(f"Run {cfg.run_name} (config {config_hash[:12]}) -> {run_dir}")

    train_set = _load_dataset(cfg.data.train, cfg, cfg.data.train_subset)
    test_set = _load_dataset(cfg.data.test, cfg, cfg.data.test_subset)
    model_cfg = cfg.model_config()
    train_cfg = cfg.train_config(model_cfg, show_progress=not args.quiet)
    meta = {
        "n_qubits": model_cfg.template.n_qubits,
        "depth": model_cfg.template.depth,
        "M": cfg.model.M,
        "P": cfg.model.P,
        "D": cfg.model.stride,
        "seed": cfg.train.seed,
        "config_hash": config_hash,
        "encoding_cz_per_sequence": cfg.model.encoding_cz_per_sequence,
    }

    def on_checkpoint(tag, params, epoch):
        _save_checkpoint(params, paths.checkpoint(tag), {**meta, "epoch": epoch})

    t0 = time.perf_counter()
    log = train(train_cfg, train_set, test_set, on_checkpoint=on_checkpoint)
    seconds = time.perf_counter() - t0

    _write_csv(log.metrics_frame(), paths.metrics)
    _save_trajectory(log.Q, paths.trajectory, config_hash)
    n_params = model_cfg.n_parameters(include_bias=False)
    summary = {
        **log.summary(),
        "n_qc": model_cfg.n_qc,
        "d": cfg.model.d,
        "n_parameters": n_params,
        "n_parameters_with_bias": model_cfg.n_parameters(),
        "seconds": seconds,
        "config_hash": config_hash,
    }
    _write_json(summary, paths.summary)
    logger.info(f"Artifacts written to {run_dir}")
    print(format_summary_line(model_cfg.n_qc, cfg.model.d, n_params, summary))
    return 0


def cmd_landscape(args: argparse.Namespace) -> int:
    paths, cfg = _open_run(args.run_dir)
    _start_logging(args, paths.logs)
    config_hash = cfg.config_hash

    Q, meta = _load_trajectory(_require(paths.trajectory, "trajectory"))
    _check_hash(meta.get("config_hash"), config_hash, paths.trajectory)
    if Q.shape[0] < 3:
        raise ArtifactMismatchError(
            f"Insufficient snapshots: {paths.trajectory} has {Q.shape[0]} rows, need at least 3"
        )
    params, ckpt_meta = _load_checkpoint(_require(paths.checkpoint("min_loss"), "min-loss checkpoint"))
    _check_hash(ckpt_meta.get("config_hash"), config_hash, paths.checkpoint("min_loss"))
    summary = _read_json(_require(paths.summary, "run summary"))
    _check_hash(summary.get("config_hash"), config_hash, paths.summary)

    lcfg = cfg.landscape_config()
    if args.subset is not None:
        lcfg = dataclasses.replace(lcfg, eval_subset=args.subset)
    if args.resolution is not None:
        lcfg = dataclasses.replace(lcfg, resolution=args.resolution)
    if args.workers is not None:
        lcfg = dataclasses.replace(lcfg, workers=args.workers)

    model_cfg = cfg.model_config()
    eval_set = _load_dataset(cfg.data.train, cfg, cfg.data.train_subset).head(lcfg.eval_subset)
    plane = pca2(Q)
    loss_fn = angles_loss_fn(params, eval_set, model_cfg)
    grid = grid_losses(plane, Q, loss_fn, lcfg, min_index=summary["min_loss_epoch"] + 1,
                       show_progress=not args.quiet)

    _write_csv(grid.to_frame(), paths.landscape_csv)
    sidecar = {
        **grid.sidecar(),
        "n_snapshots": int(Q.shape[0]),
        "eval_samples": len(eval_set),
        "options": dataclasses.asdict(lcfg),
        "config_hash": config_hash,
    }
    _write_json(sidecar, paths.landscape_json)
    logger.info(f"Wrote {grid.n_points} grid points to {paths.landscape_csv}")
    print(format_ratios(plane.ratio1, plane.ratio2))
    return 0


def _hessian_batch(dataset: PreparedDataset, size: Optional[int], seed: int) -> Tuple[PreparedDataset, dict]:
    n = len(dataset)
    if size is None or size >= n:
        return dataset, {"size": n, "full": True, "seed": None}
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=size, replace=False))
    return dataset.subset(idx), {"size": size, "full": False, "seed": seed}


def cmd_hessian(args: argparse.Namespace) -> int:
    paths, cfg = _open_run(args.run_dir)
    _start_logging(args, paths.logs)
    config_hash = cfg.config_hash

    ckpt = _require(paths.checkpoint("min_loss"), "min-loss checkpoint")
    params, meta = _load_checkpoint(ckpt)
    _check_hash(meta.get("config_hash"), config_hash, ckpt)

    hcfg = cfg.hessian_config()
    changes = {"scope": args.scope, "batch_size": args.subset, "seed": args.seed}
    hcfg = dataclasses.replace(hcfg, **{k: v for k, v in changes.items() if v is not None})

    model_cfg = cfg.model_config()
    train_set = _load_dataset(cfg.data.train, cfg, cfg.data.train_subset)
    batch, batch_spec = _hessian_batch(train_set, hcfg.batch_size, hcfg.seed)
    theta, _, grad_fn = flat_objective(params, batch, model_cfg, hcfg.scope)
    if args.cross_check and theta.size > DENSE_MAX_DIM:
        raise ConfigError([f"--cross-check needs at most {DENSE_MAX_DIM} parameters, scope {hcfg.scope} has {theta.size}"])

    def hvp_op(v):
        return hvp(grad_fn, theta, v, hcfg.eps)

    logger.info(
        f"Power iteration over {theta.size} parameters ({hcfg.scope}) "
        f"on {batch_spec['size']} samples at epoch {meta.get('epoch')}"
    )
    report = power_iteration(hvp_op, theta.size, hcfg.tol, hcfg.max_iter, hcfg.seed, hcfg.max_restarts)
    report.parameter_scope = hcfg.scope
    report.batch_spec = {**batch_spec, "source": cfg.data.train}
    report.checkpoint_sha256 = file_sha256(ckpt)
    if args.cross_check:
        report.dense_lambda_max = dominant_eigenvalue(dense_hessian_from_hvp(hvp_op, theta.size))
        logger.info(f"Dense cross-check: lambda_max={report.dense_lambda_max:.8e}")

    doc = {**report.to_dict(), "options": dataclasses.asdict(hcfg), "config_hash": config_hash}
    _write_json(doc, paths.hessian_json)
    logger.info(f"Wrote {paths.hessian_json}")
    print(format_hessian(doc))
    return 0


def _report_row(run_dir: str) -> dict:
    paths, cfg = _open_run(run_dir)
    config_hash = cfg.config_hash
    summary = _read_json(_require(paths.summary, "run summary"))
    _check_hash(summary.get("config_hash"), config_hash, paths.summary)
    row = {
        "run": os.path.basename(os.path.normpath(run_dir)),
        "n_qc": summary["n_qc"],
        "d": summary["d"],
        "parameters": summary["n_parameters"],
        "min_loss_epoch": summary["min_loss_epoch"],
        "test_loss": summary["test_loss"],
        "test_acc": summary["test_acc"],
    }
    if os.path.exists(paths.landscape_json):
        land = _read_json(paths.landscape_json)
        _check_hash(land.get("config_hash"), config_hash, paths.landscape_json)
        row.update(pc1=land["ratio1"], pc2=land["ratio2"], pc1_pc2=land["ratio_sum"])
    if os.path.exists(paths.hessian_json):
        hess = _read_json(paths.hessian_json)
        _check_hash(hess.get("config_hash"), config_hash, paths.hessian_json)
        row["lambda_max"] = hess["lambda_max"]
    return row


def cmd_report(args: argparse.Namespace) -> int:
    _start_logging(args)
    df = report_frame(_report_row(run_dir) for run_dir in args.run_dirs)
    print(format_report(df))
    if args.out:
        df.to_csv(args.out, index=False)
        logger.info(f"Report written to {args.out}")
    return 0


# Parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="no progress bars")
    common.add_argument("--threads", type=int, default=None, help="simulator threads (results do not depend on it)")

    parser = argparse.ArgumentParser(prog="patchqnn", description="Distributed patch QNN classifier and loss-landscape analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", parents=[common], help="pool and normalise an MNIST IDX pair")
    p.add_argument("--images", required=True, help="IDX image file")
    p.add_argument("--labels", required=True, help="IDX label file")
    p.add_argument("--out", required=True, help="output HDF5 file")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", parents=[common], help="train one configuration")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default=None, help="run directory (default: <output_dir>/<run name>)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--subset", type=int, default=None, help="use the first N samples of each set")
    p.add_argument("--restart-period", type=int, default=None, help="cosine warm-restart period in epochs")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("landscape", parents=[common], help="loss grid on the trajectory's principal plane")
    p.add_argument("run_dir")
    p.add_argument("--subset", type=int, default=None, help="training samples per loss evaluation")
    p.add_argument("--resolution", type=int, default=None, help="grid points per axis")
    p.add_argument("--workers", type=int, default=None, help="threads over grid points")
    p.set_defaults(func=cmd_landscape)

    p = sub.add_parser("hessian", parents=[common], help="largest Hessian eigenvalue at the min-loss checkpoint")
    p.add_argument("run_dir")
    p.add_argument("--scope", choices=["angles_and_bias", "angles_only"], default=None)
    p.add_argument("--subset", type=int, default=None, help="size of the seeded training subsample")
    p.add_argument("--seed", type=int, default=None, help="seed of the start vector and subsample")
    p.add_argument("--cross-check", action="store_true", help="compare with the dense Hessian (small models)")
    p.set_defaults(func=cmd_hessian)

    p = sub.add_parser("report", parents=[common], help="summary table over run directories")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--out", default=None, help="also write the table as CSV")
    p.set_defaults(func=cmd_report)
    return parser


def exit_code(exc: BaseException) -> int:
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            return code
    return 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        code = exit_code(exc)
        if isinstance(exc, ConfigError):
            logger.error("Invalid configuration:\n  " + "\n  ".join(exc.violations))
        elif code == 1:
            logger.exception(f"{args.command} failed")
        else:
            logger.error(f"{args.command} failed: {exc}")
        return code


if __name__ == "__main__":
    sys.exit(main())
