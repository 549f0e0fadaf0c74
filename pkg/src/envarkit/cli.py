"""Batch front-end: simulate, fit, evaluate, and benchmark subcommands.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical
failure. The log level is taken from the ``ENVAR_KIT_LOG`` environment
variable. Identical manifests and seeds produce byte-identical summary files;
wall-clock timings go to a separate (non-deterministic) sidecar.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.signal import detrend as _linear_detrend

from ._seeding import sub_seed
from .envar_optimizer import EnvarConfig, default_config, solve_envar
from .eqvar_gds import fit_eqvar_gds
from .errors import DataFormatError, EnvarKitError
from .eval_metrics import binarize_cumulative, centralities, score
from .formats import (
    FORMAT_VERSION,
    ExperimentManifest,
    load_manifest,
    manifest_from_dict,
    manifest_to_dict,
    read_model_json,
    read_series_csv,
    read_truth_json,
    score_report_to_dict,
    write_json,
    write_model_json,
    write_series_csv,
    write_truth_json,
)
from .model_core import StructuralModel, TimeSeries
from .reduced_estimation import canonical_representative, center, fit_ols
from .synth import GeneratorConfig, generate_instance

logger = logging.getLogger("envarkit.cli")

SUMMARY_COLUMNS = (
    "p", "sigma_std", "method", "episode",
    "sf_oad", "obs_oad",
    "pearson_phi", "pearson_sigma_u", "pearson_a0", "pearson_a1",
    "error",
)
_METRIC_COLUMNS = (
    "sf_oad", "obs_oad", "pearson_phi", "pearson_sigma_u", "pearson_a0", "pearson_a1",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _sigma_tag(sigma_std: float) -> str:
    return format(float(sigma_std), "g")


def _preprocess(ts: TimeSeries, do_center: bool, do_detrend: bool, do_zscore: bool) -> TimeSeries:
    values = np.array(ts.values, copy=True)
    if do_center:
        values = values - values.mean(axis=1, keepdims=True)
    if do_detrend:
        values = _linear_detrend(values, axis=1, type="linear")
    if do_zscore:
        stds = values.std(axis=1, keepdims=True)
        if np.any(stds <= 0.0):
            raise DataFormatError("cannot z-score: a row has zero variance")
        values = values / stds
    scale = 1.0 + float(np.max(np.abs(values)))
    centered = bool(np.max(np.abs(values.mean(axis=1))) <= 1e-9 * scale)
    return TimeSeries(values=values, centered=centered)


def _envar_config_for(manifest: ExperimentManifest, p: int, run_seed: int) -> EnvarConfig:
    cfg = default_config(p, seed=run_seed)
    overrides = dict(manifest.envar_overrides)
    overrides.setdefault("seed", run_seed)
    return replace(cfg, **overrides)


def _fit_method(
    ts: TimeSeries, method: str, *, ridge_tau: float, alpha: float,
    envar_cfg: EnvarConfig | None,
) -> tuple[StructuralModel, dict]:
    """Fit one method on a preprocessed series; returns the model and a report."""
    fit = fit_ols(ts, ridge_tau=ridge_tau)
    report: dict = {
        "phi_hat": fit.phi_hat,
        "sigma_u_hat": fit.sigma_u_hat,
        "n_eff": fit.n_eff,
        "ridge_tau": fit.ridge_tau,
    }
    if method == "ols-only":
        cr = canonical_representative(fit)
        model = StructuralModel(
            a0=np.eye(cr.p) - cr.b_can, a1=cr.gamma_can, sigma=1.0
        )
    elif method == "envar":
        if envar_cfg is None:
            envar_cfg = default_config(fit.p)
        cr = canonical_representative(fit)
        solution = solve_envar(cr, envar_cfg, series=ts)
        model = solution.model
        report.update(
            objective=solution.objective,
            diag_residual=solution.diag_residual,
            restart_index=solution.restart_index,
            c_hat=solution.c_hat,
            objective_trace=list(solution.objective_trace),
        )
    elif method == "eqvar-gds":
        gds = fit_eqvar_gds(ts, fit, alpha=alpha)
        model = StructuralModel(a0=gds.a0_hat, a1=gds.a1_hat, sigma=1.0)
        report.update(ordering=list(gds.ordering), alpha=gds.alpha)
    else:
        raise UsageError(f"unknown method {method!r}")
    # induced reduced form, recorded without the stability gate so unit-root
    # edge cases still produce a report
    b = model.b
    phi = np.linalg.solve(b, model.a1)
    b_inv = np.linalg.solve(b, np.eye(model.p))
    sigma_u = model.sigma**2 * (b_inv @ b_inv.T)
    report.update(model_phi=phi, model_sigma_u=0.5 * (sigma_u + sigma_u.T))
    return model, report


# ------------------------------------------------------------------ simulate


def _apply_seed_override(manifest: ExperimentManifest, seed: int | None) -> ExperimentManifest:
    if seed is None:
        return manifest
    return replace(manifest, generator=replace(manifest.generator, seed=seed))


def cmd_simulate(args) -> int:
    manifest = _apply_seed_override(load_manifest(args.manifest), args.seed)
    out_root = Path(args.output or manifest.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    for p in manifest.grid_p:
        for sigma_std in manifest.grid_sigma_std:
            cfg = replace(manifest.generator, p=p, sigma_std=sigma_std)
            for episode in range(cfg.episodes):
                inst = generate_instance(
                    cfg, episode, graph_episode=None if manifest.fresh_graph else 0
                )
                run_dir = out_root / f"p{p}_s{_sigma_tag(sigma_std)}_e{episode}"
                run_dir.mkdir(parents=True, exist_ok=True)
                write_series_csv(run_dir / "series.csv", inst.series)
                write_truth_json(run_dir / "truth_model.json", inst, seed=cfg.seed)
                write_json(
                    run_dir / "instance_meta.json",
                    {
                        "format_version": manifest.format_version,
                        "generator": manifest_to_dict(manifest)["generator"] | {
                            "p": p, "sigma_std": sigma_std,
                        },
                        "episode": episode,
                        "fresh_graph": manifest.fresh_graph,
                    },
                )
                logger.info("wrote %s", run_dir)
    return 0


# ----------------------------------------------------------------------- fit


def cmd_fit(args) -> int:
    ts = read_series_csv(args.series)
    ts = _preprocess(ts, args.center, args.detrend, args.zscore)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    envar_cfg = default_config(ts.p, seed=args.seed) if args.method == "envar" else None
    if envar_cfg is not None and args.max_steps is not None:
        envar_cfg = replace(envar_cfg, max_steps=args.max_steps)
    model, report = _fit_method(
        ts, args.method, ridge_tau=args.ridge_tau, alpha=args.alpha, envar_cfg=envar_cfg
    )
    write_model_json(out_dir / "model.json", model, method=args.method)
    write_json(out_dir / "fit_report.json", {"format_version": FORMAT_VERSION, **report})
    logger.info("wrote %s", out_dir / "model.json")
    return 0


# ------------------------------------------------------------------ evaluate


def cmd_evaluate(args) -> int:
    model, meta = read_model_json(args.model)
    truth = read_truth_json(args.truth)
    report = score(model, truth, eta=args.eta, method_name=str(meta.get("method", "")))
    adjacency = binarize_cumulative(model, args.binarize_mass)
    cent = centralities(adjacency)
    payload = score_report_to_dict(report, centrality=cent, binarize_mass=args.binarize_mass)
    out = Path(args.output)
    if out.is_dir():
        out = out / "score.json"
    write_json(out, payload)
    logger.info("wrote %s", out)
    return 0


# ----------------------------------------------------------------- benchmark


def _benchmark_task(payload: dict) -> dict:
    """Run one (p, sigma_std, episode, method) cell; returns a summary row."""
    manifest = manifest_from_dict(payload["manifest"])
    p = payload["p"]
    sigma_std = payload["sigma_std"]
    episode = payload["episode"]
    method = payload["method"]
    out_root = Path(payload["output_dir"])
    row = {
        "p": p, "sigma_std": sigma_std, "method": method, "episode": episode,
        "sf_oad": None, "obs_oad": None, "pearson_phi": None,
        "pearson_sigma_u": None, "pearson_a0": None, "pearson_a1": None,
        "error": "",
    }
    started = time.perf_counter()
    try:
        cfg = replace(manifest.generator, p=p, sigma_std=sigma_std)
        inst = generate_instance(
            cfg, episode, graph_episode=None if manifest.fresh_graph else 0
        )
        ts = center(inst.series)
        run_seed = sub_seed(cfg.seed, p, int(round(sigma_std * 1e9)), episode)
        envar_cfg = _envar_config_for(manifest, p, run_seed) if method == "envar" else None
        alpha = manifest.metrics.alpha
        for spec in manifest.baselines:
            if spec.name == method and "alpha" in spec.params:
                alpha = float(spec.params["alpha"])
        model, fit_report = _fit_method(
            ts, method, ridge_tau=manifest.metrics.ridge_tau, alpha=alpha,
            envar_cfg=envar_cfg,
        )
        report = score(model, inst, eta=manifest.metrics.eta, method_name=method)
        run_dir = out_root / "runs" / f"p{p}_s{_sigma_tag(sigma_std)}_e{episode}" / method
        run_dir.mkdir(parents=True, exist_ok=True)
        write_model_json(run_dir / "model.json", model, method=method)
        adjacency = binarize_cumulative(model, manifest.metrics.binarize_mass)
        write_json(
            run_dir / "score.json",
            score_report_to_dict(
                report,
                centrality=centralities(adjacency),
                binarize_mass=manifest.metrics.binarize_mass,
            ),
        )
        row.update(
            sf_oad=report.sf_oad,
            obs_oad=report.obs_oad,
            pearson_phi=report.pearson_phi,
            pearson_sigma_u=report.pearson_sigma_u,
            pearson_a0=report.pearson_a0,
            pearson_a1=report.pearson_a1,
        )
    except EnvarKitError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["wall_ms"] = (time.perf_counter() - started) * 1000.0
    return row


def _write_rows(path: Path, columns: tuple[str, ...], rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(col)) for col in columns])


def _aggregate(rows: list[dict]) -> list[dict]:
    """Mean and standard error over episodes per (p, sigma_std, method)."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["p"], row["sigma_std"], row["method"]), []).append(row)
    out = []
    for (p, sigma_std, method) in sorted(groups, key=lambda k: (k[0], k[1], k[2])):
        members = groups[(p, sigma_std, method)]
        agg = {"p": p, "sigma_std": sigma_std, "method": method}
        for col in _METRIC_COLUMNS:
            values = [row[col] for row in members if row[col] is not None]
            if values:
                mean = float(np.mean(values))
                sem = (
                    float(np.std(values, ddof=1) / np.sqrt(len(values)))
                    if len(values) > 1
                    else 0.0
                )
            else:
                mean = None
                sem = None
            agg[f"{col}_mean"] = mean
            agg[f"{col}_sem"] = sem
            agg[f"{col}_n"] = len(values)
        out.append(agg)
    return out


def cmd_benchmark(args) -> int:
    if args.jobs < 1:
        raise UsageError(f"--jobs must be >= 1, got {args.jobs}")
    manifest = _apply_seed_override(load_manifest(args.manifest), args.seed)
    out_root = Path(args.output or manifest.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    tasks = [
        {
            "manifest": manifest_to_dict(manifest),
            "output_dir": str(out_root),
            "p": p,
            "sigma_std": sigma_std,
            "episode": episode,
            "method": method,
        }
        for p in manifest.grid_p
        for sigma_std in manifest.grid_sigma_std
        for episode in range(manifest.generator.episodes)
        for method in manifest.methods()
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_benchmark_task, tasks))
    else:
        rows = [_benchmark_task(task) for task in tasks]
    rows.sort(key=lambda r: (r["p"], r["sigma_std"], r["method"], r["episode"]))
    _write_rows(out_root / "summary.csv", SUMMARY_COLUMNS, rows)
    _write_rows(
        out_root / "timings.csv",
        ("p", "sigma_std", "method", "episode", "wall_ms"),
        rows,
    )
    agg_rows = _aggregate([r for r in rows if not r["error"]])
    agg_columns = ["p", "sigma_std", "method"]
    for col in _METRIC_COLUMNS:
        agg_columns += [f"{col}_mean", f"{col}_sem", f"{col}_n"]
    _write_rows(out_root / "aggregate.csv", tuple(agg_columns), agg_rows)
    failures = sum(1 for r in rows if r["error"])
    logger.info(
        "benchmark complete: %d runs, %d failures, summary at %s",
        len(rows), failures, out_root / "summary.csv",
    )
    return 0


# --------------------------------------------------------------------- main


def build_parser() -> _Parser:
    parser = _Parser(prog="envar-kit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate ground-truth instances from a manifest")
    sim.add_argument("--manifest", required=True)
    sim.add_argument("--output", default=None, help="override the manifest output_dir")
    sim.add_argument("--seed", type=int, default=None, help="override the generator seed")
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="estimate a structural model from a series CSV")
    fit.add_argument("--series", required=True)
    fit.add_argument("--method", choices=["envar", "eqvar-gds", "ols-only"], default="envar")
    fit.add_argument("--output", default=".")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--ridge-tau", dest="ridge_tau", type=float, default=0.0)
    fit.add_argument("--alpha", type=float, default=0.05)
    fit.add_argument("--max-steps", dest="max_steps", type=int, default=None)
    fit.add_argument("--center", action=argparse.BooleanOptionalAction, default=True)
    fit.add_argument("--detrend", action=argparse.BooleanOptionalAction, default=False)
    fit.add_argument("--zscore", action=argparse.BooleanOptionalAction, default=False)
    fit.set_defaults(func=cmd_fit)

    ev = sub.add_parser("evaluate", help="score an estimated model against a truth record")
    ev.add_argument("--model", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--output", default="score.json")
    ev.add_argument("--eta", type=float, default=1.0)
    ev.add_argument("--binarize-mass", dest="binarize_mass", type=float, default=0.85)
    ev.set_defaults(func=cmd_evaluate)

    bench = sub.add_parser("benchmark", help="simulate, fit every method, and score over a grid")
    bench.add_argument("--manifest", required=True)
    bench.add_argument("--output", default=None, help="override the manifest output_dir")
    bench.add_argument("--seed", type=int, default=None, help="override the generator seed")
    bench.add_argument("--jobs", type=int, default=1)
    bench.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("ENVAR_KIT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except EnvarKitError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
