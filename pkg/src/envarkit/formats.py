"""Versioned on-disk formats: series CSV, model/truth/score JSON, manifests.

JSON artifacts carry ``format_version`` and are written with sorted keys so a
rerun with the same inputs produces byte-identical files. Floats serialize via
their shortest round-trip representation, so write-then-read is exact; NaN is
mapped to null.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DataFormatError
from .model_core import StructuralModel, TimeSeries
from .synth import GeneratorConfig, GroundTruthInstance

FORMAT_VERSION = "envar-kit/1"

KNOWN_METHODS = ("envar", "eqvar-gds", "ols-only")


def _jsonify(obj: Any) -> Any:
    """Convert to plain JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonify(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def write_json(path: Path | str, payload: dict) -> None:
    body = json.dumps(_jsonify(payload), sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(body + "\n", encoding="utf-8")


def read_json(path: Path | str) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"no such file: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(payload, dict):
        raise DataFormatError(f"{path}: expected a JSON object at top level")
    return payload


def _require_version(payload: dict, path: Path | str) -> None:
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise DataFormatError(
            f"{path}: format_version is {version!r}, expected {FORMAT_VERSION!r}"
        )


def _matrix(payload: dict, key: str, path: Path | str) -> np.ndarray:
    if key not in payload:
        raise DataFormatError(f"{path}: missing field {key!r}")
    try:
        arr = np.asarray(payload[key], dtype=float)
    except (TypeError, ValueError):
        raise DataFormatError(f"{path}: field {key!r} is not numeric") from None
    return arr


# ---------------------------------------------------------------- series CSV


def write_series_csv(path: Path | str, ts: TimeSeries) -> None:
    """Header ``t,x1,...,xp``; one row per time step, 1-based time index."""
    values = np.asarray(ts.values)
    p, t_len = values.shape
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["t"] + [f"x{i + 1}" for i in range(p)])
        for t in range(t_len):
            writer.writerow([t + 1] + [repr(float(v)) for v in values[:, t]])


def read_series_csv(path: Path | str) -> TimeSeries:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if not header or header[0] != "t" or len(header) < 2:
            raise DataFormatError(f"{path}: header must be 't,x1,...,xp', got {header}")
        expected = ["t"] + [f"x{i + 1}" for i in range(len(header) - 1)]
        if header != expected:
            raise DataFormatError(f"{path}: header must be {expected}, got {header}")
        p = len(header) - 1
        columns: list[list[float]] = []
        prev_t = None
        for lineno, row in enumerate(reader, start=2):
            if len(row) != p + 1:
                raise DataFormatError(
                    f"{path}: line {lineno}: expected {p + 1} fields, got {len(row)}"
                )
            try:
                t_val = float(row[0])
                vals = [float(v) for v in row[1:]]
            except ValueError:
                raise DataFormatError(f"{path}: line {lineno}: non-numeric value") from None
            if prev_t is not None and t_val <= prev_t:
                raise DataFormatError(f"{path}: line {lineno}: time index must increase")
            if not all(np.isfinite(v) for v in vals):
                raise DataFormatError(f"{path}: line {lineno}: non-finite value")
            prev_t = t_val
            columns.append(vals)
    if len(columns) < 2:
        raise DataFormatError(f"{path}: need at least 2 time steps, got {len(columns)}")
    return TimeSeries(values=np.asarray(columns, dtype=float).T, centered=False)


# -------------------------------------------------------------- model files


def write_model_json(
    path: Path | str, model: StructuralModel, method: str = "", extra: dict | None = None
) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "a0": model.a0,
        "a1": model.a1,
        "sigma": model.sigma,
        "method": method,
    }
    if extra:
        payload.update(extra)
    write_json(path, payload)


def read_model_json(path: Path | str) -> tuple[StructuralModel, dict]:
    payload = read_json(path)
    _require_version(payload, path)
    a0 = _matrix(payload, "a0", path)
    a1 = _matrix(payload, "a1", path)
    if "sigma" not in payload:
        raise DataFormatError(f"{path}: missing field 'sigma'")
    model = StructuralModel(a0=a0, a1=a1, sigma=float(payload["sigma"]))
    return model, payload


def write_truth_json(path: Path | str, inst: GroundTruthInstance, seed: int) -> None:
    write_json(
        path,
        {
            "format_version": FORMAT_VERSION,
            "a0": inst.model.a0,
            "a1": inst.model.a1,
            "sigma": inst.model.sigma,
            "per_node_sigmas": inst.per_node_sigmas,
            "seed": seed,
            "episode": inst.episode_index,
        },
    )


def read_truth_json(path: Path | str) -> GroundTruthInstance:
    payload = read_json(path)
    _require_version(payload, path)
    model = StructuralModel(
        a0=_matrix(payload, "a0", path),
        a1=_matrix(payload, "a1", path),
        sigma=float(payload.get("sigma", 1.0)),
    )
    sigmas = _matrix(payload, "per_node_sigmas", path)
    return GroundTruthInstance(
        model=model,
        per_node_sigmas=sigmas,
        series=None,
        episode_index=int(payload.get("episode", 0)),
    )


# ----------------------------------------------------------------- manifest


@dataclass(frozen=True)
class BaselineSpec:
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class MetricsConfig:
    eta: float = 1.0
    binarize_mass: float = 0.85
    alpha: float = 0.05
    ridge_tau: float = 0.0


@dataclass(frozen=True)
class ExperimentManifest:
    """Everything one benchmark needs, in a single serializable record.

    ``grid_p`` and ``grid_sigma_std`` expand the base generator config into a
    benchmark grid; both default to the base config's single values.
    ``fresh_graph`` draws a new graph each episode (the default); when False
    the episode-0 graph is reused with fresh noise.
    """

    generator: GeneratorConfig
    envar_overrides: dict
    baselines: tuple[BaselineSpec, ...]
    metrics: MetricsConfig
    output_dir: str
    grid_p: tuple[int, ...]
    grid_sigma_std: tuple[float, ...]
    fresh_graph: bool = True
    format_version: str = FORMAT_VERSION

    def methods(self) -> tuple[str, ...]:
        return ("envar",) + tuple(b.name for b in self.baselines)


_GENERATOR_FIELDS = {
    "p", "t_len", "edge_prob", "weight_low", "weight_high", "spectral_cap",
    "sigma_nom", "sigma_std", "seed", "episodes",
}
_ENVAR_FIELDS = {
    "lambda0", "lambda1", "mu", "c_min", "c_max", "learn_rate_base",
    "max_steps", "grad_clip", "seed", "restarts", "convergence_tol", "w_recons",
}
_METRICS_FIELDS = {"eta", "binarize_mass", "alpha", "ridge_tau"}


def manifest_from_dict(payload: dict, source: str = "<manifest>") -> ExperimentManifest:
    _require_version(payload, source)
    gen_raw = payload.get("generator")
    if not isinstance(gen_raw, dict):
        raise DataFormatError(f"{source}: missing or invalid 'generator' object")
    unknown = set(gen_raw) - _GENERATOR_FIELDS
    if unknown:
        raise DataFormatError(f"{source}: unknown generator fields {sorted(unknown)}")
    if "p" not in gen_raw or "t_len" not in gen_raw:
        raise DataFormatError(f"{source}: generator needs at least 'p' and 't_len'")
    try:
        generator = GeneratorConfig(**gen_raw)
    except Exception as exc:
        raise DataFormatError(f"{source}: invalid generator config: {exc}") from None

    envar_raw = payload.get("envar", {})
    if not isinstance(envar_raw, dict):
        raise DataFormatError(f"{source}: 'envar' must be an object of overrides")
    unknown = set(envar_raw) - _ENVAR_FIELDS
    if unknown:
        raise DataFormatError(f"{source}: unknown envar fields {sorted(unknown)}")

    baselines = []
    for i, spec in enumerate(payload.get("baselines", [])):
        if not isinstance(spec, dict) or "name" not in spec:
            raise DataFormatError(f"{source}: baselines[{i}] needs a 'name'")
        name = str(spec["name"])
        if name not in KNOWN_METHODS:
            raise DataFormatError(
                f"{source}: baselines[{i}]: unknown method {name!r}; "
                f"known: {sorted(KNOWN_METHODS)}"
            )
        baselines.append(BaselineSpec(name=name, params=dict(spec.get("params", {}))))

    metrics_raw = payload.get("metrics", {})
    if not isinstance(metrics_raw, dict):
        raise DataFormatError(f"{source}: 'metrics' must be an object")
    unknown = set(metrics_raw) - _METRICS_FIELDS
    if unknown:
        raise DataFormatError(f"{source}: unknown metrics fields {sorted(unknown)}")
    metrics = MetricsConfig(**metrics_raw)

    grid_raw = payload.get("grid", {})
    if not isinstance(grid_raw, dict):
        raise DataFormatError(f"{source}: 'grid' must be an object")
    unknown = set(grid_raw) - {"p", "sigma_std"}
    if unknown:
        raise DataFormatError(f"{source}: unknown grid fields {sorted(unknown)}")
    grid_p = tuple(int(v) for v in grid_raw.get("p", [generator.p]))
    grid_sigma_std = tuple(float(v) for v in grid_raw.get("sigma_std", [generator.sigma_std]))
    if not grid_p or not grid_sigma_std:
        raise DataFormatError(f"{source}: grid lists must be non-empty")

    output_dir = payload.get("output_dir")
    if not isinstance(output_dir, str) or not output_dir:
        raise DataFormatError(f"{source}: missing or invalid 'output_dir'")

    return ExperimentManifest(
        generator=generator,
        envar_overrides=dict(envar_raw),
        baselines=tuple(baselines),
        metrics=metrics,
        output_dir=output_dir,
        grid_p=grid_p,
        grid_sigma_std=grid_sigma_std,
        fresh_graph=bool(payload.get("fresh_graph", True)),
    )


def manifest_to_dict(manifest: ExperimentManifest) -> dict:
    return _jsonify(
        {
            "format_version": manifest.format_version,
            "generator": {
                "p": manifest.generator.p,
                "t_len": manifest.generator.t_len,
                "edge_prob": manifest.generator.edge_prob,
                "weight_low": manifest.generator.weight_low,
                "weight_high": manifest.generator.weight_high,
                "spectral_cap": manifest.generator.spectral_cap,
                "sigma_nom": manifest.generator.sigma_nom,
                "sigma_std": manifest.generator.sigma_std,
                "seed": manifest.generator.seed,
                "episodes": manifest.generator.episodes,
            },
            "envar": manifest.envar_overrides,
            "baselines": [{"name": b.name, "params": b.params} for b in manifest.baselines],
            "metrics": {
                "eta": manifest.metrics.eta,
                "binarize_mass": manifest.metrics.binarize_mass,
                "alpha": manifest.metrics.alpha,
                "ridge_tau": manifest.metrics.ridge_tau,
            },
            "grid": {"p": list(manifest.grid_p), "sigma_std": list(manifest.grid_sigma_std)},
            "fresh_graph": manifest.fresh_graph,
            "output_dir": manifest.output_dir,
        }
    )


def load_manifest(path: Path | str) -> ExperimentManifest:
    return manifest_from_dict(read_json(path), source=str(path))


# -------------------------------------------------------------- score files


def score_report_to_dict(report, centrality=None, binarize_mass=None) -> dict:
    payload = {
        "format_version": FORMAT_VERSION,
        "sf_oad": report.sf_oad,
        "obs_oad": report.obs_oad,
        "pearson_phi": report.pearson_phi,
        "pearson_sigma_u": report.pearson_sigma_u,
        "pearson_a0": report.pearson_a0,
        "pearson_a1": report.pearson_a1,
        "p_values": {
            "phi": report.p_value_phi,
            "sigma_u": report.p_value_sigma_u,
            "a0": report.p_value_a0,
            "a1": report.p_value_a1,
        },
        "method_name": report.method_name,
        "p": report.p,
        "episode": report.episode,
    }
    if centrality is not None:
        payload["centralities"] = {
            "in_degree": centrality.in_degree,
            "out_degree": centrality.out_degree,
            "net_flow": centrality.net_flow,
        }
        payload["binarize_mass"] = binarize_mass
    return _jsonify(payload)
