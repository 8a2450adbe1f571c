"""Helpers shared by the CLI commands: config resolution, model fitting, output."""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from conformal_density.bandwidth import (
    DEFAULT_BONFERRONI_SIZE,
    DEFAULT_SPAN,
    DEFAULT_SPLIT_SIZE,
    TuningResult,
    a2_bandwidth,
    conformal_builder,
    default_grid,
    grid_volume,
    tune_bonferroni,
    tune_split,
)
from conformal_density.config import default_threads, load_run_config
from conformal_density.conformal import ConformalModel, RegionKind
from conformal_density.density import Dataset, make_estimate
from conformal_density.errors import ConfigError, ConformalDensityError, exit_code_for
from conformal_density.geometry import GridRegion, rasterize, region_to_json
from conformal_density.geometry import default_grid as region_grid
from conformal_density.io import compute_checksum, format_json, format_json_line, read_points_csv

RUN_DEFAULTS: dict[str, Any] = {
    "alpha": 0.1,
    "tune": False,
    "tuner": "split",
    "grid_span": DEFAULT_SPAN,
    "beta": 1.0,
    "scale": 1.0,
    "seed": 0,
    "kernel": "epanechnikov",
    "header": False,
}


def guarded(action: Callable[[], int]) -> int:
    """Run a command body, turning package errors into printed messages and exit codes."""
    try:
        return action()
    except (ConformalDensityError, FileNotFoundError) as e:
        print(f"❌ ERROR: {e}")
        return exit_code_for(e)


def resolve_settings(config: str | None, flags: dict[str, Any]) -> dict[str, Any]:
    """File values, then flags, then defaults for whatever is still missing."""
    merged = load_run_config(config, flags)
    resolved = {**RUN_DEFAULTS, **merged}
    if resolved.get("tune") and resolved.get("bandwidth") is not None:
        raise ConfigError("bandwidth: a fixed bandwidth cannot be combined with tuning")
    if "threads" not in resolved:
        resolved["threads"] = default_threads()
    return resolved


@dataclass(frozen=True)
class LoadedData:
    path: Path
    dataset: Dataset
    checksum: str

    def describe(self) -> dict[str, Any]:
        return {
            "path": str(self.path),
            "sha256": self.checksum,
            "n": self.dataset.n,
            "d": self.dataset.d,
        }


def load_data(path: str, header: bool, min_rows: int = 2) -> LoadedData:
    points = read_points_csv(path, header=header, min_rows=min_rows)
    return LoadedData(Path(path), Dataset(points), compute_checksum(path))


def tune(data: Dataset, settings: dict[str, Any]) -> TuningResult:
    """Run the configured tuner with grid volumes over every candidate's support."""
    tuner = settings["tuner"]
    m = settings.get("grid_size") or (
        DEFAULT_SPLIT_SIZE if tuner == "split" else DEFAULT_BONFERRONI_SIZE
    )
    candidates = default_grid(
        data.n, data.d, settings["beta"], m, settings["scale"], settings["grid_span"]
    )
    evaluator = grid_volume(
        region_grid(data.points, candidates.candidates[-1], settings.get("grid_res"))
    )
    builder = conformal_builder(settings["kernel"])
    if tuner == "split":
        return tune_split(
            data, candidates, settings["alpha"], builder, evaluator, settings["seed"]
        )
    return tune_bonferroni(data, candidates, settings["alpha"], builder, evaluator)


def fit(data: Dataset, settings: dict[str, Any]) -> tuple[ConformalModel, TuningResult | None]:
    """The model for a run: tuned, explicit bandwidth, or the A2 default."""
    kernel = settings["kernel"]
    if settings.get("tune"):
        result = tune(data, settings)
        return ConformalModel(make_estimate(result.data, result.bandwidth, kernel), result.level), result
    h = settings.get("bandwidth") or a2_bandwidth(data.n, data.d, settings["beta"], settings["scale"])
    return ConformalModel(make_estimate(data, h, kernel), settings["alpha"]), None


def rasterize_model(
    model: ConformalModel, data: Dataset, grid_res: int | None
) -> dict[RegionKind, GridRegion]:
    grid = region_grid(data.points, model.est.bandwidth, grid_res)
    return {kind: rasterize(model.region(kind).contains, grid) for kind in RegionKind}


def model_summary(model: ConformalModel, regions: dict[RegionKind, GridRegion]) -> dict[str, Any]:
    cut = model.cutoffs()
    return {
        "alpha": model.alpha,
        "alpha_tilde": model.alpha_tilde,
        "i_cut": model.i_cut,
        "n_fit": model.n,
        "bandwidth": model.est.bandwidth,
        "kernel": model.est.kernel.family.value,
        "t_minus": cut.t_minus,
        "t_plus": cut.t_plus,
        "degenerate": cut.degenerate,
        "volumes": {kind.value: r.volume for kind, r in regions.items()},
        "touches_boundary": {kind.value: r.touches_boundary for kind, r in regions.items()},
    }


def tuning_summary(result: TuningResult, tuner: str) -> dict[str, Any]:
    return {
        "tuner": tuner,
        "bandwidth": result.bandwidth,
        "level": result.level,
        "n_fit": result.data.n,
        "curve": [{"bandwidth": p.bandwidth, "volume": p.volume} for p in result.curve],
    }


def regions_json(regions: dict[RegionKind, GridRegion]) -> dict[str, Any]:
    return {kind.value: region_to_json(r) for kind, r in regions.items()}


def print_summary(summary: dict[str, Any]) -> None:
    def fmt(x: float) -> str:
        return "-inf" if math.isinf(x) else f"{x:.6g}"

    print(
        f"   alpha={summary['alpha']} alpha_tilde={fmt(summary['alpha_tilde'])} "
        f"i_cut={summary['i_cut']} h={fmt(summary['bandwidth'])}"
    )
    print(f"   t_minus={fmt(summary['t_minus'])} t_plus={fmt(summary['t_plus'])}")
    vols = summary["volumes"]
    print(
        f"   volume inner={fmt(vols['inner'])} conformal={fmt(vols['conformal'])} "
        f"outer={fmt(vols['outer'])}"
    )
    if summary["degenerate"]:
        print(
            "⚠️  WARNING: alpha < 1/(n+1): the level is degenerate and every region "
            "is the whole space"
        )
    for kind, touches in summary["touches_boundary"].items():
        if touches and not summary["degenerate"]:
            print(f"⚠️  WARNING: {kind} region reaches the grid boundary; its volume is truncated")


def emit(text: str, out: str | None) -> None:
    """Write ``text`` to ``out``, or to stdout when no path is given."""
    if out is None:
        print(text, end="")
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def emit_json(data: Any, out: str | None) -> None:
    emit(format_json(data), out)


def provenance(command: str, settings: dict[str, Any], **files: str) -> list[str]:
    """Lines naming the command, each input file with its checksum, the seed and the config."""
    lines = [f"conformal {command}"]
    lines += [f"{role}: {path} sha256={compute_checksum(path)}" for role, path in files.items()]
    lines.append(f"seed: {settings['seed']}")
    lines.append(f"config: {format_json_line(settings)}")
    return lines


def print_provenance(lines: list[str]) -> None:
    for line in lines[1:]:
        print(f"   {line}")
