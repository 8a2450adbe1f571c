#!/usr/bin/env python3
"""
Freeze the oracle benchmark volume for a shipped coverage config.

Computes the oracle cutoff, rasterizes the oracle set on a fine grid over the
config's volume box and writes ``conformal_density/configs/benchmark.json``.
Coverage reports compare their oracle volume against this file.

The cutoff is either deterministic grid quadrature (the default, which is how
the shipped file was produced) or a Monte-Carlo order statistic.

Usage: python -m scripts.freeze_benchmark [config] [--resolution R]
       [--cutoff {quadrature,mc}] [--mc-samples N] [--threads T]
"""

import argparse
import sys

from conformal_density.config import load_experiment_config
from conformal_density.errors import ConformalDensityError, exit_code_for
from conformal_density.geometry import Grid
from conformal_density.harness.experiments import (
    BENCHMARK_FILE,
    ExperimentConfig,
    truth_bounds,
)
from conformal_density.io import write_json
from conformal_density.oracle import oracle_region, quadrature_cutoff

DEFAULT_CONFIG = "table1"
DEFAULT_RESOLUTION = 2000
DEFAULT_MC_SAMPLES = 10_000_000
CUTOFF_METHODS = ("quadrature", "mc")


def freeze(
    config: str,
    mc_samples: int,
    threads: int,
    resolution: int = DEFAULT_RESOLUTION,
    method: str = "quadrature",
) -> dict[str, object]:
    data, _ = load_experiment_config(config)
    cfg = ExperimentConfig.from_dict(data)
    if cfg.truth is None:
        raise ConformalDensityError(f"{config} has no [truth] table")
    if cfg.volume.method != "grid":
        raise ConformalDensityError(f"{config} does not use grid volumes")
    if method not in CUTOFF_METHODS:
        raise ConformalDensityError(f"Unknown cutoff method {method!r}")
    lower, upper = truth_bounds(cfg.truth, cfg.volume)
    grid = Grid.uniform(lower, upper, resolution)
    m = cfg.truth.density
    cutoff = quadrature_cutoff(m, cfg.alpha, grid) if method == "quadrature" else None
    region, raster = oracle_region(
        m, cfg.alpha, grid, mc_samples, cfg.seed, threads, cutoff=cutoff
    )
    return {
        "truth": cfg.truth.name,
        "alpha": cfg.alpha,
        "volume": raster.volume,
        "cutoff": region.cutoff.value,
        "cutoff_se": region.cutoff.standard_error,
        "cutoff_method": method,
        "mc_samples": region.cutoff.mc_samples,
        "seed": cfg.seed if method == "mc" else None,
        "grid": {"lower": list(grid.lower), "upper": list(grid.upper), "counts": list(grid.counts)},
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument("config", nargs="?", default=DEFAULT_CONFIG)
    parser.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
    parser.add_argument("--cutoff", choices=CUTOFF_METHODS, default="quadrature")
    parser.add_argument("--mc-samples", type=int, default=DEFAULT_MC_SAMPLES)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()
    try:
        bench = freeze(args.config, args.mc_samples, args.threads, args.resolution, args.cutoff)
    except ConformalDensityError as e:
        print(f"❌ ERROR: {e}")
        return exit_code_for(e)
    write_json(BENCHMARK_FILE, bench)
    print(f"✅ Wrote {BENCHMARK_FILE} (volume {bench['volume']:.6g})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
