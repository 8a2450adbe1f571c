"""Simulate command - thin wrapper around the experiment harness."""

from __future__ import annotations

import os
from dataclasses import replace

from cli.commands.common import guarded
from conformal_density.config import THREADS_ENV, default_threads, load_experiment_config
from conformal_density.harness import ExperimentConfig, run_experiment, write_report
from conformal_density.harness.runner import print_report

DEFAULT_OUT_DIR = "reports"


def simulate_cmd(
    config: str,
    repetitions: int | None = None,
    seed: int | None = None,
    threads: int | None = None,
    out: str | None = None,
    timing: bool = False,
    log: bool = False,
) -> int:
    """Run a config (path or shipped name) and write ``<name>.json`` / ``<name>.csv``."""

    def body() -> int:
        data, path = load_experiment_config(
            config,
            {"experiment.repetitions": repetitions, "experiment.seed": seed},
        )
        # threads are resolved here and kept out of the echoed config
        file_threads = data["experiment"].pop("threads", None)
        cfg = ExperimentConfig.from_dict(data)
        workers = threads
        if workers is None:
            workers = default_threads() if os.environ.get(THREADS_ENV) else (file_threads or 1)
        cfg = replace(cfg, threads=workers)

        print(f"🔧 Running {cfg.kind} experiment {cfg.name!r} from {path} ({workers} worker(s))")
        report = run_experiment(cfg)
        code = print_report(report)
        written = write_report(report, out or DEFAULT_OUT_DIR, timing=timing, log=log)
        for p in written:
            print(f"✅ Wrote {p}")
        return code

    return guarded(body)
