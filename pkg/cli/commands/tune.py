"""Tune command: volume-driven bandwidth selection with its (h, volume) curve."""

from __future__ import annotations

from typing import Any

from cli.commands.common import (
    emit,
    emit_json,
    guarded,
    load_data,
    model_summary,
    print_provenance,
    print_summary,
    provenance,
    rasterize_model,
    regions_json,
    resolve_settings,
    tune,
    tuning_summary,
)
from conformal_density.conformal import ConformalModel
from conformal_density.density import make_estimate
from conformal_density.io import format_csv


def tune_cmd(
    data: str,
    out: str | None = None,
    curve: str | None = None,
    config: str | None = None,
    **flags: Any,
) -> int:
    """Pick h, print it with the final region summary, and emit the volume curve CSV."""

    def body() -> int:
        settings = resolve_settings(config, {**flags, "tune": True})
        loaded = load_data(data, settings["header"])
        result = tune(loaded.dataset, settings)
        model = ConformalModel(
            make_estimate(result.data, result.bandwidth, settings["kernel"]), result.level
        )
        regions = rasterize_model(model, loaded.dataset, settings.get("grid_res"))
        summary = model_summary(model, regions)

        lines = provenance("tune", settings, data=data)
        print(f"🔧 Bandwidth tuning ({settings['tuner']}) for {loaded.path}")
        print(f"   chosen h = {result.bandwidth:.6g} at level {result.level:.6g}")
        print_summary(summary)
        print_provenance(lines)

        curve_csv = format_csv(
            ("bandwidth", "volume"), [(p.bandwidth, p.volume) for p in result.curve], lines
        )
        if curve is not None:
            emit(curve_csv, curve)
            print(f"✅ Wrote {curve}")
        else:
            emit(curve_csv, None)

        if out is not None:
            emit_json(
                {
                    "command": "tune",
                    "input": loaded.describe(),
                    "config": settings,
                    "summary": summary,
                    "tuning": tuning_summary(result, settings["tuner"]),
                    "regions": regions_json(regions),
                },
                out,
            )
            print(f"✅ Wrote {out}")
        return 0

    return guarded(body)
