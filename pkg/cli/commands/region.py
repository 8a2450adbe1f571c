"""Region command: conformal region and sandwich sets for a CSV sample."""

from __future__ import annotations

from typing import Any

from cli.commands.common import (
    emit_json,
    fit,
    guarded,
    load_data,
    model_summary,
    print_provenance,
    print_summary,
    provenance,
    rasterize_model,
    regions_json,
    resolve_settings,
    tuning_summary,
)


def region_cmd(
    data: str,
    out: str | None = None,
    config: str | None = None,
    **flags: Any,
) -> int:
    """Build the regions, print a summary and write the region JSON to ``out``."""

    def body() -> int:
        settings = resolve_settings(config, flags)
        loaded = load_data(data, settings["header"])
        model, tuning = fit(loaded.dataset, settings)
        regions = rasterize_model(model, loaded.dataset, settings.get("grid_res"))
        summary = model_summary(model, regions)

        print(f"🔧 Conformal region for {loaded.path} (n={loaded.dataset.n}, d={loaded.dataset.d})")
        if tuning is not None:
            print(f"   tuned bandwidth ({settings['tuner']}): {tuning.bandwidth:.6g}")
        print_summary(summary)
        print_provenance(provenance("region", settings, data=data))

        if out is not None:
            emit_json(
                {
                    "command": "region",
                    "input": loaded.describe(),
                    "config": settings,
                    "summary": summary,
                    "tuning": tuning_summary(tuning, settings["tuner"]) if tuning else None,
                    "regions": regions_json(regions),
                },
                out,
            )
            print(f"✅ Wrote {out}")
        return 0

    return guarded(body)
