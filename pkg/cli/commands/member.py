"""Member command: p-values and region membership for query points."""

from __future__ import annotations

from pathlib import Path
from typing import Any

import numpy as np

from cli.commands.common import emit, fit, guarded, load_data, provenance, resolve_settings
from conformal_density.conformal import RegionKind
from conformal_density.errors import InvalidInputError
from conformal_density.geometry import region_from_json
from conformal_density.io import format_csv, format_json_line, load_json, read_points_csv


def _header(d: int) -> list[str]:
    return [*(f"x{j + 1}" for j in range(d)), "pvalue", *(k.value for k in RegionKind)]


def _from_region_file(
    path: str, query: str, header: bool
) -> tuple[list[str], list[list[Any]], dict[str, Any], list[str]]:
    """Membership by cell lookup in a region JSON; p-values are not available.

    A degenerate document answers true everywhere. Queries outside the grid
    are otherwise non-members, which is flagged for regions that reach the
    grid boundary.
    """
    doc = load_json(path)
    if doc.get("command") != "region" or "regions" not in doc:
        raise InvalidInputError(f"{path} is not a region document written by `conformal region`")
    regions = {kind: region_from_json(doc["regions"][kind.value]) for kind in RegionKind}
    grid = regions[RegionKind.CONFORMAL].grid
    points = read_points_csv(query, header=header, min_rows=0, dimension=grid.dimension)
    degenerate = bool(doc.get("summary", {}).get("degenerate", False))

    warnings: list[str] = []
    if degenerate:
        flags = {kind: np.ones(len(points), dtype=np.bool_) for kind in RegionKind}
    else:
        flags = {kind: r.contains(points) for kind, r in regions.items()}
        outside = int(np.count_nonzero(grid.locate(points) < 0)) if len(points) else 0
        truncated = [kind.value for kind, r in regions.items() if r.touches_boundary]
        if outside and truncated:
            warnings.append(
                f"WARNING: {outside} queries lie outside the grid and the "
                f"{', '.join(truncated)} region reaches its boundary; they are reported as non-members"
            )
    rows = [
        [*p.tolist(), None, *(bool(flags[k][i]) for k in RegionKind)]
        for i, p in enumerate(points)
    ]
    return _header(grid.dimension), rows, doc.get("config", {}), warnings


def member_cmd(
    source: str,
    query: str,
    out: str | None = None,
    config: str | None = None,
    **flags: Any,
) -> int:
    """Write one CSV row per query point: coordinates, pi(y) and the three member flags."""

    def body() -> int:
        settings = resolve_settings(config, flags)
        comments = provenance("member", settings, source=source, query=query)
        if Path(source).suffix == ".json":
            header, rows, region_config, warnings = _from_region_file(
                source, query, settings["header"]
            )
            comments += [f"region config: {format_json_line(region_config)}", *warnings]
        else:
            loaded = load_data(source, settings["header"])
            model, _ = fit(loaded.dataset, settings)
            points = read_points_csv(
                query, header=settings["header"], min_rows=0, dimension=model.d
            )
            header = _header(model.d)
            rows = []
            if len(points):
                pvalues = model.pvalues(points)
                flags_by_kind = {k: model.member(k, points) for k in RegionKind}
                rows = [
                    [*p.tolist(), float(pvalues[i]), *(bool(flags_by_kind[k][i]) for k in RegionKind)]
                    for i, p in enumerate(np.asarray(points))
                ]
        emit(format_csv(header, rows, comments) if rows else "", out)
        if out is not None:
            for line in comments:
                if line.startswith("WARNING:"):
                    print(f"⚠️  {line}")
        return 0

    return guarded(body)
