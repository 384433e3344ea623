"""Command-line front end: turn a case file, bus coordinates, historical
parameters and a config into per-cell/aggregate loss CSVs, per-line exposure
CSVs, a reproducibility manifest, and optional GeoJSON snapshots.

All CSV numbers are written with 6 significant digits and a ``.`` decimal
separator, independent of locale.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .engine import LossTable, run_simulation
from .geo import GeoPoint, LocalPoint, unproject_local
from .grid import GridModel, load_geo, parse_case
from .impact import FragilityCurve, LineExposure, exposure_for_step
from .scenario import (
    SimulationConfig,
    Track,
    build_tracks,
    default_bearings,
    generate_scenarios,
    load_history,
    load_tracks,
)
from .windfield import HurricaneScenario, WindFieldParams, decay_pressure

LOSSES_HEADER = ("t_hours", "track_id", "hurricane_id", "loss_avg_mw", "n_trials")
AGGREGATE_HEADER = ("t_hours", "loss_mw")
EXPOSURES_HEADER = ("t_hours", "track_id", "hurricane_id", "branch_id", "gamma_kt", "p_out")
SCENARIOS_HEADER = ("h", "t_hours", "v_max_kt", "r_vmax_nmi", "r_s_nmi", "delta_p")

RING_VERTICES = 64

# Flat "key = value" config file: exactly these keys, missing keys default.
_CONFIG_CASTS = {
    "landfall_lat": float,
    "landfall_lon": float,
    "time_steps": lambda s: tuple(float(v) for v in s.split(",")),
    "n_hurricanes": int,
    "n_tracks": int,
    "decay_alpha": float,
    "shape_k": float,
    "boundary_beta": float,
    "size_growth_rate": float,
    "trials_per_cell": int,
    "master_seed": int,
    "v_cri": float,
    "v_col": float,
    "translational_speed": float,
}


def fmt(value: float) -> str:
    """Fixed CSV number format: 6 significant digits."""
    return format(value, ".6g")


def parse_config_text(text: str) -> SimulationConfig:
    """Build a SimulationConfig from flat ``key = value`` lines.

    Blank lines and ``#`` comments are allowed; an unknown key is an error
    (it is almost certainly a typo).
    """
    raw: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {line_no}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in _CONFIG_CASTS:
            raise ValueError(f"config line {line_no}: unknown key {key!r}")
        if key in raw:
            raise ValueError(f"config line {line_no}: duplicate key {key!r}")
        raw[key] = value.strip()
    fields: dict = {}
    for key, value in raw.items():
        try:
            fields[key] = _CONFIG_CASTS[key](value)
        except ValueError:
            raise ValueError(f"config key {key!r}: cannot parse value {value!r}") from None
    lat = fields.pop("landfall_lat", None)
    lon = fields.pop("landfall_lon", None)
    defaults = SimulationConfig()
    landfall = GeoPoint(
        lat if lat is not None else defaults.landfall.lat,
        lon if lon is not None else defaults.landfall.lon,
    )
    return SimulationConfig(landfall=landfall, **fields)


def config_as_dict(config: SimulationConfig) -> dict:
    """Flat snapshot of a config, matching the config-file key set."""
    return {
        "landfall_lat": config.landfall.lat,
        "landfall_lon": config.landfall.lon,
        "time_steps": list(config.time_steps),
        "n_hurricanes": config.n_hurricanes,
        "n_tracks": config.n_tracks,
        "decay_alpha": config.decay_alpha,
        "shape_k": config.shape_k,
        "boundary_beta": config.boundary_beta,
        "size_growth_rate": config.size_growth_rate,
        "trials_per_cell": config.trials_per_cell,
        "master_seed": config.master_seed,
        "v_cri": config.v_cri,
        "v_col": config.v_col,
        "translational_speed": config.translational_speed,
    }


def write_losses_csv(table: LossTable, config: SimulationConfig) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(LOSSES_HEADER)
    cells = {(c.track_id, c.hurricane_id): c for c in table.cells}
    for t in config.time_steps:
        for zeta in range(1, config.n_tracks + 1):
            for h in range(1, config.n_hurricanes + 1):
                cell = cells[(zeta, h)]
                writer.writerow(
                    [fmt(t), zeta, h, fmt(cell.loss_avg_by_step[t]), cell.n_trials]
                )
    return out.getvalue()


def write_aggregate_csv(table: LossTable, config: SimulationConfig) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(AGGREGATE_HEADER)
    for t in config.time_steps:
        writer.writerow([fmt(t), fmt(table.aggregate_by_step[t])])
    return out.getvalue()


def write_exposures_csv(
    grid: GridModel,
    scenarios: Sequence[HurricaneScenario],
    tracks: Sequence[Track],
    curve: FragilityCurve,
    config: SimulationConfig,
) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(EXPOSURES_HEADER)
    for t in config.time_steps:
        for track in tracks:
            for scenario in scenarios:
                exposures = exposure_for_step(
                    grid, scenario.params_by_step[t], track.eye_at(t), curve
                )
                for e in exposures:
                    writer.writerow(
                        [fmt(t), track.id, scenario.id, e.branch_id, fmt(e.gamma), fmt(e.p_out)]
                    )
    return out.getvalue()


def write_scenarios_csv(scenarios: Sequence[HurricaneScenario]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SCENARIOS_HEADER)
    for s in scenarios:
        for t in s.time_steps:
            p = s.params_by_step[t]
            writer.writerow(
                [
                    s.id,
                    fmt(t),
                    fmt(p.v_max),
                    fmt(p.r_vmax),
                    fmt(p.r_s),
                    fmt(decay_pressure(s.delta_p0, s.alpha, t)),
                ]
            )
    return out.getvalue()


def load_scenarios_csv(text, config: SimulationConfig) -> list[HurricaneScenario]:
    """Rebuild hurricane scenarios from a scenarios.csv written by
    gen-scenarios; the file is the source of truth for the parameters."""
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("scenarios CSV is empty") from None
    if tuple(h.strip() for h in header) != SCENARIOS_HEADER:
        raise ValueError(
            f"scenarios CSV header must be {','.join(SCENARIOS_HEADER)}, got {','.join(header)}"
        )
    rows: dict[int, dict[float, tuple[float, float, float, float]]] = {}
    for i, raw in enumerate(reader, start=1):
        if not raw or all(not cell.strip() for cell in raw):
            continue
        if len(raw) != 6:
            raise ValueError(f"scenarios row {i}: expected 6 fields, got {len(raw)}")
        try:
            h = int(raw[0])
            t = float(raw[1])
            v_max, r_vmax, r_s, delta_p = (float(v) for v in raw[2:])
        except ValueError as exc:
            raise ValueError(f"scenarios row {i}: {exc}") from None
        if t in rows.setdefault(h, {}):
            raise ValueError(f"scenarios row {i}: duplicate (h={h}, t={t})")
        rows[h][t] = (v_max, r_vmax, r_s, delta_p)
    ids = sorted(rows)
    if ids != list(range(1, config.n_hurricanes + 1)):
        raise ValueError(
            f"scenarios CSV must cover hurricanes 1..{config.n_hurricanes}, got ids {ids}"
        )
    scenarios = []
    for h in ids:
        steps = rows[h]
        for t in config.time_steps:
            if t not in steps:
                raise ValueError(f"scenarios CSV: hurricane {h} is missing t={t}")
        params_by_step = {
            t: WindFieldParams(
                v_max=steps[t][0],
                r_vmax=steps[t][1],
                r_s=steps[t][2],
                k=config.shape_k,
                beta=config.boundary_beta,
            )
            for t in config.time_steps
        }
        delta_p0 = steps[0.0][3]
        scenarios.append(
            HurricaneScenario(h, params_by_step[0.0], delta_p0, config.decay_alpha, params_by_step)
        )
    return scenarios


def export_geojson(
    grid: GridModel,
    exposures: Sequence[LineExposure],
    eye: GeoPoint,
    params: WindFieldParams,
) -> str:
    """GeoJSON FeatureCollection for one hurricane snapshot.

    One LineString per branch (with branch_id, gamma_kt, p_out properties),
    the eye as a Point, and counterclockwise 64-gon rings at r_vmax and r_s;
    coordinates are [lon, lat] per the GeoJSON convention.
    """
    if not grid.located:
        raise ValueError("grid has no coordinates; load them before exporting")
    by_id = {e.branch_id: e for e in exposures}
    features = []
    for br in grid.branches:
        e = by_id[br.id]
        a = grid.bus_by_id[br.from_bus].location
        b = grid.bus_by_id[br.to_bus].location
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [[a.lon, a.lat], [b.lon, b.lat]],
                },
                "properties": {"branch_id": br.id, "gamma_kt": e.gamma, "p_out": e.p_out},
            }
        )
    features.append(
        {
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [eye.lon, eye.lat]},
            "properties": {"role": "eye"},
        }
    )
    for radius, role in ((params.r_vmax, "r_vmax"), (params.r_s, "r_s")):
        ring = []
        for i in range(RING_VERTICES):
            theta = 2.0 * math.pi * i / RING_VERTICES
            point = unproject_local(
                eye, LocalPoint(radius * math.cos(theta), radius * math.sin(theta))
            )
            ring.append([point.lon, point.lat])
        ring.append(list(ring[0]))
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {"role": role, "radius_nmi": radius},
            }
        )
    return json.dumps({"type": "FeatureCollection", "features": features}, indent=1)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _resolve_out_dir(arg: str | None) -> Path:
    if arg:
        out = Path(arg)
        out.mkdir(parents=True, exist_ok=True)
        return out
    base = Path("runs")
    stamp = datetime.now(timezone.utc).strftime("run-%Y%m%d-%H%M%S")
    out = base / stamp
    suffix = 1
    while out.exists():
        suffix += 1
        out = base / f"{stamp}-{suffix}"
    out.mkdir(parents=True)
    return out


def _load_config(args) -> SimulationConfig:
    if args.config:
        config = parse_config_text(Path(args.config).read_text(encoding="utf-8"))
    else:
        config = SimulationConfig()
    if getattr(args, "seed", None) is not None:
        config = replace(config, master_seed=args.seed)
    if getattr(args, "trials", None) is not None:
        config = replace(config, trials_per_cell=args.trials)
    return config


def _tracks_for_run(args, config: SimulationConfig) -> list[Track]:
    if args.tracks:
        tracks = load_tracks(Path(args.tracks).read_text(encoding="utf-8"))
        if len(tracks) != config.n_tracks:
            raise ValueError(
                f"track file has {len(tracks)} tracks but config n_tracks={config.n_tracks}"
            )
        for track in tracks:
            start = track.eye_at(0.0)
            if (
                abs(start.lat - config.landfall.lat) > 1e-6
                or abs(start.lon - config.landfall.lon) > 1e-6
            ):
                raise ValueError(
                    f"track {track.id} starts at ({start.lat}, {start.lon}), "
                    f"not at the configured landfall "
                    f"({config.landfall.lat}, {config.landfall.lon})"
                )
            missing = [t for t in config.time_steps if t not in track.times]
            if missing:
                raise ValueError(f"track {track.id} is missing time steps {missing}")
        return tracks
    return build_tracks(config, default_bearings(config.n_tracks))


def cmd_simulate(args) -> int:
    started = time.monotonic()
    config = _load_config(args)

    case_path = Path(args.case)
    coords_path = Path(args.coords)
    grid = parse_case(case_path.read_text(encoding="utf-8"))
    grid = load_geo(coords_path.read_text(encoding="utf-8"), grid)
    exposed = len(grid.branches) - len(grid.wind_exempt_branch_ids())
    print(
        f"grid: {len(grid.buses)} buses, {len(grid.branches)} branches "
        f"({exposed} wind-exposed), {len(grid.generators)} generators, "
        f"{fmt(grid.total_gen_mw)} MW capacity, {grid.n_loads} loads "
        f"totaling {fmt(grid.total_load_mw)} MW"
    )

    inputs = {"case": case_path, "coords": coords_path}
    if args.scenarios:
        scen_path = Path(args.scenarios)
        scenarios = load_scenarios_csv(scen_path.read_text(encoding="utf-8"), config)
        inputs["scenarios"] = scen_path
    else:
        if not args.history:
            raise ValueError("either --history or --scenarios is required")
        hist_path = Path(args.history)
        history = load_history(hist_path.read_text(encoding="utf-8"), source_note=str(hist_path))
        scenarios = generate_scenarios(config, history, np.random.default_rng(config.master_seed))
        inputs["history"] = hist_path
    if args.tracks:
        inputs["tracks"] = Path(args.tracks)
    if args.config:
        inputs["config"] = Path(args.config)

    tracks = _tracks_for_run(args, config)
    curve = FragilityCurve(config.v_cri, config.v_col)

    table = run_simulation(
        grid, scenarios, tracks, curve, config, workers=args.workers, early_stop=args.early_stop
    )

    out_dir = _resolve_out_dir(args.out_dir)
    (out_dir / "losses.csv").write_text(write_losses_csv(table, config), encoding="utf-8")
    (out_dir / "aggregate.csv").write_text(write_aggregate_csv(table, config), encoding="utf-8")
    (out_dir / "exposures.csv").write_text(
        write_exposures_csv(grid, scenarios, tracks, curve, config), encoding="utf-8"
    )
    (out_dir / "scenarios.csv").write_text(write_scenarios_csv(scenarios), encoding="utf-8")
    outputs = ["losses.csv", "aggregate.csv", "exposures.csv", "scenarios.csv"]

    if args.geojson:
        geo_dir = out_dir / "geojson"
        geo_dir.mkdir(exist_ok=True)
        for track in tracks:
            for scenario in scenarios:
                for t in config.time_steps:
                    exposures = exposure_for_step(
                        grid, scenario.params_by_step[t], track.eye_at(t), curve
                    )
                    name = f"t{fmt(t)}_track{track.id}_h{scenario.id}.geojson"
                    (geo_dir / name).write_text(
                        export_geojson(
                            grid, exposures, track.eye_at(t), scenario.params_by_step[t]
                        ),
                        encoding="utf-8",
                    )
        outputs.append("geojson/")

    manifest = {
        "tool": "stormgrid",
        "version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "duration_seconds": time.monotonic() - started,
        "master_seed": config.master_seed,
        "config": config_as_dict(config),
        "inputs": {
            name: {"path": str(path), "sha256": _sha256(path)} for name, path in inputs.items()
        },
        "outputs": outputs,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    print(f"wrote {out_dir}")
    return 0


def cmd_gen_scenarios(args) -> int:
    config = _load_config(args)
    hist_path = Path(args.history)
    history = load_history(hist_path.read_text(encoding="utf-8"), source_note=str(hist_path))
    scenarios = generate_scenarios(config, history, np.random.default_rng(config.master_seed))
    out_path = Path(args.out)
    if out_path.parent and not out_path.parent.exists():
        out_path.parent.mkdir(parents=True)
    out_path.write_text(write_scenarios_csv(scenarios), encoding="utf-8")
    print(f"wrote {out_path} ({len(scenarios)} hurricanes x {len(config.time_steps)} steps)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stormgrid",
        description="Hurricane wind-field simulation over a geo-referenced transmission grid",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the Monte-Carlo loss simulation")
    sim.add_argument("--case", required=True, help="MATPOWER-style case file")
    sim.add_argument("--coords", required=True, help="bus coordinates CSV")
    sim.add_argument("--history", help="historical hurricane parameters CSV")
    sim.add_argument("--scenarios", help="reuse a scenarios.csv instead of sampling")
    sim.add_argument("--config", help="flat key=value config file")
    sim.add_argument("--seed", type=int, help="override master_seed")
    sim.add_argument("--trials", type=int, help="override trials_per_cell")
    sim.add_argument("--tracks", help="track CSV overriding the generated tracks")
    sim.add_argument("--out-dir", help="output directory (default: timestamped under runs/)")
    sim.add_argument("--geojson", action="store_true", help="write per-snapshot GeoJSON files")
    sim.add_argument("--workers", type=int, help="worker processes (default: hardware)")
    sim.add_argument(
        "--early-stop",
        action="store_true",
        help="stop a cell once its running mean converged (default: fixed trial count)",
    )
    sim.set_defaults(func=cmd_simulate)

    gen = sub.add_parser("gen-scenarios", help="sample hurricanes and write scenarios.csv")
    gen.add_argument("--history", required=True, help="historical hurricane parameters CSV")
    gen.add_argument("--config", help="flat key=value config file")
    gen.add_argument("--seed", type=int, required=True, help="master seed")
    gen.add_argument("--out", default="scenarios.csv", help="output CSV path")
    gen.set_defaults(func=cmd_gen_scenarios)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # single-line diagnostic, nonzero exit
        print(f"stormgrid: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
