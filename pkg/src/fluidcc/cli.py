"""Command-line interface.

Exit codes: 0 success, 1 diagnostics (bad input, file not found, simulation
errors), 2 layout failure (grid, routing or meshing).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, circuits
from .bench import random_scene, run_bench
from .compiler import CompileOptions, compile_netlist, report_json, write_outputs
from .errors import (DiagnosticError, FluidccError, GridError, JunctionError, LibraryError, MeshError, NoPathError,
                     PlacementError, RoutingError, SimulationError, StlError)
from .library import LIBRARY_ENV
from .netbuild import build_network
from .netlist import auto_place, load_netlist, validate_netlist
from .router import RouterParams, find_path
from .scene import MeshParams
from .sim import (SimConfig, build_circuit, event_simulate, measure_frequency, parse_stimulus, topo_evaluate,
                  truth_table, waveform_csv, waveform_json)

EXIT_OK = 0
EXIT_DIAGNOSTICS = 1
EXIT_LAYOUT = 2
SCHEMA_VERSION = 1

log = logging.getLogger("fluidcc")

_PARAM_FLAGS = {
    "pitch": "grid_pitch",
    "tube_inner_d": "tube_inner_d",
    "tube_outer_d": "tube_outer_d",
    "clearance": "clearance",
    "alpha": "alpha",
    "beta": "beta",
}


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def resolve_source(arg: str) -> Path:
    """A file path, or the name of a shipped circuit when no such file exists."""
    p = Path(arg)
    if p.exists() or "/" in arg or os.sep in arg:
        return p
    try:
        return circuits.path(arg)
    except KeyError:
        return p


def _load(arg: str):
    path = resolve_source(arg)
    if not path.is_file():
        raise FileNotFoundError(f"{arg}: error: file not found")
    return load_netlist(path), path


def parse_duration(text: str) -> float:
    m = re.fullmatch(r"\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(s|ms|us)?\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"bad duration {text!r} (use e.g. 2s, 500ms)")
    scale = {"s": 1.0, "ms": 1e-3, "us": 1e-6, None: 1.0}[m.group(2)]
    return float(m.group(1)) * scale


def parse_levels(text: str) -> dict[str, int]:
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        name, sep, value = item.partition("=")
        if not sep or value.strip() not in ("0", "1"):
            raise argparse.ArgumentTypeError(f"bad level assignment {item!r} (use NAME=0 or NAME=1)")
        out[name.strip()] = int(value)
    return out


def _triple(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected i,j,k")
    return tuple(int(p) for p in parts)


# --------------------------------------------------------------------------- commands


def cmd_check(args) -> int:
    n, path = _load(args.netlist)
    diags = validate_netlist(n)
    for d in diags:
        _err(d.format(str(path)))
    if any(d.severity == "error" for d in diags):
        return EXIT_DIAGNOSTICS
    print(f"{path}: ok ({len(n.gates)} gates, {len(n.connections)} connections)")
    return EXIT_OK


def _compile_options(args) -> CompileOptions:
    overrides = tuple((field, getattr(args, flag)) for flag, field in _PARAM_FLAGS.items()
                      if getattr(args, flag) is not None)
    mesh = MeshParams()
    if args.segments is not None:
        mesh = replace(mesh, segments=args.segments)
    return CompileOptions(route_order=args.route_order, split_rule=args.split_rule, keep_going=args.keep_going,
                          mesh=mesh, param_overrides=overrides)


def cmd_compile(args) -> int:
    n, path = _load(args.netlist)
    for d in validate_netlist(n):
        if d.severity == "warning":
            _err(d.format(str(path)))
    try:
        result = compile_netlist(n, _compile_options(args), filename=str(path))
    except RoutingError as exc:
        for f in getattr(exc, "failures", [exc]):
            _err(f"{path}: error: routing failed for {f.connection}: {f}")
        return EXIT_LAYOUT
    for w in result.warnings:
        _err(f"{path}: warning: {w}")
    stl_path, report_path = write_outputs(result, args.output, path.stem, ascii_stl=args.ascii)
    if args.report:
        sys.stdout.write(report_json(result.report))
    else:
        print(f"wrote {stl_path} ({result.stats.triangles} triangles, {result.stats.shells} shells)")
        print(f"wrote {report_path}")
    return EXIT_OK


def cmd_sim(args) -> int:
    n, path = _load(args.netlist)
    if args.truth_table:
        tt = truth_table(n)
        print(json.dumps(tt.as_dict(), indent=2) if args.format == "json" else tt.format())
        return EXIT_OK
    if args.inputs is not None and args.until is None:
        out = topo_evaluate(n, args.inputs)
        for name, v in out.items():
            print(f"{name}={v}")
        return EXIT_OK
    if args.until is None:
        _err("sim: give one of --truth-table, --inputs, or --until")
        return EXIT_DIAGNOSTICS
    overrides = {"horizon": args.until}
    if args.gate_delay is not None:
        overrides["gate_delay"] = args.gate_delay
    cfg = SimConfig.from_params(n.params, **overrides)
    stimulus = [(0.0, k, v) for k, v in (args.inputs or {}).items()]
    if args.stimulus:
        stimulus += parse_stimulus(Path(args.stimulus).read_text())
    circ = build_circuit(n)
    w = event_simulate(n, cfg, stimulus, circ)
    watch = args.watch.split(",") if args.watch else None
    if watch:
        for name in watch:
            if name not in w.changes:
                raise SimulationError(f"--watch: no net named {name!r}")
    text = waveform_json(w, watch) + "\n" if args.format == "json" else waveform_csv(w, watch)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    if args.measure:
        for name in watch or circ.outputs:
            try:
                m = measure_frequency(w, name)
                _err(f"{name}: {m.frequency_hz:.6g} Hz (period {m.period_s:.6g} s, jitter {m.jitter_s:.3g} s, "
                     f"{m.cycles} cycles)")
            except SimulationError as exc:
                _err(f"{name}: {exc}")
    return EXIT_OK


def cmd_bench(args) -> int:
    params = RouterParams(alpha=args.alpha, beta=args.beta)
    result = run_bench(args.scenes, args.seed, args.density, params)
    sys.stdout.write(json.dumps(result, indent=2) + "\n")
    return EXIT_OK


def _search_record(label, path, start, goal) -> dict:
    m = path.metrics
    return {"search": label, "start": list(start), "goal": list(goal), "explored": m.explored_count,
            "frontier_peak": m.frontier_peak, "turns": m.turn_count, "length_mm": round(m.length_mm, 6),
            "cost": round(m.cost, 9), "nodes": [list(p) for p in path.nodes]}


def cmd_route_debug(args) -> int:
    records = []
    if args.scene is not None:
        kind = "flat" if args.scene % 2 == 0 else "3d"
        world, start, goal = random_scene(args.seed, args.scene, kind, args.density)
        modes = ["modified", "standard"] if args.mode == "both" else [args.mode]
        for mode in modes:
            try:
                p = find_path(world, start, goal, RouterParams(args.alpha, args.beta, mode=mode))
            except NoPathError as exc:
                records.append({"search": f"scene {args.scene} {mode}", "error": str(exc)})
                continue
            records.append(_search_record(f"scene {args.scene} {mode}", p, start, goal))
    else:
        if args.netlist is None:
            _err("route-debug: give a netlist or --scene")
            return EXIT_DIAGNOSTICS
        n, path = _load(args.netlist)
        if not n.is_placed:
            n = n.with_placement(auto_place(n))
        try:
            net = build_network(n, order=args.route_order)
        except RoutingError as exc:
            _err(f"{path}: error: routing failed for {exc.connection}: {exc}")
            return EXIT_LAYOUT
        for r in net.routes:
            m = {"search": str(r.connection), "start": list(r.nodes[0]), "goal": list(r.nodes[-1]),
                 "explored": r.explored, "frontier_peak": r.frontier_peak, "turns": r.turns,
                 "length_mm": round(r.length_mm, 6), "splits": r.splits, "nodes": [list(p) for p in r.nodes]}
            records.append(m)
        world = net.world
    if args.voxel_dump:
        Path(args.voxel_dump).write_text(world.voxel_dump())
    sys.stdout.write(json.dumps({"schema_version": SCHEMA_VERSION, "searches": records}, indent=2) + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fluidcc", description="Compile fluidic logic netlists to printable tube networks.",
                                epilog=f"Exit codes: 0 ok, 1 diagnostics, 2 routing/mesh failure. "
                                       f"{LIBRARY_ENV} selects a component library JSON file.")
    p.add_argument("--version", action="version", version=f"fluidcc {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="parse and validate a netlist")
    c.add_argument("netlist")
    c.set_defaults(func=cmd_check)

    c = sub.add_parser("compile", help="route and mesh a netlist into STL")
    c.add_argument("netlist")
    c.add_argument("-o", "--output", default=".", help="output directory (default: .)")
    c.add_argument("--report", action="store_true", help="also print the report JSON to stdout")
    c.add_argument("--ascii", action="store_true", help="write ASCII STL instead of binary")
    c.add_argument("--route-order", choices=("source", "sorted-by-length"), default="source")
    c.add_argument("--split-rule", choices=("nearest", "midpoint"), default="nearest")
    c.add_argument("--keep-going", action="store_true", help="attempt every connection before failing")
    c.add_argument("--segments", type=int)
    for flag in _PARAM_FLAGS:
        c.add_argument("--" + flag.replace("_", "-"), dest=flag, type=float)
    c.set_defaults(func=cmd_compile)

    c = sub.add_parser("sim", help="simulate a netlist")
    c.add_argument("netlist")
    c.add_argument("--truth-table", action="store_true")
    c.add_argument("--inputs", type=parse_levels, help="A=1,B=0 (evaluate, or initial levels with --until)")
    c.add_argument("--until", type=parse_duration, help="event-simulate up to this time, e.g. 2s")
    c.add_argument("--watch", help="comma-separated nets to export")
    c.add_argument("--stimulus", help="CSV of time_s,net,level input changes")
    c.add_argument("--gate-delay", type=parse_duration)
    c.add_argument("--format", choices=("csv", "json"), default="csv")
    c.add_argument("--measure", action="store_true", help="report oscillation frequency of watched nets")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_sim)

    c = sub.add_parser("bench", help="compare modified and standard search on random scenes")
    c.add_argument("--scenes", type=int, default=50)
    c.add_argument("--seed", type=int, default=7)
    c.add_argument("--density", type=float, default=0.2)
    c.add_argument("--alpha", type=float, default=0.5)
    c.add_argument("--beta", type=float, default=0.5)
    c.set_defaults(func=cmd_bench)

    c = sub.add_parser("route-debug", help="JSON record per search, optional voxel dump")
    c.add_argument("netlist", nargs="?")
    c.add_argument("--scene", type=int, help="debug one bench scene instead of a netlist")
    c.add_argument("--seed", type=int, default=7)
    c.add_argument("--density", type=float, default=0.2)
    c.add_argument("--mode", choices=("modified", "standard", "both"), default="both")
    c.add_argument("--alpha", type=float, default=0.5)
    c.add_argument("--beta", type=float, default=0.5)
    c.add_argument("--route-order", choices=("source", "sorted-by-length"), default="source")
    c.add_argument("--voxel-dump", help="write the final occupancy grid as text layers")
    c.set_defaults(func=cmd_route_debug)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        _err(str(exc) if str(exc).endswith("file not found") else f"error: {exc}")
        return EXIT_DIAGNOSTICS
    except DiagnosticError as exc:
        _err(str(exc))
        return EXIT_DIAGNOSTICS
    except (LibraryError, PlacementError, SimulationError, StlError, ValueError) as exc:
        _err(f"error: {exc}")
        return EXIT_DIAGNOSTICS
    except (RoutingError, GridError, MeshError, JunctionError) as exc:
        _err(f"error: {exc}")
        return EXIT_LAYOUT
    except FluidccError as exc:
        _err(f"error: {exc}")
        return EXIT_DIAGNOSTICS


if __name__ == "__main__":
    sys.exit(main())
