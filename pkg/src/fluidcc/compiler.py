"""parse -> place -> route -> mesh -> STL, plus the compile report."""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import __version__
from .errors import Diagnostic, DiagnosticError
from .mesh import MeshWarning, TriMesh
from .netbuild import RoutedNetwork, build_network, network_stats
from .netlist import CircuitParams, Netlist, auto_place, validate_netlist
from .router import RouterParams
from .scene import MeshParams, SceneStats, assemble_scene
from .stl import stl_bytes, write_stl_ascii

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class CompileOptions:
    route_order: str = "source"
    split_rule: str = "nearest"
    keep_going: bool = False
    port_layer: int | None = 1
    mesh: MeshParams = MeshParams()
    # values set here win over the netlist's param lines
    param_overrides: tuple[tuple[str, float], ...] = ()


@dataclass
class CompileResult:
    netlist: Netlist
    network: RoutedNetwork
    shells: list[TriMesh]
    stats: SceneStats
    report: dict
    warnings: list[str] = field(default_factory=list)

    def stl(self) -> bytes:
        return stl_bytes(self.shells)


def check_params(p: CircuitParams) -> list[str]:
    problems = []
    if not p.tube_inner_d > 0:
        problems.append("tube_inner_d must be > 0")
    if not p.tube_outer_d > p.tube_inner_d:
        problems.append("tube_outer_d must be greater than tube_inner_d")
    if p.grid_pitch < p.tube_outer_d + p.clearance - 1e-12:
        problems.append("grid_pitch must be >= tube_outer_d + clearance")
    for name in ("alpha", "beta"):
        v = getattr(p, name)
        if not 0 < v < 1:
            problems.append(f"{name} = {v} out of range: requires 0 < {name} < 1")
    if p.clearance < 0:
        problems.append("clearance must be >= 0")
    return problems


def effective_netlist(n: Netlist, opts: CompileOptions) -> Netlist:
    """Apply option overrides to the netlist parameters and place unplaced gates."""
    if opts.param_overrides:
        n = replace(n, params=replace(n.params, **dict(opts.param_overrides)))
        problems = check_params(n.params)
        if problems:
            raise DiagnosticError([Diagnostic(1, 1, "error", f"command-line override: {p}") for p in problems])
    if not n.is_placed:
        n = n.with_placement(auto_place(n))
    return n


def _net_totals(n: Netlist, net: RoutedNetwork) -> dict:
    totals: dict[str, dict] = {}
    for r in net.routes:
        key = str(r.connection.start)
        t = totals.setdefault(key, {"connections": 0, "explored": 0, "length_mm": 0.0})
        t["connections"] += 1
        t["explored"] += r.explored
        t["length_mm"] = round(t["length_mm"] + r.length_mm, 6)
    return dict(sorted(totals.items()))


def compile_netlist(n: Netlist, opts: CompileOptions | None = None, filename: str = "<input>") -> CompileResult:
    """Run the full pipeline on a parsed netlist.

    Raises :class:`DiagnosticError` if validation finds errors,
    :class:`RoutingError` / :class:`MeshError` / :class:`JunctionError` on
    layout failures.  Mesh warnings are collected into the report.
    """
    opts = opts or CompileOptions()
    timings = {}
    t0 = time.perf_counter()
    n = effective_netlist(n, opts)
    diags = [d for d in validate_netlist(n) if d.severity == "error"]
    if diags:
        raise DiagnosticError(diags, filename)
    timings["place_ms"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    rp = RouterParams(alpha=n.params.alpha, beta=n.params.beta)
    net = build_network(n, rp, order=opts.route_order, split_rule=opts.split_rule,
                        port_layer=opts.port_layer, keep_going=opts.keep_going)
    timings["route_ms"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", MeshWarning)
        shells, stats = assemble_scene(net, n.params, opts.mesh)
    notes = [f"{w.message}" for w in caught if issubclass(w.category, MeshWarning)]
    timings["mesh_ms"] = (time.perf_counter() - t0) * 1e3

    report = {
        "schema_version": SCHEMA_VERSION,
        "tool": f"fluidcc {__version__}",
        "circuit": n.name,
        "config": {
            "params": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(n.params).items()},
            "router": {"alpha": rp.alpha, "beta": rp.beta, "neighborhood": rp.neighborhood, "mode": rp.mode,
                       "route_order": opts.route_order, "split_rule": opts.split_rule,
                       "port_layer": opts.port_layer},
            "mesh": asdict(opts.mesh),
        },
        "placement": {g.name: [g.placement.x, g.placement.y, g.placement.rotation] for g in n.gates},
        "netlist": {"gates": len(n.gates), "connections": len(n.connections),
                    "inputs": len(n.inputs), "outputs": len(n.outputs)},
        "routing": [
            {"connection": str(r.connection), "path_id": r.path_id, "explored": r.explored,
             "frontier_peak": r.frontier_peak, "turns": r.turns, "length_mm": round(r.length_mm, 6),
             "splits": r.splits}
            for r in net.routes
        ],
        "nets": _net_totals(n, net),
        "network": network_stats(net),
        "mesh": {**stats.as_dict(), "stl_bytes": 84 + 50 * stats.triangles},
        "warnings": notes,
        "timings_ms": {k: round(v, 3) for k, v in timings.items()},
    }
    return CompileResult(n, net, shells, stats, report, notes)


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=False) + "\n"


def without_timings(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timings_ms"}


def write_outputs(result: CompileResult, out_dir, stem: str, ascii_stl: bool = False) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stl_path = out / f"{stem}.stl"
    report_path = out / f"{stem}.report.json"
    if ascii_stl:
        write_stl_ascii(result.shells, stl_path, result.netlist.name)
    else:
        stl_path.write_bytes(result.stl())
    report_path.write_text(report_json(result.report))
    return stl_path, report_path
