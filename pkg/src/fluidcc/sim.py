"""Gate-level logic simulation.

Levels are binary: 1 means supply pressure is present, 0 atmospheric.  Time
runs in integer ticks (1 µs by default) so periods come out exact.
"""

from __future__ import annotations

import csv
import heapq
import io
import itertools
import json
import math
from dataclasses import dataclass, field

from .errors import CycleError, NoOscillationError, SimulationError
from .library import ARITY
from .netlist import CircuitParams, Netlist, Terminal

SCHEMA_VERSION = 1
MAX_TRUTH_TABLE_INPUTS = 20


def eval_gate(behavior: str, inputs) -> int:
    """Output level of one gate.  INHIBIT(a, b) is ``a and not b``: b inhibits."""
    inputs = tuple(int(v) for v in inputs)
    if behavior not in ARITY:
        raise SimulationError(f"unknown behavior {behavior!r}")
    if len(inputs) != ARITY[behavior][0]:
        raise SimulationError(f"{behavior} takes {ARITY[behavior][0]} input(s), got {len(inputs)}")
    if any(v not in (0, 1) for v in inputs):
        raise SimulationError(f"levels must be 0 or 1, got {inputs}")
    if behavior == "NOT":
        return 1 - inputs[0]
    if behavior == "AND":
        return inputs[0] & inputs[1]
    if behavior == "OR":
        return inputs[0] | inputs[1]
    if behavior == "INHIBIT":
        return inputs[0] & (1 - inputs[1])
    if behavior == "SOURCE":
        return 1
    raise SimulationError(f"{behavior} has no output")


# --------------------------------------------------------------------------- circuit model


@dataclass(frozen=True)
class SimGate:
    name: str
    type_name: str
    behavior: str
    inputs: tuple[int, ...]  # net indices, -1 for an unconnected input
    output: int | None


@dataclass
class SimCircuit:
    """Nets are the signal drivers (external inputs and gate outputs), sorted
    by name; their index is the net id used to order simultaneous events."""

    nets: list[str]
    gates: list[SimGate]
    inputs: list[str]  # external inputs in declared order
    outputs: list[str]  # external outputs and probes in declared order
    aliases: dict[str, int]  # output / probe name -> driving net
    readers: list[list[int]] = field(default_factory=list)

    def net_index(self, name: str) -> int:
        if name in self.aliases:
            return self.aliases[name]
        try:
            return self.nets.index(name)
        except ValueError:
            raise SimulationError(f"no net named {name!r}") from None


def build_circuit(n: Netlist) -> SimCircuit:
    lib = n.library
    drivers = [t.name for t in n.inputs]
    for g in n.gates:
        gt = lib.gate_type(g.type_name)
        drivers += [f"{g.name}.{p}" for p in gt.outputs]
    nets = sorted(drivers)
    index = {name: i for i, name in enumerate(nets)}
    feeds: dict[Terminal, int] = {}
    for c in n.connections:
        feeds[c.end] = index[str(c.start)]
    gates = []
    aliases = {}
    for g in n.gates:
        gt = lib.gate_type(g.type_name)
        ins = tuple(feeds.get(Terminal(g.name, p), -1) for p in gt.inputs)
        out = index[f"{g.name}.{gt.outputs[0]}"] if gt.outputs else None
        gates.append(SimGate(g.name, g.type_name, gt.behavior, ins, out))
        if gt.behavior == "PROBE" and ins[0] >= 0:
            aliases[g.name] = ins[0]
    outputs = []
    for t in n.outputs:
        outputs.append(t.name)
        if Terminal(t.name) in feeds:
            aliases[t.name] = feeds[Terminal(t.name)]
    outputs += [g.name for g in gates if g.behavior == "PROBE"]
    readers = [[] for _ in nets]
    for gi, g in enumerate(gates):
        for i in sorted(set(g.inputs)):
            if i >= 0:
                readers[i].append(gi)
    return SimCircuit(nets, gates, [t.name for t in n.inputs], outputs, aliases, readers)


def _gate_value(g: SimGate, levels) -> int | None:
    if g.output is None:
        return None
    return eval_gate(g.behavior, [levels[i] if i >= 0 else 0 for i in g.inputs])


def _topo_order(circ: SimCircuit) -> list[int]:
    indeg = [0] * len(circ.gates)
    drives = {g.output: gi for gi, g in enumerate(circ.gates) if g.output is not None}
    succ = [[] for _ in circ.gates]
    for gi, g in enumerate(circ.gates):
        for i in set(g.inputs):
            if i in drives:
                succ[drives[i]].append(gi)
                indeg[gi] += 1
    ready = [gi for gi in range(len(circ.gates)) if indeg[gi] == 0]
    order = []
    while ready:
        gi = ready.pop(0)
        order.append(gi)
        for s in succ[gi]:
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
    if len(order) != len(circ.gates):
        stuck = sorted(circ.gates[gi].name for gi in range(len(circ.gates)) if indeg[gi] > 0)
        raise CycleError(f"netlist has a feedback loop through {', '.join(stuck)}; "
                         "combinational evaluation is undefined, use event simulation (sim --until)")
    return order


def _input_levels(circ: SimCircuit, inputs: dict) -> list[int]:
    missing = [name for name in circ.inputs if name not in inputs]
    if missing:
        raise SimulationError(f"missing input level(s): {', '.join(missing)}")
    unknown = sorted(set(inputs) - set(circ.inputs))
    if unknown:
        raise SimulationError(f"not an input: {', '.join(unknown)}")
    levels = [0] * len(circ.nets)
    for name, v in inputs.items():
        if int(v) not in (0, 1):
            raise SimulationError(f"input {name} must be 0 or 1, got {v!r}")
        levels[circ.net_index(name)] = int(v)
    return levels


def topo_evaluate(n: Netlist, inputs: dict, circuit: SimCircuit | None = None) -> dict[str, int]:
    """Evaluate an acyclic netlist once in topological order; returns output levels."""
    circ = circuit or build_circuit(n)
    order = _topo_order(circ)
    levels = _input_levels(circ, inputs)
    for gi in order:
        g = circ.gates[gi]
        if g.output is not None:
            levels[g.output] = _gate_value(g, levels)
    return {name: levels[circ.aliases[name]] if name in circ.aliases else 0 for name in circ.outputs}


@dataclass
class TruthTable:
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    rows: list[tuple[tuple[int, ...], tuple[int, ...]]]

    def format(self) -> str:
        head = " ".join(self.inputs) + " | " + " ".join(self.outputs)
        lines = [head, "-" * len(head)]
        for ins, outs in self.rows:
            left = " ".join(str(v).rjust(len(name)) for v, name in zip(ins, self.inputs))
            right = " ".join(str(v).rjust(len(name)) for v, name in zip(outs, self.outputs))
            lines.append(f"{left} | {right}")
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "inputs": list(self.inputs), "outputs": list(self.outputs),
                "rows": [{"in": list(i), "out": list(o)} for i, o in self.rows]}


def truth_table(n: Netlist) -> TruthTable:
    """All input combinations, first declared input as the most significant bit."""
    circ = build_circuit(n)
    if len(circ.inputs) > MAX_TRUTH_TABLE_INPUTS:
        raise SimulationError(f"{len(circ.inputs)} inputs exceed the truth-table limit of {MAX_TRUTH_TABLE_INPUTS}")
    _topo_order(circ)
    rows = []
    for bits in itertools.product((0, 1), repeat=len(circ.inputs)):
        out = topo_evaluate(n, dict(zip(circ.inputs, bits)), circ)
        rows.append((bits, tuple(out[name] for name in circ.outputs)))
    return TruthTable(tuple(circ.inputs), tuple(circ.outputs), rows)


# --------------------------------------------------------------------------- event simulation


@dataclass(frozen=True)
class SimConfig:
    gate_delay: float = 0.02  # s
    horizon: float = 1.0  # s
    type_delays: tuple[tuple[str, float], ...] = ()  # 0 makes a gate type an ideal switch
    initial: tuple[tuple[str, int], ...] = ()
    tick: float = 1e-6  # s
    max_events: int = 1_000_000

    def __post_init__(self):
        if not self.gate_delay > 0:
            raise ValueError("gate_delay must be > 0")
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")
        if not self.tick > 0:
            raise ValueError("tick must be > 0")
        if any(d < 0 for _, d in self.type_delays):
            raise ValueError("per-type delays must be >= 0")

    @classmethod
    def from_params(cls, params: CircuitParams, **overrides) -> "SimConfig":
        kw = {"gate_delay": params.gate_delay, "type_delays": params.type_delays}
        kw.update(overrides)
        return cls(**kw)

    def delay_for(self, type_name: str) -> float:
        for name, d in self.type_delays:
            if name == type_name:
                return d
        return self.gate_delay

    def ticks(self, seconds: float) -> int:
        return int(round(seconds / self.tick))


@dataclass
class Waveform:
    """Per-net level changes as ``(tick, level)``; the first entry is at tick 0."""

    tick: float
    horizon_ticks: int
    changes: dict[str, list[tuple[int, int]]]
    events: int = 0

    @property
    def horizon(self) -> float:
        return self.horizon_ticks * self.tick

    def transitions(self, net: str) -> list[tuple[float, int]]:
        if net not in self.changes:
            raise SimulationError(f"no net named {net!r} in waveform")
        return [(t * self.tick, v) for t, v in self.changes[net]]

    def level_at(self, net: str, seconds: float) -> int:
        t = int(round(seconds / self.tick))
        level = self.changes[net][0][1]
        for tt, v in self.changes[net]:
            if tt > t:
                break
            level = v
        return level

    def final_levels(self) -> dict[str, int]:
        return {k: v[-1][1] for k, v in self.changes.items()}


def _seconds(ticks: int, tick: float) -> str:
    digits = max(0, math.ceil(-math.log10(tick) - 1e-9))
    return f"{ticks * tick:.{digits}f}"


def waveform_csv(w: Waveform, nets=None) -> str:
    names = list(w.changes) if nets is None else list(nets)
    rows = sorted(((t, names.index(k), k, v) for k in names for t, v in w.changes[k]))
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["time_s", "net", "level"])
    for t, _, k, v in rows:
        out.writerow([_seconds(t, w.tick), k, v])
    return buf.getvalue()


def waveform_json(w: Waveform, nets=None) -> str:
    names = list(w.changes) if nets is None else list(nets)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tick_s": w.tick,
        "horizon_s": w.horizon,
        "nets": {k: [[float(_seconds(t, w.tick)), v] for t, v in w.changes[k]] for k in names},
    }
    return json.dumps(doc, indent=2)


def parse_stimulus(text: str) -> list[tuple[float, str, int]]:
    """Read ``time_s,net,level`` rows (header optional)."""
    out = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), 1):
        if not row or not "".join(row).strip() or row[0].strip().startswith("#"):
            continue
        if lineno == 1 and row[0].strip() == "time_s":
            continue
        if len(row) != 3:
            raise SimulationError(f"stimulus line {lineno}: expected time_s,net,level")
        try:
            t, level = float(row[0]), int(row[2])
        except ValueError:
            raise SimulationError(f"stimulus line {lineno}: bad number") from None
        if t < 0 or level not in (0, 1):
            raise SimulationError(f"stimulus line {lineno}: time must be >= 0 and level 0 or 1")
        out.append((t, row[1].strip(), level))
    return out


def event_simulate(n: Netlist, cfg: SimConfig, stimulus=(), circuit: SimCircuit | None = None,
                   run_to_quiet: bool = False) -> Waveform:
    """Discrete-event simulation with inertial gate delays.

    Initial levels: stimulus entries at time 0 set the inputs (others start at
    0), then every gate output is set by one in-order sweep over the gates, so
    a feedback ring starts with a single inconsistent stage.  ``cfg.initial``
    overrides any net afterwards.  Each gate re-evaluates one delay after an
    input change; a pending change is cancelled if the inputs move again first,
    so pulses shorter than the delay never reach the output.  Simultaneous
    events run in net-id order.  With ``run_to_quiet`` the horizon is ignored
    and simulation runs until no events remain.
    """
    circ = circuit or build_circuit(n)
    levels = [0] * len(circ.nets)
    pending_stim = []
    for t, name, v in stimulus:
        idx = circ.net_index(name)
        if circ.nets[idx] not in circ.inputs or name in circ.aliases:
            raise SimulationError(f"stimulus drives {name!r}, which is not an external input")
        ticks = cfg.ticks(t)
        if ticks == 0:
            levels[idx] = v
        else:
            pending_stim.append((ticks, idx, v))
    for g in circ.gates:
        if g.output is not None:
            levels[g.output] = _gate_value(g, levels)
    for name, v in cfg.initial:
        levels[circ.net_index(name)] = int(v)

    delays = [cfg.ticks(cfg.delay_for(g.type_name)) for g in circ.gates]
    horizon = cfg.ticks(cfg.horizon)
    changes = {name: [(0, levels[i])] for i, name in enumerate(circ.nets)}
    seq = itertools.count()
    heap = []  # (tick, net, seq, gate or -1, value, token)
    token = [0] * len(circ.gates)
    for t, idx, v in sorted(pending_stim):
        heapq.heappush(heap, (t, idx, next(seq), -1, v, 0))

    def schedule(gi: int, now: int):
        g = circ.gates[gi]
        if g.output is None:
            return
        token[gi] += 1  # cancels whatever was pending
        new = _gate_value(g, levels)
        if new != levels[g.output]:
            heapq.heappush(heap, (now + delays[gi], g.output, next(seq), gi, new, token[gi]))

    for gi in range(len(circ.gates)):
        schedule(gi, 0)

    processed = 0
    while heap:
        t, net, _, gi, value, tok = heap[0]
        if not run_to_quiet and t > horizon:
            break
        heapq.heappop(heap)
        if gi >= 0 and tok != token[gi]:
            continue
        processed += 1
        if processed > cfg.max_events:
            raise SimulationError(f"more than {cfg.max_events} events by t={t * cfg.tick:g} s; "
                                  "a zero-delay feedback loop never settles")
        if levels[net] == value:
            continue
        levels[net] = value
        hist = changes[circ.nets[net]]
        if hist[-1][0] == t:
            hist[-1] = (t, value)
            if len(hist) > 1 and hist[-2][1] == value:
                hist.pop()
        else:
            hist.append((t, value))
        for r in circ.readers[net]:
            schedule(r, t)
    end = max(horizon, max((h[-1][0] for h in changes.values()), default=0)) if run_to_quiet else horizon
    for name, i in circ.aliases.items():
        changes[name] = list(changes[circ.nets[i]])
    for name in circ.outputs:
        changes.setdefault(name, [(0, 0)])
    return Waveform(cfg.tick, end, changes, processed)


def steady_state(n: Netlist, inputs: dict, cfg: SimConfig | None = None) -> dict[str, int]:
    """Output levels after the event simulation settles with constant inputs."""
    cfg = cfg or SimConfig.from_params(n.params)
    circ = build_circuit(n)
    _input_levels(circ, inputs)
    w = event_simulate(n, cfg, [(0.0, k, v) for k, v in inputs.items()], circ, run_to_quiet=True)
    final = w.final_levels()
    return {name: final[name] for name in circ.outputs}


@dataclass(frozen=True)
class FrequencyMeasurement:
    frequency_hz: float
    period_s: float
    jitter_s: float  # largest deviation of one period from the mean
    cycles: int


def measure_frequency(w: Waveform, net: str, settle: float = 0.0, skip: int = 1) -> FrequencyMeasurement:
    """Oscillation frequency of ``net`` from its steady-state rising edges.

    Transitions before ``settle`` seconds are ignored, as are the first ``skip``
    transitions after that (start-up).  Needs at least four transitions.
    """
    hist = w.changes.get(net)
    if hist is None:
        raise SimulationError(f"no net named {net!r} in waveform")
    start = int(round(settle / w.tick))
    edges = [(t, v) for t, v in hist[1:] if t >= start][skip:]
    if len(edges) < 4:
        raise NoOscillationError(f"{net}: {len(edges)} transition(s) after settling, need at least 4")
    rising = [t for t, v in edges if v == 1]
    if len(rising) >= 2:
        periods = [b - a for a, b in zip(rising, rising[1:])]
    else:
        periods = [2 * (b[0] - a[0]) for a, b in zip(edges, edges[1:])]
    mean = sum(periods) / len(periods)
    jitter = max(abs(p - mean) for p in periods)
    period_s = mean * w.tick
    return FrequencyMeasurement(1.0 / period_s, period_s, jitter * w.tick, len(periods))
