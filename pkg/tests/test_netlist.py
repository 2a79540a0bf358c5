import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fluidcc import circuits
from fluidcc.errors import NetlistError, PlacementError
from fluidcc.netlist import (
    CircuitParams,
    Placement,
    Terminal,
    auto_place,
    boxes_overlap,
    format_netlist,
    gate_box,
    parse_netlist,
    validate_netlist,
)

MINIMAL = """\
circuit minimal
input S at 5 50 3
gate G NOT at 40 40
output Y at 110 50 3
connect S -> G.in
connect G.out -> Y
"""


def diags_of(src):
    with pytest.raises(NetlistError) as exc:
        parse_netlist(src, filename="t.fcc")
    return str(exc.value).splitlines()


def test_minimal_program():
    n = parse_netlist(MINIMAL)
    assert n.name == "minimal"
    assert len(n.gates) == 1 and n.gates[0].type_name == "NOT"
    assert len(n.connections) == 2
    assert n.connections[0].start == Terminal("S")
    assert n.connections[0].end == Terminal("G", "in")
    assert n.params == CircuitParams()


def test_full_adder_has_nine_gates_from_and_or_inhibit():
    n = parse_netlist(circuits.text("full_adder"))
    assert len(n.gates) == 9
    assert {g.type_name for g in n.gates} <= {"AND", "OR", "INHIBIT"}


@pytest.mark.parametrize("name", circuits.names())
def test_shipped_circuits_validate_clean(name):
    n = parse_netlist(circuits.text(name))
    assert [d for d in validate_netlist(n) if d.severity == "error"] == []


def test_alpha_out_of_range_names_the_constraint():
    lines = diags_of("circuit t\nparam alpha 1.5\n")
    assert lines == ["t.fcc:2:13: error: alpha = 1.5 out of range: α∈(0,1) requires 0 < alpha < 1"]


def test_beta_zero_rejected():
    lines = diags_of("circuit t\nparam beta 0\n")
    assert "β∈(0,1)" in lines[0]


@pytest.mark.parametrize(
    "src, expected",
    [
        ("circuit t\ngate G NOT\ngate G AND\n", "t.fcc:3:6: error: duplicate identifier 'G'"),
        ("circuit t\ngate G FOO\n", "t.fcc:2:8: error: unknown gate type 'FOO'"),
        ("circuit t\ngate G NOT\ninput A at 1 1 1\nconnect A -> G.x\n",
         "t.fcc:4:14: error: unknown port 'x' on gate G (NOT)"),
        ("circuit t\ngate G NOT\ninput A at 1 1 1\ninput B at 2 2 1\nconnect A -> G.in\nconnect B -> G.in\n",
         "t.fcc:6:1: error: G.in is already driven (line 5)"),
        ("circuit t\nconnect A B\n", "t.fcc:2:1: error: syntax: connect <terminal> -> <terminal> [key=value ...]"),
        ("circuit t\nfrobnicate 3\n", "t.fcc:2:1: error: unknown statement 'frobnicate'"),
        ("circuit t\ngate G NOT at 1 2 45\n", "t.fcc:2:19: error: rotation must be one of 0, 90, 180, 270"),
        ("param alpha 0.5\n", "t.fcc:1:1: error: missing 'circuit <name>' statement"),
        ("circuit t\nparam tube_outer_d 1.0\n", "t.fcc:2:20: error: tube_outer_d must be greater than tube_inner_d"),
    ],
)
def test_diagnostics(src, expected):
    assert expected in diags_of(src)


def test_diagnostics_are_sorted_and_complete():
    src = "circuit t\ngate G FOO\nbogus\ngate G NOT\n"
    lines = diags_of(src)
    assert len(lines) == 3
    assert [int(s.split(":")[1]) for s in lines] == [2, 3, 4]


def test_diagnostics_byte_stable():
    src = "circuit t\ngate G FOO\nconnect X -> Y\nparam alpha 7\n"
    assert diags_of(src) == diags_of(src)


def test_comments_blank_lines_and_overrides():
    src = "# header\ncircuit c  # trailing\n\ninput A at 1 2 3\ngate G NOT\noutput Y at 9 9 3\n" \
          "connect A -> G.in tube_inner_d=1.0 tube_outer_d=2.0\nconnect G.out -> Y\n"
    n = parse_netlist(src)
    assert n.connections[0].overrides == (("tube_inner_d", 1.0), ("tube_outer_d", 2.0))
    assert n.connections[0].line == 7


def test_type_delay_param():
    n = parse_netlist("circuit c\nparam delay.AND 0\nparam gate_delay 0.01\n")
    assert n.params.delay_for("AND") == 0.0
    assert n.params.delay_for("NOT") == 0.01


def test_connection_order_preserved():
    n = parse_netlist(circuits.text("full_adder"))
    src = circuits.text("full_adder")
    written = [ln.split("#")[0].split()[1] for ln in src.splitlines() if ln.split("#")[0].strip().startswith("connect")]
    assert [str(c.start) for c in n.connections] == written


# ---------------------------------------------------------------------------- validation


def test_identical_positions_overlap():
    src = "circuit t\ngate A NOT at 40 40\ngate B NOT at 40 40\n"
    msgs = [d.message for d in validate_netlist(parse_netlist(src))]
    assert "gate B overlaps gate A" in msgs


def test_undriven_and_input():
    src = "circuit t\ninput X at 1 1 3\ngate G AND at 40 40\noutput Y at 100 40 3\n" \
          "connect X -> G.a\nconnect G.out -> Y\n"
    n = parse_netlist(src)
    lib_inputs = n.library.gate_type("AND").inputs
    undriven = [p for p in lib_inputs if Terminal("G", p) not in {c.end for c in n.connections}]
    assert len(undriven) == 1
    msgs = [d.message for d in validate_netlist(n)]
    assert f"input G.{undriven[0]} is not driven" in msgs


def test_gate_off_bed_and_unconnected_output():
    src = "circuit t\nparam bed 50 50 30\ngate G NOT at 40 40\noutput Y at 1 1 1\n"
    msgs = [d.message for d in validate_netlist(parse_netlist(src))]
    assert "gate G extends beyond the bed" in msgs
    assert "output Y is not connected" in msgs


# ---------------------------------------------------------------------------- placement


def _gates_only(k, bed=None):
    lines = ["circuit p"]
    if bed:
        lines.append("param bed %g %g 30" % bed)
    lines += [f"gate G{i} NOT" for i in range(k)]
    return parse_netlist("\n".join(lines) + "\n")


def test_nine_gates_place_without_overlap():
    n = _gates_only(9)
    n = n.with_placement(auto_place(n, bed=(250, 210)))
    boxes = [gate_box(n, g) for g in n.gates]
    for a, b in itertools.combinations(boxes, 2):
        assert not boxes_overlap(a, b)
    for b in boxes:
        assert b[0] >= 0 and b[1] >= 0 and b[3] <= 250 and b[4] <= 210
    assert validate_netlist(n) == [d for d in validate_netlist(n) if "driven" in d.message]


def test_single_gate_at_corner_plus_margin():
    n = _gates_only(1)
    assert auto_place(n, margin=10.0) == {"G0": Placement(10.0, 10.0, 0)}


def test_placement_deterministic():
    n = _gates_only(9)
    assert auto_place(n) == auto_place(n)


def test_too_many_gates_for_bed():
    with pytest.raises(PlacementError):
        auto_place(_gates_only(200), bed=(50, 50))


def test_placed_gates_are_left_alone():
    n = parse_netlist("circuit p\ngate A NOT at 10 10\ngate B NOT\n")
    out = auto_place(n)
    assert set(out) == {"B"}
    n = n.with_placement(out)
    assert not boxes_overlap(gate_box(n, n.gate("A")), gate_box(n, n.gate("B")))


# ---------------------------------------------------------------------------- round trip


@st.composite
def netlists(draw):
    kinds = ["NOT", "AND", "OR", "INHIBIT"]
    lines = [f"circuit {draw(st.from_regex(r'[a-z][a-z0-9_]{0,8}', fullmatch=True))}"]
    num = st.floats(0.01, 0.99, allow_nan=False)
    if draw(st.booleans()):
        lines.append(f"param alpha {draw(num)!r}")
    if draw(st.booleans()):
        lines.append(f"param beta {draw(num)!r}")
    if draw(st.booleans()):
        lines.append("param bed %r %r %r" % tuple(draw(st.floats(50, 500)) for _ in range(3)))
    if draw(st.booleans()):
        lines.append(f"param delay.{draw(st.sampled_from(kinds))} {draw(st.floats(0, 1))!r}")
    n_in = draw(st.integers(1, 3))
    ins = [f"I{i}" for i in range(n_in)]
    for name in ins:
        lines.append("input %s at %r %r %r" % (name, *(draw(st.floats(0, 100)) for _ in range(3))))
    gates = []
    for i in range(draw(st.integers(0, 6))):
        t = draw(st.sampled_from(kinds))
        line = f"gate g{i} {t}"
        if draw(st.booleans()):
            line += " at %r %r" % (draw(st.floats(0, 200)), draw(st.floats(0, 200)))
            line += " " + str(draw(st.sampled_from([0, 90, 180, 270])))
        lines.append(line)
        gates.append((f"g{i}", t))
    outs = [f"O{i}" for i in range(draw(st.integers(0, 2)))]
    for name in outs:
        lines.append(f"output {name} at 1 2 3")
    drivers = ins + [f"{g}.out" for g, _ in gates]
    ports = {"NOT": ["in"], "AND": ["a", "b"], "OR": ["a", "b"], "INHIBIT": ["a", "b"]}
    sinks = [f"{g}.{p}" for g, t in gates for p in ports[t]] + outs
    for sink in sinks:
        if draw(st.booleans()):
            line = f"connect {draw(st.sampled_from(drivers))} -> {sink}"
            if draw(st.booleans()):
                line += f" tube_inner_d={draw(st.floats(0.1, 3))!r}"
            lines.append(line)
    return "\n".join(lines) + "\n"


@given(netlists())
@settings(max_examples=150, deadline=None)
def test_print_parse_round_trip(src):
    n = parse_netlist(src)
    again = parse_netlist(format_netlist(n))
    assert again == n
    assert format_netlist(again) == format_netlist(n)


@pytest.mark.parametrize("name", circuits.names())
def test_shipped_round_trip(name):
    n = parse_netlist(circuits.text(name))
    assert parse_netlist(format_netlist(n)) == n
