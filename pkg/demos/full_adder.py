# %% [markdown]
# Full adder, from netlist text to a printable STL
#
# Nine valves (AND, OR and INHIBIT) make a one-bit full adder.  We check the
# logic first, then route the tubes and write the mesh.

# %%
import sys
from pathlib import Path

from fluidcc import circuits
from fluidcc.compiler import compile_netlist, write_outputs
from fluidcc.netlist import load_netlist, validate_netlist
from fluidcc.sim import truth_table

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")

# %%
n = load_netlist(circuits.path("full_adder"))
print(f"{n.name}: {len(n.gates)} gates, {len(n.connections)} connections")
for g in n.gates:
    print(f"  {g.name:4s} {g.type_name:8s} at {g.placement}")
print("diagnostics:", [d.format("full_adder.fcc") for d in validate_netlist(n)] or "none")

# %% the logic, evaluated combinationally
print(truth_table(n).format())

# %% route, mesh and write
result = compile_netlist(n)
net = result.network
print(f"{len(net.paths)} tube paths, {len(net.junctions)} junctions")
print(f"{result.stats.shells} shells, {result.stats.triangles} triangles, "
      f"{result.stats.total_tube_length_mm:.0f} mm of tube")
for w in result.warnings:
    print("warning:", w)
stl_path, report_path = write_outputs(result, out_dir, "full_adder")
print("wrote", stl_path, "and", report_path)
