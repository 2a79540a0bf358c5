# %% [markdown]
# Fan-out and junction spheres
#
# One source driving three gates needs two three-way junctions.  Each later
# connection taps the nearest usable node of the tubes already laid.

# %%
from fluidcc.mesh import watertight_check
from fluidcc.netbuild import build_network, network_stats
from fluidcc.netlist import parse_netlist
from fluidcc.scene import assemble_scene

SRC = """\
circuit fan3
param bed 150 150 30
gate S SOURCE at 10 70
gate G1 NOT at 100 20
gate G2 NOT at 100 70
gate G3 NOT at 100 115
connect S.out -> G1.in
connect S.out -> G2.in
connect S.out -> G3.in
"""

# %%
net = build_network(parse_netlist(SRC))
print(network_stats(net))
for j in net.junctions:
    print(f"junction at {j.point}: {j.incident}")
for r in net.routes:
    print(f"{r.connection}: {len(r.nodes)} nodes, {r.length_mm:.1f} mm, explored {r.explored}, splits {r.splits}")

# %% every shell should be a closed 2-manifold
shells, stats = assemble_scene(net)
for s in shells:
    rep = watertight_check(s)
    print(f"{s.label:12s} {len(s):6d} triangles  watertight={rep.ok}")
