# %% [markdown]
# How much searching the bed reward saves
#
# The modified search pays less for steps that drop toward or run along the
# print bed and biases its heuristic with a Chebyshev term.  Here we compare it
# against plain A* on one random scene and on the seeded benchmark suite.

# %%
from fluidcc.bench import random_scene, run_bench
from fluidcc.router import RouterParams, compare_search

# %% one 3D scene
world, start, goal = random_scene(seed=7, index=1, kind="3d")
print(f"grid {world.dims}, {int(world.blocked.sum())} blocked cells, {start} -> {goal}")
mod, std = compare_search(world, start, goal, RouterParams(alpha=0.5, beta=0.5))
for label, p in (("modified", mod), ("standard", std)):
    m = p.metrics
    print(f"{label:9s} explored {m.explored_count:5d}  length {m.length_mm:6.2f}  turns {m.turn_count}")

# %% the whole suite (flat 40x40x1 and 3D 30x30x10 scenes, alternating)
agg = run_bench(50, seed=7)["aggregate"]
print(f"modified explored fewer nodes in {agg['modified_fewer']}/{agg['solvable']} scenes")
print(f"median reduction {agg['median_reduction']:.1%}")

# %% alpha trades bed contact against search effort
for alpha in (0.1, 0.3, 0.5, 0.7, 0.9):
    a = run_bench(20, seed=7, params=RouterParams(alpha=alpha))["aggregate"]
    print(f"alpha {alpha:.1f}: explored {a['explored_modified_total']:6d} vs {a['explored_standard_total']}")
