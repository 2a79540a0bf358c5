# %% [markdown]
# Ring oscillators under a uniform gate delay
#
# An odd loop of n inverters with delay tau oscillates with period 2 n tau.
# The variable ring uses a control input to pick a 3- or 5-inverter loop.

# %%
from fluidcc import circuits
from fluidcc.netlist import load_netlist
from fluidcc.sim import SimConfig, event_simulate, measure_frequency, waveform_csv

# %%
for name in ("ring3", "ring5"):
    n = load_netlist(circuits.path(name))
    cfg = SimConfig.from_params(n.params, horizon=2.0)
    m = measure_frequency(event_simulate(n, cfg), "out", settle=0.3)
    print(f"{name}: period {m.period_s:.4f} s, {m.frequency_hz:.3f} Hz over {m.cycles} cycles")

# %% first few edges of the 3-ring
n = load_netlist(circuits.path("ring3"))
w = event_simulate(n, SimConfig.from_params(n.params, horizon=0.3))
print(waveform_csv(w, ["out"]))

# %% switch the loop length half way through
n = load_netlist(circuits.path("ring_variable"))
cfg = SimConfig.from_params(n.params, horizon=4.0)
w = event_simulate(n, cfg, [(0.0, "C", 0), (2.0, "C", 1)])
edges = w.transitions("out")
for lo, hi in ((0.3, 1.9), (2.5, 4.0)):
    rising = [t for t, v in edges if v == 1 and lo <= t < hi]
    gaps = [b - a for a, b in zip(rising, rising[1:])]
    print(f"{lo:.1f}-{hi:.1f} s: period {sum(gaps) / len(gaps):.4f} s")
