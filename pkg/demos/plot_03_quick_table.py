"""
A quick pass over all six simulated humans
==========================================

Reduced-budget version of the main comparison table. Trends are visible at
this size; the full version runs through ``hcrep table1`` with defaults.
"""

from pathlib import Path

from hcrep.experiments import Experiment, reproduce_table1

exp = Experiment({
    "seeds": [0],
    "triplets": {"n": 10000},
    "model": {"embed_dim": 64},
    "train": {"epochs": 4},
})
table = reproduce_table1(exp)
print(table.to_markdown())

# %%
# Plot-ready CSVs (means, and mean/min/max per cell) go next to the Markdown.
out = Path("demo_output")
for p in table.write(out, "table1_quick"):
    print("wrote", p)
