"""
Human-compatible versus plain classifier representations
========================================================

Train a classifier-only model (MLE), a metric-only model (TML) and the joint
model (HC) for one simulated human, then compare them as decision support.
A short schedule keeps this under a couple of minutes; the experiment
defaults train for 50 x 1000 steps.
"""

import sys

from hcrep.experiments import Experiment, run_single

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 5

exp = Experiment({
    "weights": [1, 256, 256, 256],
    "seeds": [0],
    "triplets": {"n": 20000},
    "train": {"epochs": epochs},
})
print(f"alignment of this human: {exp.alignment(exp.cfg['weights']):.3f}")

# %%
# One report per model. H2H columns compare each model's justification with
# the MLE's; 0.5 means the human is indifferent.
reports = run_single(exp)
keys = ("classification_acc", "triplet_acc", "ni_h2h", "no_h2h", "neutral_ds", "persuasive_ds")
print(f"{'model':<6}" + "".join(f"{k:>20}" for k in keys))
for r in reports:
    print(f"{r.model:<6}" + "".join(f"{getattr(r, k):>20.3f}" for k in keys))

# %%
# HC keeps MLE's accuracy while matching the human's triplet judgments almost
# as well as TML. Persuasive support (nearest same-class example against the
# furthest other-class one) is where the combination pays off.
