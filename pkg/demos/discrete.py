"""Composed training on a small discrete output space.

A softmax base model picks output sequences; a fixed denoiser maps them to
valid ones. Applying the denoiser only at test time already repairs invalid
outputs. Training through it, with the score-function gradient, teaches the
base model to emit sequences the denoiser can fix.

    python demos/discrete.py [n_seeds]
"""

import sys

import numpy as np

from composed_lab import discrete_composed as dc

# First check that the sampled gradient agrees with the exact one.
model, den, X, Y = dc.random_instance(8, seed=0)
exact = dc.exact_grad(model, den, X, Y)
est, err = dc.reinforce_grad(model, den, X, Y, n_samples=100_000, seed=0)
print(f"score-function gradient vs exact: max |z| = {dc.z_scores(est, err, exact).max():.2f}")
print()

n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 3
arms = ("standard", "standard+denoiser", "composed_base", "composed")
rates = {a: [] for a in arms}
for seed in range(n_seeds):
    task = dc.make_discrete_task(seed=seed)
    report = dc.run_discrete_experiment(task, dc.DiscreteConfig(seed=seed))["arms"]
    for a in arms:
        rates[a].append(report[a]["valid_rate"])

print(f"valid output rate over {n_seeds} seed(s)")
for a in arms:
    print(f"  {a:<18} median {np.median(rates[a]):.2f}  per seed {np.round(rates[a], 2).tolist()}")
