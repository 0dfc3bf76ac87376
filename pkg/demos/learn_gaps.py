"""Learn the spectrum of a random 2-level Hamiltonian from single-bit experiments.

Each experiment prepares a random state, evolves for a time chosen by the
particle guess heuristic and asks whether the state returned.  No
eigenstate preparation is needed.

    python demos/learn_gaps.py
"""

import numpy as np

from randgap.inference import InferenceConfig, infer_spectrum
from randgap.qcore import gue_sample, normalize_spectrum

rng = np.random.default_rng(3)
h = gue_sample(2, rng)
truth = normalize_spectrum(np.linalg.eigvalsh(h.entries)).values

cfg = InferenceConfig(max_experiments=200, accept_threshold=3000)
post, trace = infer_spectrum(h, cfg, rng)

print("true gaps     ", np.round(truth[1:], 5))
print("estimated gaps", np.round(post.mean, 5))
for step in trace[::40] + [trace[-1]]:
    print(f"experiment {step.index:4d}  t={step.t:10.3f}  error={step.error:.3e}  sd={step.uncertainty:.3e}")
