"""Amplitude estimation with randomized Grover powers.

The marked amplitude is sin(theta).  A random initial state plus an even
number of Grover iterations gives a likelihood that oscillates in
``4 theta t``, so the error falls roughly as one over the total number of
Grover applications.

    python demos/amplitude_estimation.py
"""

import numpy as np

from randgap.campaigns import run_campaign, scaling_slope
from randgap.config import build_config

cfg = build_config("amplitude", {}, {"instances": 8, "experiments": 120,
                                     "accept_threshold": 2000, "out": "-"}, {})
res = run_campaign(cfg)
s = res.summary
for i, (tt, err) in enumerate(zip(s["total_times"], s["errors"])):
    print(f"instance {i}: total Grover calls {tt[-1]:9.0f}  final error {err[-1]:.2e}")

slope, grid, med = scaling_slope(s["total_times"], s["errors"], decades=2)
print(f"log-log slope of error vs total time: {slope:.2f}")
