"""
Reflection coupling in a ball
=============================

Two LMC chains started at opposite points share their noise up to a reflection
across the bisecting hyperplane.  When the pre-points can coincide they are
merged.  The fraction of pairs that have not met by time t falls quickly.  We
print it next to the bound |x - x'| / sqrt(2 pi t).
"""
import math

import numpy as np

from logcave import Ball, Uniform
from logcave.sampler import coupling_replicas

K = Ball(1.0, 3)
x, x2 = np.array([0.5, 0, 0]), np.array([-0.5, 0, 0])

res = coupling_replicas(K, Uniform(), x, x2, T=1.0, eta=1e-3, seed=5, replicas=1000)
for t in (0.05, 0.25, 0.5, 1.0):
    print(f"t={t:<5g} P(tau > t)={np.mean(res.tau > t):.3f}  "
          f"bound={1.0 / math.sqrt(2 * math.pi * t):.3f}")
