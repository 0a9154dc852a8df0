"""
Boundary local time of projected LMC
====================================

Each time the projection moves a pre-point back into K, the sampler records an
atom of boundary local time: its mass is the distance moved and its normal is
the outward unit vector.  This script runs uniform LMC in the unit disc and
checks two things.  The atoms carry outward normals.  Their total mass grows
roughly linearly in time, at a rate that does not depend on the step size.
"""
import numpy as np

from logcave import Ball, SamplerConfig, Uniform, run_lmc

K = Ball(1.0, 2)
f = Uniform()
T = 20.0

###############################################################################
# One chain, and a look at its atoms.

traj = run_lmc(K, f, SamplerConfig(eta=1e-3, steps=int(T / 1e-3), seed=1))
ev = traj.local_time
print(f"{len(ev)} boundary events in {len(traj) - 1} steps")
pos = traj.states[[e.k for e in ev]]
normals = np.array([e.normal for e in ev])
print("max |nu - x/|x|| over events:",
      np.max(np.linalg.norm(normals - pos / np.linalg.norm(pos, axis=1)[:, None], axis=1)))

###############################################################################
# Total local time up to T for several step sizes.  The accumulated mass per
# unit time should settle as eta shrinks.

for eta in (1e-2, 1e-3, 1e-4):
    tr = run_lmc(K, f, SamplerConfig(eta=eta, steps=int(T / eta), seed=2))
    print(f"eta={eta:g}: local time / T = {tr.local_time_total() / T:.4f}")
