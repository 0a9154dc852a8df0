"""
Volume by Gaussian cooling
==========================

The volume of K is the last value in a chain of Gaussian integrals over K.
The variance grows by a factor 1 + 1/sqrt(n) in each phase.  Each ratio of
consecutive integrals is estimated from samples of the current phase.  We
estimate the area of the square [-1, 1]^2 (exactly 4) with hit-and-run and
with LMC.  LMC is then repeated with smaller steps.
"""
from logcave import AxisBox
from logcave.volume import build_schedule, estimate_volume

K = AxisBox.cube(2)

###############################################################################
# The schedule is fixed by the inradius and circumradius of K.

sched = build_schedule(K, samples_per_phase=500, sampler_kind="hit_and_run")
print(f"{sched.phases} phases, variances {sched.sigma_sq[0]:.4f} ... {sched.sigma_sq[-1]:.2f}")

est = estimate_volume(K, sched, seed=0)
print(f"hit-and-run: {est.value:.3f}  ({est.total_samples} samples, {est.wall_time:.1f}s)")

###############################################################################
# LMC at the practical step sigma^2 / n^2 overshoots.  The unadjusted chain
# inflates the variance of each restricted Gaussian.  The bias shrinks with
# the step.

for scale in (1.0, 0.2):
    sched = build_schedule(K, samples_per_phase=500, step_scale=scale)
    est = estimate_volume(K, sched, seed=0)
    print(f"lmc, step x{scale:g}: {est.value:.3f}")
