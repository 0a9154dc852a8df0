"""Projected Langevin Monte Carlo for log-concave measures on convex bodies."""
from .geometry import (AxisBox, Ball, Chord, ChordError, ConvexBody, Intersection, Polytope,
                       ProjectionError, box_ball)
from .potential import IsotropicGaussian, Potential, Quadratic, Uniform
from .sampler import (LocalTimeEvent, SamplerConfig, Trajectory, coupled_resolution_run,
                      hit_and_run_step, lmc_step, reflection_coupled_pair, run_lmc,
                      schedule_practical, schedule_theorem1, skorokhod_reconstruct)

__version__ = "0.1.0"
