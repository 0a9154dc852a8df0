"""Gaussian-cooling volume estimation driven by LMC or hit-and-run.

With ``Z(s2) = int_K exp(-|x|^2 / (2 s2)) dx`` the estimator telescopes

    vol(K) = Z(s2_0) * prod_l Z(s2_{l+1}) / Z(s2_l) * vol(K) / Z(s2_m)

where ``Z(s2_0)`` is nearly the full Gaussian integral, each ratio is a
mean under the restricted Gaussian of phase ``l``, and the last factor is
``E[exp(|x|^2 / (2 s2_m))]`` under the final (almost uniform) phase.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._rng import ReplicaNormals, stream
from .potential import IsotropicGaussian
from .sampler import hit_and_run_batch_step, lmc_batch_step, schedule_practical

SAMPLERS = ("lmc", "hit_and_run")


@dataclass(frozen=True)
class CoolingSchedule:
    sigma_sq: tuple
    samples_per_phase: int = 2000
    sampler_kind: str = "lmc"
    burn_in: int = 500
    thin: int = 10
    chains: int = 10
    #: multiplies the heuristic LMC step ``sigma^2 / n^2``
    step_scale: float = 1.0

    def __post_init__(self):
        if self.sampler_kind not in SAMPLERS:
            raise ValueError(f"sampler_kind must be one of {SAMPLERS}")
        if any(b <= a for a, b in zip(self.sigma_sq, self.sigma_sq[1:])):
            raise ValueError("sigma_sq must be increasing")

    @property
    def phases(self):
        return len(self.sigma_sq) - 1


@dataclass
class VolumeEstimate:
    value: float
    base: float
    per_phase_ratios: list
    final_ratio: float
    total_samples: int
    wall_time: float


def build_schedule(body, samples_per_phase=2000, sampler_kind="lmc", **kwargs):
    """Variances ``r^2 / (4n)`` growing by ``1 + 1/sqrt(n)`` until they reach ``4 R^2``."""
    n = body.dimension
    s2 = body.inradius**2 / (4 * n)
    target = 4 * body.circumradius**2
    factor = 1 + 1 / math.sqrt(n)
    out = [s2]
    while out[-1] < target:
        out.append(out[-1] * factor)
    return CoolingSchedule(tuple(out), samples_per_phase, sampler_kind, **kwargs)


def base_integral(body, sigma0, samples, seed=0):
    """``(2 pi sigma0^2)^(n/2)`` times the fraction of free Gaussian draws in K."""
    n = body.dimension
    x = sigma0 * stream(seed, 0xBA5E).standard_normal((samples, n))
    frac = float(np.mean(body.membership(x)))
    if frac < 0.5:
        warnings.warn(f"only {frac:.2f} of base Gaussian draws fall in K; "
                      "is the inradius declared correctly?", RuntimeWarning, stacklevel=2)
    return (2 * math.pi * sigma0**2) ** (n / 2) * frac


def _phase_samples(body, sigma, kind, samples, chains, burn_in, thin, start, key, threads=1,
                   step_scale=1.0):
    """Samples from the Gaussian of std ``sigma`` restricted to K; also returns final states."""
    n = body.dimension
    per_chain = -(-samples // chains)
    steps = burn_in + per_chain * thin
    potential = IsotropicGaussian(sigma)
    x = np.array(start, dtype=float)
    out = np.empty((per_chain, chains, n))
    gens = ReplicaNormals(key, chains, n, threads=threads)
    xi = gens.draw(steps)
    if kind == "lmc":
        eta = step_scale * schedule_practical(potential.smoothness, n)

        def step(x, k):
            return lmc_batch_step(body, potential, x, eta, xi[:, k])[0]
    else:
        u = gens.uniform(steps)

        def step(x, k):
            return hit_and_run_batch_step(body, potential, x, xi[:, k], u[:, k])

    for k in range(steps):
        x = step(x, k)
        j = k + 1 - burn_in
        if j > 0 and j % thin == 0:
            out[j // thin - 1] = x
    return out.reshape(-1, n)[:samples], x


def _mix(seed, phase):
    return (int(seed) * 1_000_003 + phase) & ((1 << 64) - 1)


def _log_mean_exp(a):
    return float(logsumexp(a) - math.log(len(a)))


def phase_ratio(body, sigma_l, sigma_next, samples, sampler_kind="lmc", seed=0, start=None,
                chains=10, burn_in=500, thin=10, step_scale=1.0):
    """Estimate ``Z(sigma_next^2) / Z(sigma_l^2)`` from samples of phase ``sigma_l``."""
    if sigma_next < sigma_l:
        raise ValueError("sigma_next must not be smaller than sigma_l")
    x0 = np.zeros((chains, body.dimension)) if start is None else start
    xs, _ = _phase_samples(body, sigma_l, sampler_kind, samples, chains, burn_in, thin, x0,
                           _mix(seed, 0), step_scale=step_scale)
    c = 0.5 * (1 / sigma_l**2 - 1 / sigma_next**2)
    return math.exp(_log_mean_exp(c * np.einsum("ij,ij->i", xs, xs)))


def estimate_volume(body, schedule, seed, base_samples=100_000, threads=1):
    """Run all cooling phases with warm starts and return the volume estimate."""
    t0 = time.perf_counter()
    n = body.dimension
    s2 = schedule.sigma_sq
    base = base_integral(body, math.sqrt(s2[0]), base_samples, seed)
    x = np.zeros((schedule.chains, n))
    ratios = []
    log_value = math.log(base)
    total = base_samples
    final = None
    for ell, v in enumerate(s2):
        xs, x = _phase_samples(body, math.sqrt(v), schedule.sampler_kind,
                               schedule.samples_per_phase, schedule.chains, schedule.burn_in,
                               schedule.thin, x, _mix(seed, ell), threads, schedule.step_scale)
        total += len(xs)
        sq = np.einsum("ij,ij->i", xs, xs)
        if ell + 1 < len(s2):
            lr = _log_mean_exp(0.5 * (1 / v - 1 / s2[ell + 1]) * sq)
            ratios.append(math.exp(lr))
        else:
            lr = _log_mean_exp(sq / (2 * v))
            final = math.exp(lr)
        log_value += lr
    return VolumeEstimate(math.exp(log_value), base, ratios, final, total,
                          time.perf_counter() - t0)


def ball_volume(n, radius=1.0):
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * radius**n
