"""Empirical checks of the sampler against closed-form bounds and exact oracles."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import wasserstein_distance

from ._rng import stream
from .sampler import Trajectory, coupled_resolution_replicas, run_lmc_replicas

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


class RejectionError(RuntimeError):
    """Acceptance rate of the rejection oracle is too small to be useful."""


@dataclass
class GridHistogram:
    """Counts on a regular grid over an axis-aligned box (dimension <= 3)."""

    lower: np.ndarray
    upper: np.ndarray
    bins: tuple
    counts: np.ndarray

    @classmethod
    def from_samples(cls, samples, lower, upper, bins):
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        if samples.shape[0] == 1 and samples.shape[1] > 3:
            samples = samples.T
        n = samples.shape[1]
        if n > 3:
            raise ValueError("grid histograms are limited to dimension <= 3")
        lower = np.broadcast_to(np.asarray(lower, dtype=float), (n,)).copy()
        upper = np.broadcast_to(np.asarray(upper, dtype=float), (n,)).copy()
        bins = tuple(int(b) for b in np.broadcast_to(bins, (n,)))
        edges = [np.linspace(lower[i], upper[i], bins[i] + 1) for i in range(n)]
        counts, _ = np.histogramdd(samples, bins=edges)
        return cls(lower, upper, bins, counts)

    @property
    def total(self):
        return float(self.counts.sum())

    @property
    def probabilities(self):
        return self.counts / self.total

    def same_grid(self, other):
        return (self.bins == other.bins and np.array_equal(self.lower, other.lower)
                and np.array_equal(self.upper, other.upper))


def empirical_tv(h1, h2):
    """Half the L1 distance between the normalised histograms."""
    if not h1.same_grid(h2):
        raise ValueError("histograms are defined on different grids")
    return float(0.5 * np.abs(h1.probabilities - h2.probabilities).sum())


def wasserstein_1d(a, b):
    return float(wasserstein_distance(np.ravel(a), np.ravel(b)))


@dataclass
class BoundReport:
    """One-sided comparison ``empirical <= theoretical + 3 stderr``."""

    bound_name: str
    theoretical: float
    empirical: float
    stderr: float
    passed: bool = None
    flagged: bool = False

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be non-negative")
        if self.passed is None:
            self.passed = bool(self.empirical <= self.theoretical + 3.0 * self.stderr)

    HEADER = "bound_name,theoretical,empirical,stderr,pass"

    def to_csv_row(self):
        return (f"{self.bound_name},{self.theoretical!r},{self.empirical!r},"
                f"{self.stderr!r},{str(self.passed).lower()}")

    @classmethod
    def from_csv_row(cls, row):
        name, th, em, se, ok = row.strip().split(",")
        return cls(name, float(th), float(em), float(se), ok == "true")


def _mean_stderr(values):
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))


def _proportion(hits):
    hits = np.asarray(hits, dtype=bool)
    p = float(hits.mean())
    return p, math.sqrt(p * (1 - p) / len(hits))


# ---------------------------------------------------------------------------
# closed-form bounds (universal constants set to 1)


def evaluate_bound(kind, **params):
    """Evaluate one of the closed-form bounds.

    ``mixing``: ``min(m t^-1/2, exp(-t / (2 R^2)))``;
    ``coupling``: ``dist / sqrt(2 pi t)``;
    ``escape``: ``(sqrt(n t) + L t) / gamma``;
    ``tv_w1``: ``sqrt(L beta) / 2 * sqrt(integral)``;
    ``local_time``: ``(n + R L) t / 2``;
    ``boundary_mass``: ``(n + R L) gamma / r``.
    """
    p = params
    if kind == "mixing":
        return min(p["m"] / math.sqrt(p["t"]), math.exp(-p["t"] / (2 * p["R"] ** 2)))
    if kind == "coupling":
        return p["dist"] / math.sqrt(2 * math.pi * p["t"])
    if kind == "escape":
        if p["t"] == 0:
            return 0.0
        return (math.sqrt(p["n"] * p["t"]) + p.get("L", 0.0) * p["t"]) / p["gamma"]
    if kind == "tv_w1":
        return 0.5 * math.sqrt(p["L"] * p["beta"]) * math.sqrt(p["integral"])
    if kind == "local_time":
        return (p["n"] + p.get("R", 0.0) * p.get("L", 0.0)) * p["t"] / 2
    if kind == "boundary_mass":
        return (p["n"] + p.get("R", 0.0) * p.get("L", 0.0)) * p["gamma"] / p["r"]
    raise ValueError(f"unknown bound kind {kind!r}")


# ---------------------------------------------------------------------------
# exact oracle


def _minimize(body, potential, iters=10_000):
    """Minimum of ``f`` over K by projected gradient descent."""
    x = np.zeros(body.dimension)
    beta = potential.smoothness
    if potential.is_uniform or beta == 0:
        return float(potential.value(x))
    step = 1.0 / beta
    for _ in range(iters):
        nxt = body.project(x - step * potential.grad(x))
        if np.max(np.abs(nxt - x)) < 1e-12:
            x = nxt
            break
        x = nxt
    return float(potential.value(x))


def rejection_oracle(body, potential, count, seed, full_output=False, batch=None):
    """Exact i.i.d. samples from ``exp(-f) 1_K`` by rejection from the bounding box.

    The envelope is ``exp(-min_K f)``.  With ``full_output`` the acceptance
    rate is returned as well.
    """
    n = body.dimension
    lo, hi = body.bounding_box()
    fmin = _minimize(body, potential)
    gen = stream(seed)
    batch = batch or max(1024, 2 * count)
    kept, drawn, accepted = [], 0, 0
    while accepted < count:
        x = gen.uniform(lo, hi, size=(batch, n))
        u = gen.random(batch)
        ok = body.membership(x)
        if not potential.is_uniform:
            ok &= u <= np.exp(-(potential.value(x) - fmin))
        drawn += batch
        accepted += int(ok.sum())
        kept.append(x[ok])
        if drawn >= 10**7 and accepted / drawn < 1e-6:
            raise RejectionError(
                f"acceptance rate {accepted / drawn:.2e} too small; use a lower dimension")
    samples = np.concatenate(kept)[:count]
    if full_output:
        return samples, accepted / drawn
    return samples


# ---------------------------------------------------------------------------
# lemma checks


def _h_mass(body, events):
    if not events:
        return 0.0
    normals = np.array([e.normal for e in events])
    masses = np.array([e.mass for e in events])
    return float(np.dot(body.support(normals), masses))


def local_time_budget(trajectories, body, potential, T):
    """Compare the average of ``sum h_K(nu_k) mass_k`` over replicas with ``(n + R L) T / 2``.

    Events after time ``T`` are ignored.
    """
    if isinstance(trajectories, Trajectory):
        trajectories = [trajectories]
    vals = [_h_mass(body, [e for e in tr.local_time if e.time <= T + 1e-12])
            for tr in trajectories]
    mean, se = _mean_stderr(vals)
    bound = evaluate_bound("local_time", n=body.dimension, R=body.circumradius,
                           L=potential.lipschitz_on(body), t=T)
    return BoundReport("local_time", bound, mean, se)


def local_time_experiment(body, potential, T, eta, replicas, seed, threads=1):
    """Replica-batched version of ``local_time_budget`` over chains started at 0."""
    steps = int(round(T / eta))
    acc = np.zeros(replicas)

    def record(k, x, pre):
        disp = pre - x
        mass = np.linalg.norm(disp, axis=1)
        hit = mass > 0
        if np.any(hit):
            acc[hit] += body.support(disp[hit])

    run_lmc_replicas(body, potential, eta, steps, seed, replicas, threads=threads,
                     callback=record)
    mean, se = _mean_stderr(acc)
    bound = evaluate_bound("local_time", n=body.dimension, R=body.circumradius,
                           L=potential.lipschitz_on(body), t=T)
    return BoundReport("local_time", bound, mean, se)


def boundary_mass_check(samples, body, potential, gamma):
    """Fraction of samples within ``gamma`` of the boundary against ``(n + R L) gamma / r``."""
    samples = np.asarray(samples, dtype=float)
    bound = evaluate_bound("boundary_mass", n=body.dimension, R=body.circumradius,
                           L=potential.lipschitz_on(body), gamma=gamma, r=body.inradius)
    if gamma <= 0:
        return BoundReport("boundary_mass", bound, 0.0, 0.0)
    p, se = _proportion(body.distance_to_boundary(samples) <= gamma)
    return BoundReport("boundary_mass", bound, p, se)


def escape_probability_check(body, potential, x, gamma, t, replicas, seed, eta=None,
                             threads=1):
    """Probability that the LMC driving path leaves the ``gamma``-ball around ``x`` by time ``t``.

    The driving path is ``Z_k = sum_j (-(eta/2) grad f(X_j) + sqrt(eta) xi_j)``;
    it coincides with ``X - x`` until the first projection.
    """
    n = body.dimension
    L = potential.lipschitz_on(body)
    bound = evaluate_bound("escape", n=n, t=t, L=L, gamma=gamma)
    if t == 0:
        return BoundReport("escape", bound, 0.0, 0.0)
    eta = eta or t / 1000
    steps = max(1, int(round(t / eta)))
    z = np.zeros((replicas, n))
    escaped = np.zeros(replicas, dtype=bool)

    def record(k, xb, pre):
        nonlocal z
        z += pre - prev[0]
        prev[0] = xb
        np.logical_or(escaped, np.linalg.norm(z, axis=1) > gamma, out=escaped)

    prev = [np.tile(np.asarray(x, dtype=float), (replicas, 1))]
    run_lmc_replicas(body, potential, eta, steps, seed, replicas, start=x, threads=threads,
                     callback=record)
    p, se = _proportion(escaped)
    return BoundReport("escape", bound, p, se)


def coupling_tail_check(tau, dist, times):
    """``P(tau > t)`` against ``dist / sqrt(2 pi t)`` at each time in ``times``."""
    out = []
    for t in times:
        p, se = _proportion(np.asarray(tau) > t)
        out.append(BoundReport(f"coupling_t={t:g}", evaluate_bound("coupling", dist=dist, t=t),
                               p, se))
    return out


def trapezoid_integral(times, values):
    """Trapezoidal integral of checkpointed values (replica columns are averaged)."""
    values = np.asarray(values, dtype=float)
    if values.ndim > 1:
        values = values.mean(axis=1)
    return float(_trapezoid(values, times))


def discretization_gap(body, potential, etas, m, T, seed, replicas, threads=1):
    """Mean terminal gap of coarse-vs-fine coupled chains for each coarse step size.

    Returns ``(means, stderrs, slope)`` with ``slope`` the least-squares
    log-log slope of mean gap against step size.
    """
    means, errs = [], []
    for eta in etas:
        run = coupled_resolution_replicas(body, potential, eta, m, T, seed, replicas,
                                          threads=threads)
        mu, se = _mean_stderr(run.gap)
        means.append(mu)
        errs.append(se)
    slope = float(np.polyfit(np.log(etas), np.log(means), 1)[0])
    return np.array(means), np.array(errs), slope


def tv_w1_bound(body, potential, eta, m, T, seed, replicas, threads=1):
    """Evaluate the change-of-measure TV bound from a coupled-resolution run.

    The time integral of ``E|X_s - Xbar_s|`` is the trapezoidal sum over
    checkpoints every 10 coarse steps.
    """
    run = coupled_resolution_replicas(body, potential, eta, m, T, seed, replicas,
                                      threads=threads, checkpoint_every=10)
    integral = trapezoid_integral(run.checkpoint_times, run.checkpoint_gaps)
    return evaluate_bound("tv_w1", L=potential.lipschitz_on(body),
                          beta=potential.smoothness, integral=integral)


def stationarity_tv(samples, reference, baseline_reference, lower, upper, bins):
    """Grid TV of ``samples`` against an exact reference, plus the i.i.d.-vs-i.i.d. baseline."""
    h = GridHistogram.from_samples(samples, lower, upper, bins)
    r1 = GridHistogram.from_samples(reference, lower, upper, bins)
    r2 = GridHistogram.from_samples(baseline_reference, lower, upper, bins)
    return empirical_tv(h, r1), empirical_tv(r2, r1)


__all__ = [
    "BoundReport", "GridHistogram", "RejectionError", "boundary_mass_check",
    "coupling_tail_check", "discretization_gap", "empirical_tv", "escape_probability_check",
    "evaluate_bound", "local_time_budget", "local_time_experiment", "rejection_oracle",
    "stationarity_tv", "trapezoid_integral", "tv_w1_bound", "wasserstein_1d",
]
