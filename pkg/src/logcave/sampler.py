"""Projected Langevin Monte Carlo, hit-and-run, and coupled-chain experiments.

The projected LMC update is

    x_{k+1} = P_K(x_k - (eta/2) grad f(x_k) + sqrt(eta) xi_k)

and every projection that moves the pre-point records a boundary
local-time atom (mass, outer normal).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import ReplicaNormals, stream

CHUNK = 4096
HR_GRID = 1024
_GRID = np.linspace(0.0, 1.0, HR_GRID)


@dataclass(frozen=True)
class SamplerConfig:
    eta: float
    steps: int
    seed: int
    start: tuple | None = None

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")

    def start_point(self, n):
        return np.zeros(n) if self.start is None else np.asarray(self.start, dtype=float)


@dataclass(frozen=True)
class LocalTimeEvent:
    """Boundary atom emitted at step ``k`` (time ``k * eta``)."""

    k: int
    time: float
    mass: float
    normal: np.ndarray

    def to_json(self):
        return {"k": self.k, "mass": self.mass, "nu": [float(v) for v in self.normal]}


@dataclass
class Trajectory:
    states: np.ndarray
    local_time: list = field(default_factory=list)
    seed: int | None = None
    eta: float | None = None

    def __len__(self):
        return len(self.states)

    def local_time_total(self):
        return float(sum(e.mass for e in self.local_time))


def _check_start(body, x):
    if not body.membership(x, tol=body.projection_tol):
        raise ValueError("start point must lie in K")


def _event(k, eta, pre, out):
    disp = pre - out
    mass = float(np.linalg.norm(disp))
    if mass == 0.0:
        return None
    return LocalTimeEvent(k, k * eta, mass, disp / mass)


def lmc_step(body, potential, x, eta, xi, k=1):
    """One projected LMC step from ``x`` with standard normal ``xi``.

    Returns the new point and the local-time event produced by the
    projection, or ``None`` when the pre-point was already in K.
    """
    x = np.asarray(x, dtype=float)
    pre = x - 0.5 * eta * potential.grad(x) + math.sqrt(eta) * np.asarray(xi, dtype=float)
    out = body.project(pre)
    return out, _event(k, eta, pre, out)


def _drive(body, increments, start, eta, drift=None):
    """Iterate ``x <- P(x - (eta/2) drift(x) + g)`` and collect events."""
    n = body.dimension
    states = np.empty((len(increments) + 1, n))
    states[0] = start
    events = []
    x = states[0]
    for k, g in enumerate(increments, start=1):
        pre = x + g if drift is None else x - 0.5 * eta * drift(x) + g
        x = body.project(pre)
        states[k] = x
        ev = _event(k, eta, pre, x)
        if ev is not None:
            events.append(ev)
    return states, events


def run_lmc(body, potential, config):
    """Run the projected LMC chain for ``config.steps`` steps.

    The Gaussian stream is ``stream(config.seed)``, so the trajectory is
    reproducible bit-for-bit given ``(seed, eta, steps)``.
    """
    n = body.dimension
    x0 = config.start_point(n)
    _check_start(body, x0)
    gen = stream(config.seed)
    drift = None if potential.is_uniform else potential.grad
    root = math.sqrt(config.eta)
    states = [x0[None, :]]
    events = []
    done = 0
    x = x0
    while done < config.steps:
        m = min(CHUNK, config.steps - done)
        inc = root * gen.standard_normal((m, n))
        s, ev = _drive(body, inc, x, config.eta, drift)
        for e in ev:
            events.append(LocalTimeEvent(e.k + done, (e.k + done) * config.eta, e.mass, e.normal))
        states.append(s[1:])
        x = s[-1]
        done += m
    return Trajectory(np.concatenate(states), events, config.seed, config.eta)


def skorokhod_reconstruct(body, increments, eta, start=None):
    """Reflect the step path with jumps ``g_1..g_N`` at the boundary of K.

    Solves the Skorokhod problem for a piecewise-constant driver:
    ``x_{k+1} = P_K(x_k + g_k)``, with a local-time atom of mass
    ``|x_k + g_k - x_{k+1}|`` at time ``(k+1) eta`` in the direction of the
    displacement.
    """
    increments = np.atleast_2d(np.asarray(increments, dtype=float))
    x0 = np.zeros(body.dimension) if start is None else np.asarray(start, dtype=float)
    _check_start(body, x0)
    states, events = _drive(body, increments, x0, eta)
    return Trajectory(states, events, None, eta)


# ---------------------------------------------------------------------------
# batched replicas


def lmc_batch_step(body, potential, x, eta, xi):
    """Vectorised LMC step on a batch ``x`` of shape ``(B, n)``; returns ``(out, pre)``."""
    pre = x + math.sqrt(eta) * xi
    if not potential.is_uniform:
        pre -= 0.5 * eta * potential.grad(x)
    return body.project(pre), pre


def run_lmc_replicas(body, potential, eta, steps, seed, replicas, start=None,
                     threads=1, callback=None):
    """Advance ``replicas`` independent LMC chains together.

    Replica ``i`` uses the stream ``(seed, i)``.  ``callback(k, x, pre)`` is
    called after every step with the batch state.  Returns the final batch.
    """
    n = body.dimension
    x = np.zeros((replicas, n)) if start is None else np.array(
        np.broadcast_to(start, (replicas, n)), dtype=float)
    noise = ReplicaNormals(seed, replicas, n, threads=threads)
    done = 0
    while done < steps:
        m = min(CHUNK // 4, steps - done)
        xi = noise.draw(m)
        for j in range(m):
            x, pre = lmc_batch_step(body, potential, x, eta, xi[:, j])
            if callback is not None:
                callback(done + j + 1, x, pre)
        done += m
    return x


# ---------------------------------------------------------------------------
# hit-and-run


def _truncated_draw(potential, x, d, lo, hi, u):
    """Inverse-CDF draw of ``t`` on ``[lo, hi]`` with density ``exp(-f(x + t d))``."""
    t = lo[:, None] + (hi - lo)[:, None] * _GRID
    logp = -potential.line_values(x, d, t)
    dens = np.exp(logp - np.max(logp, axis=1, keepdims=True))
    cdf = np.zeros_like(dens)
    np.cumsum(dens[:, 1:] + dens[:, :-1], axis=1, out=cdf[:, 1:])
    target = u * cdf[:, -1]
    rows = np.arange(len(x))
    idx = np.clip(np.sum(cdf < target[:, None], axis=1), 1, HR_GRID - 1)
    c0, c1 = cdf[rows, idx - 1], cdf[rows, idx]
    t0, t1 = t[rows, idx - 1], t[rows, idx]
    w = np.where(c1 > c0, (target - c0) / np.where(c1 > c0, c1 - c0, 1.0), 0.0)
    return t0 + w * (t1 - t0)


def hit_and_run_batch_step(body, potential, x, direction, u):
    """Hit-and-run step for a batch, given raw normals ``direction`` and uniforms ``u``."""
    d = direction / np.linalg.norm(direction, axis=1, keepdims=True)
    ch = body.chord(x, d)
    lo, hi = np.atleast_1d(ch.t_min), np.atleast_1d(ch.t_max)
    if potential.is_uniform:
        t = lo + (hi - lo) * u
    else:
        t = _truncated_draw(potential, x, d, lo, hi, u)
    out = x + t[:, None] * d
    # guard against round-off at the chord ends
    outside = body.residual(out) > 0
    if np.any(outside):
        out[outside] = body.project(out[outside])
    return out


def hit_and_run_step(body, potential, x, rng):
    """One hit-and-run step from interior point ``x`` using generator ``rng``.

    The direction is uniform on the sphere; the position on the chord is
    drawn from the restriction of ``exp(-f)`` (exactly for the uniform
    potential, by a 1024-node inverse CDF otherwise).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    d = rng.standard_normal(xb.shape)
    u = rng.random(len(xb))
    out = hit_and_run_batch_step(body, potential, xb, d, u)
    return out[0] if single else out


def run_hit_and_run(body, potential, steps, seed, start=None):
    n = body.dimension
    x = np.zeros(n) if start is None else np.asarray(start, dtype=float)
    _check_start(body, x)
    gen = stream(seed)
    states = np.empty((steps + 1, n))
    states[0] = x
    for k in range(steps):
        x = hit_and_run_step(body, potential, x, gen)
        states[k + 1] = x
    return Trajectory(states, [], seed, None)


# ---------------------------------------------------------------------------
# coupled resolutions


@dataclass
class CoupledRun:
    """Terminal states of a fine/coarse pair sharing one Brownian path.

    ``checkpoint_times`` and ``checkpoint_gaps`` record ``|fine - coarse|``
    every ``checkpoint_every`` coarse steps (including time 0).
    """

    fine: np.ndarray
    coarse: np.ndarray
    gap: float | np.ndarray
    checkpoint_times: np.ndarray
    checkpoint_gaps: np.ndarray


def _coarse_steps(eta_coarse, T):
    steps = int(round(T / eta_coarse))
    if abs(steps * eta_coarse - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be an integer multiple of eta_coarse")
    return steps


def _coupled(body, potential, eta_coarse, m, steps, fine_noise, start, checkpoint_every):
    """Shared core; ``fine_noise(k)`` yields the fine normals for coarse step ``k``
    with shape ``(B, m, n)``."""
    eta_f = eta_coarse / m
    root = math.sqrt(eta_f)
    fine = start.copy()
    coarse = start.copy()
    times, gaps = [0.0], [np.linalg.norm(fine - coarse, axis=1)]
    for k in range(steps):
        xi = fine_noise(k)
        for j in range(m):
            fine, _ = lmc_batch_step(body, potential, fine, eta_f, xi[:, j])
        inc = root * xi.sum(axis=1)
        pre = coarse + inc
        if not potential.is_uniform:
            pre -= 0.5 * eta_coarse * potential.grad(coarse)
        coarse = body.project(pre)
        if (k + 1) % checkpoint_every == 0 or k + 1 == steps:
            times.append((k + 1) * eta_coarse)
            gaps.append(np.linalg.norm(fine - coarse, axis=1))
    return fine, coarse, np.array(times), np.array(gaps)


def coupled_resolution_run(body, potential, eta_coarse, m, T, seed, start=None,
                           fine_noise=None, checkpoint_every=10):
    """Run a fine chain (step ``eta_coarse / m``) and a coarse chain on the same noise.

    Coarse increments are sums of ``m`` consecutive fine increments.  The
    fine chain stands in for the continuous process.  ``fine_noise`` may
    supply the fine standard normals explicitly, shape ``(steps * m, n)``.
    """
    n = body.dimension
    steps = _coarse_steps(eta_coarse, T)
    x0 = np.zeros(n) if start is None else np.asarray(start, dtype=float)
    _check_start(body, x0)
    if fine_noise is None:
        fine_noise = stream(seed).standard_normal((steps * m, n))
    fine_noise = np.asarray(fine_noise, dtype=float).reshape(1, steps, m, n)
    fine, coarse, times, gaps = _coupled(body, potential, eta_coarse, m, steps,
                                         lambda k: fine_noise[:, k], x0[None, :],
                                         checkpoint_every)
    return CoupledRun(fine[0], coarse[0], float(gaps[-1, 0]), times, gaps[:, 0])


def coupled_resolution_replicas(body, potential, eta_coarse, m, T, seed, replicas,
                                start=None, threads=1, checkpoint_every=10):
    """Replica-batched ``coupled_resolution_run``; replica ``i`` uses stream ``(seed, i)``.

    ``gap`` and ``checkpoint_gaps`` carry one column per replica.
    """
    n = body.dimension
    steps = _coarse_steps(eta_coarse, T)
    x0 = np.zeros(n) if start is None else np.asarray(start, dtype=float)
    _check_start(body, x0)
    noise = ReplicaNormals(seed, replicas, n, threads=threads)
    block = max(1, CHUNK // m)
    buf = {}

    def fine_noise(k):
        if k not in buf:
            buf.clear()
            size = min(block, steps - k)
            xi = noise.draw(size * m).reshape(replicas, size, m, n)
            for j in range(size):
                buf[k + j] = xi[:, j]
        return buf[k]

    fine, coarse, times, gaps = _coupled(body, potential, eta_coarse, m, steps, fine_noise,
                                         np.tile(x0, (replicas, 1)), checkpoint_every)
    return CoupledRun(fine, coarse, gaps[-1], times, gaps)


# ---------------------------------------------------------------------------
# reflection coupling


def reflect_noise(xi, v):
    """Householder mirror ``xi - 2 <v, xi> v`` for unit ``v`` (batched on the last axis)."""
    xi = np.asarray(xi, dtype=float)
    v = np.asarray(v, dtype=float)
    return xi - 2.0 * np.sum(v * xi, axis=-1, keepdims=True) * v


@dataclass
class CouplingResult:
    tau: float | np.ndarray
    first: np.ndarray
    second: np.ndarray


def _coupled_pair_step(body, potential, x, y, merged, eta, xi, u, merge_tol):
    """Advance the pair one step; ``merged`` rows share noise and state."""
    root = math.sqrt(eta)
    mx, my = x, y
    if not potential.is_uniform:
        mx = x - 0.5 * eta * potential.grad(x)
        my = y - 0.5 * eta * potential.grad(y)
    pre_x = mx + root * xi
    diff = (mx - my) / root
    dist = np.linalg.norm(diff, axis=1)
    live = ~merged & (dist > 0)
    # maximal reflection coupling: land on the same pre-point with the
    # largest admissible probability, otherwise mirror the noise
    log_ratio = -np.einsum("ij,ij->i", xi, diff) - 0.5 * dist**2
    meet = live & (np.log(np.maximum(u, 1e-300)) <= log_ratio)
    v = diff / np.where(dist > 0, dist, 1.0)[:, None]
    pre_y = my + root * reflect_noise(xi, v)
    pre_y[meet | merged] = pre_x[meet | merged]
    nx = body.project(pre_x)
    ny = body.project(pre_y)
    snap = ~merged & (np.linalg.norm(nx - ny, axis=1) <= merge_tol)
    ny[snap] = nx[snap]
    return nx, ny, merged | snap


def reflection_coupled_pair(body, potential, x, x2, T, eta, seed, merge_tol=None):
    """Couple LMC chains from ``x`` and ``x2`` by reflecting the noise.

    Returns the first time ``k * eta`` at which the chains coincide
    (``inf`` if they have not met by ``T``) and both trajectories.
    """
    res = coupling_replicas(body, potential, x, x2, T, eta, seed, 1,
                            merge_tol=merge_tol, keep_paths=True, stream_key=False)
    return CouplingResult(float(res.tau[0]), res.first[:, 0], res.second[:, 0])


def coupling_replicas(body, potential, x, x2, T, eta, seed, replicas, merge_tol=None,
                      threads=1, keep_paths=False, stream_key=True):
    """Coupling times of ``replicas`` independent reflection-coupled pairs."""
    n = body.dimension
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    _check_start(body, x)
    _check_start(body, x2)
    if merge_tol is None:
        merge_tol = 1e-3 * math.sqrt(eta)
    steps = int(math.floor(T / eta + 1e-9))
    a = np.tile(x, (replicas, 1))
    b = np.tile(x2, (replicas, 1))
    merged = np.linalg.norm(a - b, axis=1) <= merge_tol
    b[merged] = a[merged]
    tau = np.where(merged, 0.0, np.inf)
    if stream_key:
        noise = ReplicaNormals(seed, replicas, n, tag=0, threads=threads)
        unif = ReplicaNormals(seed, replicas, n, tag=1)
        draw = lambda m: (noise.draw(m), unif.uniform(m))  # noqa: E731
    else:
        gen = stream(seed)

        def draw(m):
            return gen.standard_normal((1, m, n)), gen.random((1, m))

    paths_a, paths_b = [a.copy()], [b.copy()]
    done = 0
    while done < steps:
        m = min(CHUNK // 4, steps - done)
        xi, u = draw(m)
        for j in range(m):
            a, b, now = _coupled_pair_step(body, potential, a, b, merged, eta,
                                           xi[:, j], u[:, j], merge_tol)
            tau[now & ~merged] = (done + j + 1) * eta
            merged = now
            if keep_paths:
                paths_a.append(a.copy())
                paths_b.append(b.copy())
        done += m
    if keep_paths:
        return CouplingResult(tau, np.array(paths_a), np.array(paths_b))
    return CouplingResult(tau, a, b)


# ---------------------------------------------------------------------------
# step-size schedules


def _log_floor(v):
    return max(math.log(v), 1.0)


def schedule_theorem1(n, R, epsilon, case="uniform", L=0.0, beta=0.0):
    """Step size and iteration count from the worst-case analysis (``r = 1``).

    Hidden constants are set to 1 and logarithms are floored at 1.
    ``case="uniform"`` gives ``eta = eps^8 / (R^4 n^7 log(n)^3)`` and
    ``N = R^6 n^7 log(n)^4 / eps^8``; ``case="general"`` uses
    ``n* = max(n, R L, R beta)`` with ``eta = eps^12 / (n*^12 R^4 lam^7)`` and
    ``N = n*^12 R^6 lam^8 / eps^12`` where ``lam = max(log n, log R, log 1/eps)``.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if case == "uniform":
        lg = _log_floor(n)
        return epsilon**8 / (R**4 * n**7 * lg**3), R**6 * n**7 * lg**4 / epsilon**8
    if case == "general":
        ns = effective_dimension(n, R, L, beta)
        lam = max(_log_floor(n), _log_floor(R), _log_floor(1 / epsilon))
        return epsilon**12 / (ns**12 * R**4 * lam**7), ns**12 * R**6 * lam**8 / epsilon**12
    raise ValueError(f"unknown case {case!r}")


def effective_dimension(n, R, L, beta):
    return max(n, R * L, R * beta)


def schedule_practical(beta, n):
    """Heuristic step size ``1 / (beta n^2)``; ``beta = 0`` (uniform target) uses ``1 / n^2``."""
    if beta <= 0:
        beta = 1.0
    return 1.0 / (beta * n * n)
