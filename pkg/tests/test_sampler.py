import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import kstest, ks_2samp

from logcave import sampler as S
from logcave._rng import ReplicaNormals, stream
from logcave.geometry import AxisBox, Ball, Intersection
from logcave.potential import IsotropicGaussian, Uniform

BALL3 = Ball(1.0, 3)
INTERVAL = AxisBox([-1.0], [1.0])


# -- single steps ---------------------------------------------------------------

def test_zero_noise_uniform_step_is_identity():
    x = np.array([0.2, -0.4])
    out, ev = S.lmc_step(Ball(1.0, 2), Uniform(), x, 0.1, np.zeros(2))
    assert np.array_equal(out, x) and ev is None


def test_step_onto_ball_records_atom():
    out, ev = S.lmc_step(Ball(1.0, 2), Uniform(), np.array([0.9, 0.0]), 1.0,
                         np.array([1.1, 0.0]))
    assert np.allclose(out, [1.0, 0.0])
    assert ev.mass == pytest.approx(1.0)
    assert np.allclose(ev.normal, [1.0, 0.0])


def test_gaussian_drift_step():
    out, ev = S.lmc_step(INTERVAL, IsotropicGaussian(1.0), np.array([0.5]), 0.04, np.zeros(1))
    assert out[0] == pytest.approx(0.49, abs=1e-15)
    assert ev is None


def test_event_normal_is_outer_normal(rng):
    body = Intersection(AxisBox.cube(2), Ball(1.2, 2))
    probes = rng.uniform(-1, 1, size=(2000, 2))
    probes = probes[body.membership(probes)]
    for _ in range(50):
        pre = rng.uniform(-3, 3, size=2)
        if body.membership(pre):
            continue
        out = body.project(pre)
        ev = S._event(1, 0.1, pre, out)
        assert ev.mass > 0
        assert np.all((out - probes) @ ev.normal >= -1e-6)


# -- full chains --------------------------------------------------------------

def test_empty_run_returns_start():
    tr = S.run_lmc(BALL3, Uniform(), S.SamplerConfig(0.01, 0, 1, start=(0.1, 0.0, 0.0)))
    assert tr.states.shape == (1, 3)
    assert np.array_equal(tr.states[0], [0.1, 0.0, 0.0])
    assert tr.local_time == []


def test_same_seed_same_trajectory():
    cfg = S.SamplerConfig(0.05, 5000, 11)
    a = S.run_lmc(BALL3, IsotropicGaussian(1.0), cfg)
    b = S.run_lmc(BALL3, IsotropicGaussian(1.0), cfg)
    assert np.array_equal(a.states, b.states)
    assert [e.to_json() for e in a.local_time] == [e.to_json() for e in b.local_time]


def test_chunking_does_not_change_the_stream():
    # more steps than one noise chunk
    cfg = S.SamplerConfig(0.05, S.CHUNK + 17, 3)
    tr = S.run_lmc(BALL3, Uniform(), cfg)
    inc = math.sqrt(0.05) * stream(3).standard_normal((S.CHUNK + 17, 3))
    ref = S.skorokhod_reconstruct(BALL3, inc, 0.05)
    assert np.array_equal(tr.states, ref.states)


def test_states_stay_feasible():
    body = Intersection(AxisBox.cube(2), Ball(1.2, 2))
    tr = S.run_lmc(body, IsotropicGaussian(0.5), S.SamplerConfig(0.3, 3000, 5))
    assert np.all(body.membership(tr.states, tol=body.projection_tol))
    assert all(e.mass > 0 and abs(np.linalg.norm(e.normal) - 1) < 1e-12
               for e in tr.local_time)


def test_uniform_box_mean_is_centred():
    box = AxisBox.cube(2)
    tr = S.run_lmc(box, Uniform(), S.SamplerConfig(S.schedule_practical(0.0, 2), 200_000, 7))
    assert np.all(np.abs(tr.states[100_000:].mean(axis=0)) <= 0.02)


def test_start_outside_is_rejected():
    with pytest.raises(ValueError):
        S.run_lmc(BALL3, Uniform(), S.SamplerConfig(0.1, 5, 1, start=(2.0, 0.0, 0.0)))


def test_config_validation():
    with pytest.raises(ValueError):
        S.SamplerConfig(0.0, 5, 1)
    with pytest.raises(ValueError):
        S.SamplerConfig(0.1, -1, 1)


def test_event_json_layout():
    ev = S.LocalTimeEvent(4, 0.4, 0.25, np.array([0.0, 1.0]))
    assert ev.to_json() == {"k": 4, "mass": 0.25, "nu": [0.0, 1.0]}


# -- Skorokhod reconstruction ----------------------------------------------------

def test_single_jump_out_of_ball():
    tr = S.skorokhod_reconstruct(Ball(1.0, 2), [[2.0, 0.0]], eta=0.1)
    assert np.allclose(tr.states[1], [1.0, 0.0])
    (ev,) = tr.local_time
    assert (ev.k, ev.time, ev.mass) == (1, pytest.approx(0.1), pytest.approx(1.0))
    assert np.allclose(ev.normal, [1.0, 0.0])


def test_two_jumps_hand_computed():
    tr = S.skorokhod_reconstruct(Ball(1.0, 2), [[2.0, 0.0], [0.0, 2.0]], eta=1.0)
    r5 = math.sqrt(5)
    assert np.allclose(tr.states[1], [1.0, 0.0])
    assert np.allclose(tr.states[2], np.array([1.0, 2.0]) / r5)
    ev = tr.local_time[1]
    assert ev.mass == pytest.approx(r5 - 1)
    assert np.allclose(ev.normal, np.array([1.0, 2.0]) / r5)


def test_interior_increments_have_no_local_time():
    tr = S.skorokhod_reconstruct(Ball(1.0, 2), 0.01 * np.ones((20, 2)), eta=0.1)
    assert tr.local_time == []
    assert np.allclose(tr.states[-1], [0.2, 0.2])


def test_reconstruction_matches_uniform_lmc():
    eta = 0.02
    tr = S.run_lmc(BALL3, Uniform(), S.SamplerConfig(eta, 3000, 99))
    inc = math.sqrt(eta) * stream(99).standard_normal((3000, 3))
    ref = S.skorokhod_reconstruct(BALL3, inc, eta)
    assert np.array_equal(tr.states, ref.states)
    assert [e.to_json() for e in tr.local_time] == [e.to_json() for e in ref.local_time]


# -- hit-and-run -----------------------------------------------------------------

def test_interval_hit_and_run_is_uniform():
    rng = stream(2024)
    draws = np.array([S.hit_and_run_step(INTERVAL, Uniform(), np.zeros(1), rng)[0]
                      for _ in range(3000)])
    assert kstest(draws, "uniform", args=(-1, 2)).pvalue > 0.01


def test_hit_and_run_stays_inside():
    body = Intersection(AxisBox.cube(3), Ball(1.3, 3))
    tr = S.run_hit_and_run(body, Uniform(), 2000, 4)
    assert np.all(body.membership(tr.states, tol=body.projection_tol))


def test_flat_gaussian_matches_uniform_chord():
    rng = stream(8)
    x = np.zeros((4000, 1))
    d = np.ones((4000, 1))
    flat = S.hit_and_run_batch_step(INTERVAL, IsotropicGaussian(1e6), x, d, rng.random(4000))
    unif = rng.uniform(-1, 1, size=4000)
    assert ks_2samp(flat[:, 0], unif).pvalue > 0.01


def test_hit_and_run_gaussian_marginal():
    # 1-D grid inverse CDF against the exact truncated normal
    from oracles import normal_cdf

    rng = stream(9)
    x = np.zeros((20000, 1))
    d = np.ones((20000, 1))
    out = S.hit_and_run_batch_step(INTERVAL, IsotropicGaussian(1.0), x, d, rng.random(20000))
    z = normal_cdf(1.0) - normal_cdf(-1.0)
    cdf = lambda t: (np.vectorize(normal_cdf)(t) - normal_cdf(-1.0)) / z  # noqa: E731
    assert kstest(out[:, 0], cdf).pvalue > 0.01


# -- coupled resolutions -----------------------------------------------------------

def test_refine_one_gives_identical_chains():
    run = S.coupled_resolution_run(BALL3, Uniform(), 0.01, 1, 1.0, seed=5)
    assert run.gap == 0.0


def test_zero_noise_gives_zero_gap():
    run = S.coupled_resolution_run(BALL3, Uniform(), 0.01, 10, 0.5, seed=5,
                                   fine_noise=np.zeros((500, 3)))
    assert run.gap == 0.0
    assert np.array_equal(run.fine, np.zeros(3))


def test_coupled_run_requires_whole_steps():
    with pytest.raises(ValueError):
        S.coupled_resolution_run(BALL3, Uniform(), 0.3, 2, 1.0, seed=1)


def test_coarse_chain_matches_summed_increments():
    noise = stream(6).standard_normal((40, 3))
    run = S.coupled_resolution_run(BALL3, Uniform(), 0.02, 4, 0.2, seed=0, fine_noise=noise)
    coarse_inc = math.sqrt(0.005) * noise.reshape(10, 4, 3).sum(axis=1)
    ref = S.skorokhod_reconstruct(BALL3, coarse_inc, 0.02)
    assert np.allclose(run.coarse, ref.states[-1], atol=1e-15)
    fine = S.skorokhod_reconstruct(BALL3, math.sqrt(0.005) * noise, 0.005)
    assert np.allclose(run.fine, fine.states[-1], atol=1e-15)


def test_replica_checkpoints():
    run = S.coupled_resolution_replicas(BALL3, Uniform(), 0.01, 5, 0.5, seed=2, replicas=8)
    assert run.gap.shape == (8,)
    assert np.allclose(run.checkpoint_times, np.arange(6) * 0.1)
    assert np.all(run.checkpoint_gaps[0] == 0)


# -- reflection coupling ------------------------------------------------------------

def test_mirror_map():
    assert np.allclose(S.reflect_noise([1.0, 2.0], [1.0, 0.0]), [-1.0, 2.0])


@settings(max_examples=200, deadline=None)
@given(arrays(float, 4, elements=st.floats(-1e3, 1e3)),
       arrays(float, 4, elements=st.floats(-1.0, 1.0)).filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_mirror_preserves_norm(xi, v):
    v = v / np.linalg.norm(v)
    out = S.reflect_noise(xi, v)
    assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(xi), rel=1e-12, abs=1e-9)


def test_equal_starts_are_merged():
    x = np.array([0.1, 0.2, 0.0])
    res = S.reflection_coupled_pair(BALL3, Uniform(), x, x, 0.1, 0.01, seed=1)
    assert res.tau == 0.0


def test_coupled_chains_stay_together():
    res = S.reflection_coupled_pair(BALL3, Uniform(), np.array([0.3, 0, 0]),
                                    np.array([-0.3, 0, 0]), 2.0, 1e-3, seed=3)
    assert math.isfinite(res.tau)
    k = int(round(res.tau / 1e-3))
    assert np.array_equal(res.first[k:], res.second[k:])
    assert not np.array_equal(res.first[k - 1], res.second[k - 1])


def test_each_marginal_is_a_plain_chain():
    # the second chain's noise is a per-step isometry of standard normals, so
    # its first step has the law of an unconstrained step
    x, y = np.array([0.5, 0.0, 0.0]), np.array([-0.5, 0.0, 0.0])
    res = S.coupling_replicas(BALL3, Uniform(), x, y, 0.01, 0.01, seed=4, replicas=4000)
    z = (res.second - y) / 0.1
    for j in range(3):
        assert kstest(z[:, j], "norm").pvalue > 0.01


# -- schedules -------------------------------------------------------------------------

def test_theorem_schedule_spot_value():
    eta, N = S.schedule_theorem1(10, 2.0, 0.1)
    assert eta == pytest.approx(5.1196e-18, rel=1e-4)
    assert N == pytest.approx(1.799e18, rel=1e-3)


def test_theorem_schedule_scaling_and_degenerate_case():
    _, N1 = S.schedule_theorem1(10, 2.0, 0.1)
    _, N2 = S.schedule_theorem1(10, 2.0, 0.05)
    assert N2 / N1 == pytest.approx(2.0**8)
    assert S.effective_dimension(7, 3.0, 0.0, 0.0) == 7
    eta_g, N_g = S.schedule_theorem1(7, 3.0, 0.1, case="general")
    lam = max(math.log(7), math.log(3.0), math.log(10.0))
    assert N_g == pytest.approx(7**12 * 3.0**6 * lam**8 / 0.1**12)
    assert eta_g == pytest.approx(0.1**12 / (7**12 * 3.0**4 * lam**7))


def test_general_schedule_uses_effective_dimension():
    # n* = max(2, 2 * 10, 2 * 1) = 20; every logarithm is below 1 and floored
    _, N = S.schedule_theorem1(2, 2.0, 0.5, case="general", L=10.0, beta=1.0)
    assert N == pytest.approx(20.0**12 * 2.0**6 / 0.5**12)


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.2])
def test_theorem_schedule_rejects_bad_epsilon(eps):
    with pytest.raises(ValueError):
        S.schedule_theorem1(3, 1.0, eps)


def test_practical_rule():
    assert S.schedule_practical(1.0, 10) == pytest.approx(0.01)
    assert S.schedule_practical(4.0, 10) == pytest.approx(0.0025)
    assert S.schedule_practical(0.0, 20) == pytest.approx(1 / 400)


# -- determinism -----------------------------------------------------------------------

def test_replica_noise_is_independent_of_threads():
    a = ReplicaNormals(17, 6, 3, threads=1).draw(100)
    b = ReplicaNormals(17, 6, 3, threads=4).draw(100)
    assert np.array_equal(a, b)


def test_replica_noise_chunking():
    one = ReplicaNormals(17, 3, 2).draw(50)
    gen = ReplicaNormals(17, 3, 2)
    two = np.concatenate([gen.draw(20), gen.draw(30)], axis=1)
    assert np.array_equal(one, two)


def test_coupling_times_independent_of_threads():
    args = (BALL3, Uniform(), np.array([0.5, 0, 0]), np.array([-0.5, 0, 0]), 0.2, 1e-2, 3, 50)
    a = S.coupling_replicas(*args, threads=1)
    b = S.coupling_replicas(*args, threads=3)
    assert np.array_equal(a.tau, b.tau)
