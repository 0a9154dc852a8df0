import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logcave import diagnostics as D
from logcave.geometry import AxisBox, Ball
from logcave.potential import IsotropicGaussian, Uniform
from logcave.sampler import SamplerConfig, Trajectory, run_lmc

BALL2 = Ball(1.0, 2)
BALL3 = Ball(1.0, 3)


# -- histograms and distances ---------------------------------------------------

def _hist(samples, lower=0.0, upper=1.5, bins=3):
    return D.GridHistogram.from_samples(np.asarray(samples, dtype=float)[:, None],
                                        lower, upper, bins)


def test_tv_examples():
    a = _hist([0.1, 0.6, 0.7])
    assert D.empirical_tv(a, a) == 0.0
    assert D.empirical_tv(_hist([0.1, 0.2]), _hist([1.1, 1.4])) == 1.0
    # uniform on [0, 1] vs uniform on [0.5, 1.5], bins of width 0.5
    left = _hist([0.25, 0.75])
    right = _hist([0.75, 1.25])
    assert D.empirical_tv(left, right) == pytest.approx(0.5)


def test_tv_rejects_mismatched_grids():
    with pytest.raises(ValueError):
        D.empirical_tv(_hist([0.1]), _hist([0.1], bins=4))


def test_histogram_limits():
    with pytest.raises(ValueError):
        D.GridHistogram.from_samples(np.zeros((5, 4)), -1, 1, 3)
    h = D.GridHistogram.from_samples(np.zeros((7, 2)) + 0.1, -1, 1, (4, 5))
    assert h.total == 7 and h.counts.shape == (4, 5)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_tv_is_a_metric(seed):
    rng = np.random.default_rng(seed)
    hs = [D.GridHistogram.from_samples(rng.uniform(-1, 1, size=(50, 2)) * rng.uniform(0.2, 1),
                                       -1, 1, 4) for _ in range(3)]
    ab, ba = D.empirical_tv(hs[0], hs[1]), D.empirical_tv(hs[1], hs[0])
    assert ab == ba
    assert 0.0 <= ab <= 1.0
    assert D.empirical_tv(hs[0], hs[2]) <= ab + D.empirical_tv(hs[1], hs[2]) + 1e-12


def test_wasserstein_of_shift():
    x = np.linspace(0, 1, 101)
    assert D.wasserstein_1d(x, x + 0.3) == pytest.approx(0.3)


# -- bound reports ----------------------------------------------------------------

def test_report_pass_rule_and_csv():
    r = D.BoundReport("local_time", 1.5, 1.6, 0.05)
    assert r.passed
    assert not D.BoundReport("x", 1.0, 1.2, 0.05).passed
    assert D.BoundReport.from_csv_row(r.to_csv_row()) == r
    assert r.to_csv_row() == "local_time,1.5,1.6,0.05,true"
    with pytest.raises(ValueError):
        D.BoundReport("x", 1.0, 0.0, -1.0)


def test_bound_formulas():
    assert D.evaluate_bound("escape", n=1, t=1.0, L=0.0, gamma=2.0) == pytest.approx(0.5)
    assert D.evaluate_bound("coupling", dist=1.0, t=1 / (2 * math.pi)) == pytest.approx(1.0)
    # t / (2 R^2) = 50 here, so the exponential branch is the minimum
    assert D.evaluate_bound("mixing", m=1.0, t=1e4, R=10.0) == pytest.approx(math.exp(-50.0))
    assert D.evaluate_bound("mixing", m=1.0, t=1e4, R=1000.0) == pytest.approx(0.01)
    assert D.evaluate_bound("mixing", m=1.0, t=10.0, R=10.0) == pytest.approx(10**-0.5)
    assert D.evaluate_bound("local_time", n=3, R=1.0, L=0.0, t=1.0) == pytest.approx(1.5)
    assert D.evaluate_bound("boundary_mass", n=2, R=1.0, L=0.0, gamma=0.1,
                            r=1.0) == pytest.approx(0.2)
    assert D.evaluate_bound("tv_w1", L=2.0, beta=2.0, integral=0.25) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        D.evaluate_bound("nope")


# -- rejection oracle -----------------------------------------------------------------

def test_box_draws_are_all_accepted():
    xs, rate = D.rejection_oracle(AxisBox.cube(3), Uniform(), 1000, 1, full_output=True)
    assert rate == 1.0 and xs.shape == (1000, 3)


def test_disc_acceptance_rate():
    xs, rate = D.rejection_oracle(BALL2, Uniform(), 100_000, 2, full_output=True)
    se = math.sqrt(0.25 * math.pi * (1 - 0.25 * math.pi) / 100_000)
    assert abs(rate - math.pi / 4) <= 4 * se
    assert np.all(BALL2.membership(xs))


def test_rejection_gaussian_moments():
    from oracles import normal_cdf

    xs = D.rejection_oracle(AxisBox([-1.0], [1.0]), IsotropicGaussian(1.0), 200_000, 3)
    # truncated-normal variance on [-1, 1]
    phi = math.exp(-0.5) / math.sqrt(2 * math.pi)
    z = normal_cdf(1.0) - normal_cdf(-1.0)
    var = 1 - 2 * phi / z
    assert xs.var() == pytest.approx(var, rel=0.01)


def test_tiny_acceptance_fails():
    with pytest.raises(D.RejectionError):
        D.rejection_oracle(AxisBox.cube(2), IsotropicGaussian(1e-5), 5, 0, batch=200_000)


def test_oracle_is_seeded():
    a = D.rejection_oracle(BALL2, Uniform(), 100, 9)
    assert np.array_equal(a, D.rejection_oracle(BALL2, Uniform(), 100, 9))


# -- lemma checks ---------------------------------------------------------------------

def test_interior_trajectory_has_zero_budget():
    tr = Trajectory(np.zeros((5, 3)), [], 0, 0.1)
    r = D.local_time_budget(tr, BALL3, Uniform(), 1.0)
    assert r.theoretical == pytest.approx(1.5)
    assert r.empirical == 0.0 and r.passed


def test_budget_from_trajectories_agrees_with_batch():
    trs = [run_lmc(BALL3, Uniform(), SamplerConfig(1e-2, 100, s)) for s in range(30)]
    r = D.local_time_budget(trs, BALL3, Uniform(), 1.0)
    assert r.passed
    # on the unit ball h_K(nu) = 1, so the budget is the total mass
    assert r.empirical == pytest.approx(np.mean([t.local_time_total() for t in trs]))


def test_local_time_experiment_passes():
    r = D.local_time_experiment(BALL3, Uniform(), 1.0, 1e-3, 200, seed=0)
    assert r.passed and r.empirical > 0


def test_boundary_mass_examples():
    xs = D.rejection_oracle(BALL2, Uniform(), 100_000, 0)
    r = D.boundary_mass_check(xs, BALL2, Uniform(), 0.1)
    assert r.theoretical == pytest.approx(0.2)
    assert abs(r.empirical - 0.19) <= 4 * r.stderr
    assert r.passed
    big = D.boundary_mass_check(xs, BALL2, Uniform(), 1.5)
    assert big.theoretical >= 2 and big.passed
    zero = D.boundary_mass_check(xs, BALL2, Uniform(), 0.0)
    assert (zero.empirical, zero.theoretical, zero.passed) == (0.0, 0.0, True)


def test_escape_examples():
    r = D.escape_probability_check(BALL2, Uniform(), np.zeros(2), 1e6, 0.5, 100, seed=1)
    assert r.empirical == 0.0 and r.theoretical < 1 and r.passed
    r = D.escape_probability_check(BALL2, Uniform(), np.zeros(2), 0.3, 0.0, 100, seed=1)
    assert (r.empirical, r.theoretical) == (0.0, 0.0)
    r = D.escape_probability_check(BALL2, Uniform(), np.zeros(2), 1.0, 0.01, 2000, seed=1)
    assert r.passed


def test_escape_counts_driving_path():
    # gamma below one step: nearly every replica leaves at once
    r = D.escape_probability_check(BALL2, Uniform(), np.zeros(2), 1e-6, 0.01, 200, seed=2,
                                   eta=1e-3)
    assert r.empirical == 1.0


def test_coupling_tail_reports():
    tau = np.array([0.1, 0.2, np.inf, 0.6])
    reps = D.coupling_tail_check(tau, 1.0, [0.25, 1.0])
    assert [r.empirical for r in reps] == [0.5, 0.25]
    assert reps[0].theoretical == pytest.approx(1 / math.sqrt(2 * math.pi * 0.25))


def test_trapezoid_integral():
    t = np.linspace(0, 1, 11)
    assert D.trapezoid_integral(t, t**2) == pytest.approx(1 / 3, abs=2e-3)
    assert D.trapezoid_integral(t, np.c_[t, 3 * t]) == pytest.approx(1.0)


def test_discretization_gap_shrinks():
    means, errs, slope = D.discretization_gap(BALL3, Uniform(), [2e-2, 2e-3], 10, 0.2, 0, 100)
    assert means[1] < means[0]
    assert slope == pytest.approx(math.log10(means[0] / means[1]), rel=1e-9)
    assert np.all(errs > 0)


def test_tv_w1_bound_is_finite_for_gaussian():
    v = D.tv_w1_bound(BALL2, IsotropicGaussian(1.0), 0.01, 4, 0.2, 0, 20)
    assert 0.0 < v < 1.0
    assert D.tv_w1_bound(BALL2, Uniform(), 0.01, 4, 0.2, 0, 20) == 0.0


def test_stationarity_of_exact_samples():
    a = D.rejection_oracle(AxisBox.cube(2), Uniform(), 20_000, 1)
    b = D.rejection_oracle(AxisBox.cube(2), Uniform(), 20_000, 2)
    c = D.rejection_oracle(AxisBox.cube(2), Uniform(), 20_000, 3)
    tv, base = D.stationarity_tv(a, b, c, -1, 1, 20)
    assert tv < 0.1 and base < 0.1
