import numpy as np
import pytest

from lqgame import _kernel_py, kernel
from lqgame.equilibrium import backward_riccati
from lqgame.filter import CORRECTED, NAIVE
from lqgame.scenarios import get_scenario
from lqgame.simulate import (
    FULL,
    _initial,
    build_plan,
    draw_episode_noise,
    episode_costs,
    figure_series,
    mean_ci,
    paired_comparison,
    run_batch,
    run_episode,
    simulate_trajectories,
)
from lqgame.model import stage_cost
from lqgame.verify import calibration_model


@pytest.fixture(scope="module")
def asym():
    sc = get_scenario("bargain1d-asym")
    return sc, backward_riccati(sc.model)


def _inputs(plan, prior, x0, T, N, seed=0):
    X0 = np.zeros((N, x0.size))
    XP0 = np.zeros((N, plan.n1))
    XE0 = np.zeros((N, plan.n1))
    noise = np.zeros((N, T, plan.noise_width))
    for i in range(N):
        init, steps = draw_episode_noise(seed, i, plan.n1, T, plan.noise_width)
        X0[i], XP0[i], XE0[i] = _initial(prior, plan, x0, init, "sampled")
        noise[i] = steps
    return X0, XP0, XE0, noise


@pytest.mark.skipif(kernel.BACKEND != "cython", reason="compiled kernel not built")
@pytest.mark.parametrize("name", ["bargain1d-asym", "bargain2d-asym"])
@pytest.mark.parametrize("mode", [CORRECTED, NAIVE, FULL])
def test_kernel_parity(name, mode):
    from lqgame import _kernel

    sc = get_scenario(name)
    ric = backward_riccati(sc.model)
    plan = build_plan(sc.model, sc.prior, ric, mode)
    args = _inputs(plan, sc.prior, sc.x0, sc.model.T, 64)
    a = plan.run(*args, impl=_kernel_py.simulate_kernel)
    b = plan.run(*args, impl=_kernel.simulate_kernel)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_kernel_matches_filter_module(asym):
    sc, ric = asym
    tr = run_episode(sc.model, sc.prior, ric, CORRECTED, 3, x0=sc.x0)
    from lqgame.filter import initial_beliefs, mixed_step

    bP, bE = initial_beliefs(sc.prior)
    n1 = sc.model.dims.n1
    for t in range(1, sc.model.T + 1):
        x2 = tr.x_true[t - 1, n1:]
        FP, FE = ric.FP[t - 1], ric.FE[t - 1]
        rP, rE = mixed_step(sc.model, bP, bE, x2, tr.uP[t - 1], tr.uE[t - 1], tr.zP[t - 1], tr.zE[t - 1],
                            (FP[:, :n1], FP[:, n1:]), (FE[:, :n1], FE[:, n1:]), t)
        bP, bE = rP.belief_out, rE.belief_out
        np.testing.assert_allclose(bP.xhat, tr.xhatP[t], rtol=1e-12, atol=1e-9)
        np.testing.assert_allclose(bE.xhat, tr.xhatE[t], rtol=1e-12, atol=1e-9)


def test_batch_split_invariance(asym):
    sc, ric = asym
    big = simulate_trajectories(sc.model, sc.prior, ric, CORRECTED, 40, 9, x0=sc.x0)
    small = simulate_trajectories(sc.model, sc.prior, ric, CORRECTED, 10, 9, x0=sc.x0)
    np.testing.assert_array_equal(big.X[:10], small.X)
    one = run_episode(sc.model, sc.prior, ric, CORRECTED, 9, episode=17, x0=sc.x0)
    np.testing.assert_array_equal(one.x_true, big.X[17])


def test_jobs_do_not_change_results(asym):
    sc, ric = asym
    kw = dict(x0=sc.x0, offer_indices=sc.offer_indices)
    a = run_batch(sc.model, sc.prior, ric, CORRECTED, 200, 4, 3.0, jobs=1, **kw).stats
    b = run_batch(sc.model, sc.prior, ric, CORRECTED, 200, 4, 3.0, jobs=3, **kw).stats
    assert a == b


def test_seed_changes_results(asym):
    sc, ric = asym
    kw = dict(x0=sc.x0, offer_indices=sc.offer_indices)
    a = run_batch(sc.model, sc.prior, ric, CORRECTED, 50, 0, **kw).stats
    b = run_batch(sc.model, sc.prior, ric, CORRECTED, 50, 1, **kw).stats
    assert a.mean_cost_P != b.mean_cost_P


def test_full_observation_has_no_error(asym):
    sc, ric = asym
    res = run_batch(sc.model, sc.prior, ric, FULL, 20, 0, x0=sc.x0, offer_indices=sc.offer_indices, include_initial=False)
    assert res.stats.mse_P == 0.0 and res.stats.mae_E == 0.0


def test_single_episode_stats(asym):
    sc, ric = asym
    s = run_batch(sc.model, sc.prior, ric, CORRECTED, 1, 1, x0=sc.x0, offer_indices=sc.offer_indices).stats
    assert s.episodes == 1
    assert s.cost_P_lo == s.mean_cost_P == s.cost_P_hi


def test_episode_costs_match_stage_cost(asym):
    sc, ric = asym
    tr = simulate_trajectories(sc.model, sc.prior, ric, CORRECTED, 3, 0, x0=sc.x0)
    cP, cE = episode_costs(sc.model, tr)
    T = sc.model.T
    for e in range(3):
        total = sum(stage_cost(sc.model, t, tr.X[e, t], tr.UP[e, t], tr.UE[e, t], "P") for t in range(T))
        total += stage_cost(sc.model, T, tr.X[e, T], tr.UP[e, 0], tr.UE[e, 0], "P")
        assert cP[e] == pytest.approx(total, rel=1e-12)


def test_initial_modes_consistent():
    model, prior = calibration_model()
    ric = backward_riccati(model)
    for how in ("anchor-P", "anchor-E", "sampled"):
        tr = simulate_trajectories(model, prior, ric, CORRECTED, 20_000, 3, initial=how)
        eP = tr.XP[:, 0, 0] - tr.X[:, 0, 0]
        eE = tr.XE[:, 0, 0] - tr.X[:, 0, 0]
        assert abs(eP.var() - prior.W0P[0, 0]) < 0.05 * prior.W0P[0, 0]
        assert abs(eE.var() - prior.W0E[0, 0]) < 0.05 * prior.W0E[0, 0]
        if how == "anchor-P":
            assert np.all(tr.XP[:, 0, 0] == prior.xhat0P[0])
    with pytest.raises(ValueError):
        simulate_trajectories(model, prior, ric, CORRECTED, 2, 0, initial="bogus")


def test_mean_ci():
    m, lo, hi = mean_ci([1.0, 2.0, 3.0])
    assert m == 2.0 and lo < 2.0 < hi
    assert hi - m == pytest.approx(1.959963984540054 * 1.0 / np.sqrt(3))
    assert all(np.isnan(mean_ci([])))


def test_paired_comparison_common_noise(asym):
    sc, ric = asym
    res = paired_comparison(sc.model, sc.prior, ric, 100, 2, x0=sc.x0, offer_indices=sc.offer_indices, keep_trajectories=True)
    # identical true hidden paths: noise is shared and the hidden value is uncontrolled
    np.testing.assert_array_equal(res.corrected.trajectories.X[:, :, 0], res.naive.trajectories.X[:, :, 0])
    assert res.corrected_common.ap_count == res.naive_common.ap_count
    assert res.delta_cost_P.shape == (100,)


def test_figure_series(asym):
    sc, ric = asym
    tr = simulate_trajectories(sc.model, sc.prior, ric, CORRECTED, 10, 0, x0=sc.x0)
    fs = figure_series(tr)
    assert fs["t"].tolist() == list(range(sc.model.T + 1))
    assert fs["mean_x_1"][0] == sc.x0[1]
    np.testing.assert_allclose(fs["mean_xhatP_0"], tr.XP[:, :, 0].mean(axis=0), rtol=1e-13)


def test_episodes_must_be_positive(asym):
    sc, ric = asym
    with pytest.raises(ValueError):
        simulate_trajectories(sc.model, sc.prior, ric, CORRECTED, 0)
