import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lqgame.equilibrium import backward_riccati
from lqgame.errors import AdmissibilityError
from lqgame.filter import (
    ACTION,
    CORRECTED,
    NAIVE,
    RECOVERED,
    BeliefState,
    correction_step,
    covariance_schedule,
    initial_beliefs,
    mixed_step,
    naive_step,
    select_signal_pair,
    single_agent_step,
    two_player_step,
)
from lqgame.model import Prior, scalar_model
from lqgame.scenarios import build_bargaining_1d, build_bargaining_factors
from lqgame.verify import random_model


def _belief(x, S, C=0.0, R=None):
    S = np.atleast_2d(S)
    C = np.atleast_2d(C)
    return BeliefState(0, np.atleast_1d(x).astype(float), S, C, np.atleast_2d(R if R is not None else S))


# ------------------------------------------------------------ single agent


def test_single_agent_scalar_oracle():
    model = scalar_model(T=1, A=1.0, BP=0.0, W=1.0, GP=2.0, H=1.0)
    b = _belief(0.0, 1.0)
    out = single_agent_step(model, b, [0.0], [0.0], 1)
    # predicted 2, gain 0.5, posterior 1
    assert out.Sigma[0, 0] == pytest.approx(1.0, abs=1e-15)
    out2 = single_agent_step(model, _belief(3.0, 1.0), [0.0], [5.0], 1)
    assert out2.xhat[0] == pytest.approx(3.0 + 0.5 * 2.0, abs=1e-14)


def test_single_agent_zero_innovation():
    model = scalar_model(T=1, A=0.7, BP=2.0, W=1.0, GP=2.0, H=1.5)
    xm = 0.7 * 4.0 + 2.0 * 1.0
    out = single_agent_step(model, _belief(4.0, 1.0), [1.0], [1.5 * xm], 1)
    assert out.xhat[0] == pytest.approx(xm, abs=1e-13)


def test_single_agent_uninformative_limit():
    model = scalar_model(T=1, A=1.0, BP=0.0, W=1.0, GP=1e12, H=1.0)
    out = single_agent_step(model, _belief(0.0, 1.0), [0.0], [0.0], 1)
    assert out.Sigma[0, 0] == pytest.approx(2.0, rel=1e-9)


# ------------------------------------------------------------ signals


def test_signal_recovered_scalar():
    sig = select_signal_pair([[-0.4]], None, [-20.0])
    assert sig.mode == RECOVERED
    assert sig.y[0] == pytest.approx(50.0, abs=1e-12)
    np.testing.assert_array_equal(sig.Y, np.eye(1))


def test_signal_action_mode():
    sig = select_signal_pair([[1.0, 2.0]], None, [3.0])
    assert sig.mode == ACTION
    np.testing.assert_array_equal(sig.Y, [[1.0, 2.0]])
    np.testing.assert_array_equal(sig.y, [3.0])


def test_signal_identity():
    sig = select_signal_pair(np.eye(2), None, [3.0, 4.0])
    np.testing.assert_allclose(sig.y, [3.0, 4.0])
    np.testing.assert_array_equal(sig.Y, np.eye(2))


def test_signal_subtracts_public_part():
    sig = select_signal_pair([[-0.5]], [[1.0, 2.0]], [1.0], x2=[1.0, 1.0])
    assert sig.y[0] == pytest.approx((1.0 - 3.0) / -0.5)


def test_signal_rank_deficient():
    with pytest.raises(AdmissibilityError):
        select_signal_pair([[0.0, 0.0]], None, [1.0])


# ------------------------------------------------------------ correction


def test_correction_scalar_oracle():
    b = _belief(40.0, 2.0, 0.0, 3.0)
    sig = select_signal_pair([[1.0]], None, [51.0])
    J, xp, Sp = correction_step(b, sig)
    assert J[0, 0] == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert Sp[0, 0] == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert xp[0] == pytest.approx(40.0 / 2 / 1.5 + 51.0 / 1.5, abs=1e-12)
    assert xp[0] == pytest.approx(47.0 + 1.0 / 3.0, abs=1e-12)


def test_correction_vanishes_when_sigma_equals_cross():
    b = _belief(1.0, 2.0, 2.0, 1.0)
    J, xp, Sp = correction_step(b, select_signal_pair([[1.0]], None, [9.0]))
    assert J[0, 0] == 0.0 and xp[0] == 1.0 and Sp[0, 0] == 2.0


def test_initial_conditions():
    prior = Prior(xhat0P=[1.0, 2.0], W0P=np.eye(2), xhat0E=[0.0, 0.0], W0E=2 * np.eye(2))
    bP, bE = initial_beliefs(prior)
    np.testing.assert_array_equal(bP.SigmaCross, np.zeros((2, 2)))
    np.testing.assert_array_equal(bP.SigmaRel, 3 * np.eye(2))


# ------------------------------------------------------------ joint steps


def test_symmetric_players_share_estimates():
    model = scalar_model(T=4, A=0.9, GP=1.5, GE=1.5, Q_stage=0.3)
    prior = Prior(xhat0P=[2.0], W0P=[[1.0]], xhat0E=[2.0], W0E=[[1.0]])
    ric = backward_riccati(model)
    bP, bE = initial_beliefs(prior)
    rng = np.random.default_rng(0)
    for t in range(1, 5):
        z = rng.standard_normal(1)
        uP, uE = ric.FP[t - 1] @ bP.xhat, ric.FE[t - 1] @ bE.xhat
        rP, rE = two_player_step(model, bP, bE, uP, uE, z, z, ric.FP[t - 1], ric.FE[t - 1], t)
        bP, bE = rP.belief_out, rE.belief_out
        np.testing.assert_allclose(bP.xhat, bE.xhat, rtol=0, atol=1e-12)


def test_full_rank_complementarity():
    model, prior = random_model(3, 2, 2, 2, T=3)
    ric = backward_riccati(model)
    bP, bE = initial_beliefs(prior)
    rng = np.random.default_rng(1)
    for t in range(1, 4):
        uP, uE = ric.FP[t - 1] @ bP.xhat, ric.FE[t - 1] @ bE.xhat
        rP, rE = two_player_step(model, bP, bE, uP, uE, rng.standard_normal(2), rng.standard_normal(2),
                                 ric.FP[t - 1], ric.FE[t - 1], t)
        np.testing.assert_allclose(rP.J + rE.J, np.eye(2), atol=1e-10)
        np.testing.assert_allclose(rP.xhat_plus, rE.xhat_plus, atol=1e-9)
        bP, bE = rP.belief_out, rE.belief_out


def test_naive_equals_corrected_without_correction():
    model = scalar_model(T=1, A=0.8, GP=2.0)
    b = _belief(1.0, 2.0, 2.0, 1.0)
    z = [0.4]
    naive = naive_step(model, b, [0.3], [-0.2], z, 1)
    rP, _ = two_player_step(model, b, _belief(1.0, 2.0, 2.0, 1.0), [0.3], [-0.2], z, z, [[0.3]], [[-0.2]], 1)
    np.testing.assert_allclose(naive.xhat, rP.belief_out.xhat, atol=1e-14)
    np.testing.assert_allclose(naive.Sigma, rP.belief_out.Sigma, atol=1e-14)


def test_naive_zero_innovation_predicts():
    model = scalar_model(T=1, A=0.8, BP=1.0, BE=2.0, H=1.0)
    xm = 0.8 * 1.0 + 0.3 + 2.0 * (-0.2)
    out = naive_step(model, _belief(1.0, 1.0), [0.3], [-0.2], [xm], 1)
    assert out.xhat[0] == pytest.approx(xm, abs=1e-14)


def test_naive_covariance_dominates_corrected():
    model, prior = build_bargaining_1d()
    ric = backward_riccati(model)
    c = covariance_schedule(model, prior, ric.FP, ric.FE, CORRECTED)
    n = covariance_schedule(model, prior, ric.FP, ric.FE, NAIVE)
    assert n.SigmaP[1, 0, 0] >= c.SigmaP[1, 0, 0]
    assert n.SigmaE[1, 0, 0] >= c.SigmaE[1, 0, 0]


def test_mixed_step_bargaining_recovers_estimates():
    model, prior = build_bargaining_1d()
    ric = backward_riccati(model)
    bP, bE = initial_beliefs(prior)
    x2 = prior.x0_observed
    FP, FE = ric.FP[0], ric.FE[0]
    uP = FP @ np.concatenate([bP.xhat, x2])
    uE = FE @ np.concatenate([bE.xhat, x2])
    rP, rE = mixed_step(model, bP, bE, x2, uP, uE, [50.0], [50.0], (FP[:, :1], FP[:, 1:]), (FE[:, :1], FE[:, 1:]), 1)
    np.testing.assert_allclose(rP.J + rE.J, np.eye(1), atol=1e-12)
    np.testing.assert_allclose(rP.xhat_plus, rE.xhat_plus, atol=1e-9)
    # precision-weighted fusion of 40 (var 100) and 51 (var 1)
    assert rP.xhat_plus[0] == pytest.approx((40 / 100 + 51 / 1) / (1 / 100 + 1), rel=1e-12)


def test_mixed_step_factors_action_signal():
    model, prior = build_bargaining_factors()
    ric = backward_riccati(model)
    sched = covariance_schedule(model, prior, ric.FP, ric.FE)
    assert sched.signal_mode_P == ACTION and sched.signal_mode_E == ACTION
    assert sched.JP.shape == (model.T, 2, 1)


def test_bad_step_index():
    model = scalar_model(T=1)
    b = _belief(0.0, 1.0)
    with pytest.raises(ValueError):
        single_agent_step(model, b, [0.0], [0.0], 0)


# ------------------------------------------------------------ properties


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 3), full=st.booleans())
def test_schedule_invariants(seed, n, full):
    m = n if full else 1
    model, prior = random_model(seed, n, m, m, T=4)
    ric = backward_riccati(model)
    sched = covariance_schedule(model, prior, ric.FP, ric.FE, CORRECTED)
    for t in range(model.T + 1):
        for S in (sched.SigmaP[t], sched.SigmaE[t]):
            assert np.allclose(S, S.T, atol=1e-12)
            assert np.linalg.eigvalsh(S)[0] > -1e-10
        assert np.linalg.eigvalsh(sched.Rel[t])[0] > 0.0
        expected = sched.SigmaP[t] + sched.SigmaE[t] - sched.Cross[t] - sched.Cross[t].T
        np.testing.assert_allclose(sched.Rel[t], expected, atol=1e-10)
    for t in range(model.T):
        assert np.linalg.eigvalsh(sched.SigmaP[t] - sched.SigmaPplus[t])[0] >= -1e-10
        assert np.linalg.eigvalsh(sched.SigmaE[t] - sched.SigmaEplus[t])[0] >= -1e-10
        if full:
            np.testing.assert_allclose(sched.JP[t] + sched.JE[t], np.eye(n), atol=1e-10)


def test_rel_covariance_matches_monte_carlo():
    from lqgame.verify import suite_calibration

    rows = [r for r in suite_calibration(1_000_000, 3.0, seed=11) if r.mode.endswith("Rel")]
    assert len(rows) == 6
    for r in rows:
        assert r.passed, r
