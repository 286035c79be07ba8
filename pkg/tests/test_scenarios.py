import numpy as np
import pytest

from lqgame.model import load_config, save_config, stage_cost, validate
from lqgame.scenarios import (
    SCENARIO_NAMES,
    BargainingParams,
    beneficial_params,
    build_bargaining_1d,
    build_bargaining_factors,
    build_beneficial_price,
    factor_params,
    get_scenario,
    terminal_weight,
)


def test_default_parameters():
    p = BargainingParams()
    assert (p.alphaB, p.betaB, p.deltaB, p.deltaS, p.T, p.rhoB, p.gammaB, p.p0, p.x0B, p.x0S) == (
        50.0, 30.0, -0.05, 0.05, 10, 15.0, 0.1, 50.0, 10.0, 90.0)


def test_1d_structure():
    model, prior = build_bargaining_1d()
    d = model.dims
    assert (d.n1, d.n2, d.n, d.m, d.k) == (1, 2, 3, 1, 1)
    np.testing.assert_array_equal(model.A[0], np.eye(3))
    np.testing.assert_array_equal(model.BP[0][:, 0], [0, 1, 0])
    np.testing.assert_array_equal(model.BE[0][:, 0], [0, 0, 1])
    assert np.all(model.QP[:-1] == 0)
    np.testing.assert_array_equal(np.diag(model.W), [9.0, 1e-12, 1e-12])
    assert model.GP[0, 0] == 100.0 and model.GE[0, 0] == 1.0
    assert prior.xhat0P[0] == 40.0 and prior.W0P[0, 0] == 100.0
    assert prior.xhat0E[0] == 51.0 and prior.W0E[0, 0] == 1.0


def test_1d_terminal_displays():
    model, _ = build_bargaining_1d()
    a, b, dB, dS = 50.0, 30.0, -0.05, 0.05
    QB = np.array([[b * (1 + dB) ** 2, -b * (1 + dB), 0], [-b * (1 + dB), a + b, -a], [0, -a, a]])
    QS = np.array([[b * (1 + dS) ** 2, 0, -b * (1 + dS)], [0, a, -a], [-b * (1 + dS), -a, a + b]])
    np.testing.assert_allclose(model.QP[-1], QB, rtol=1e-15)
    np.testing.assert_allclose(model.QE[-1], QS, rtol=1e-15)


def test_concession_schedule():
    model, _ = build_bargaining_1d()
    t = np.arange(10)
    np.testing.assert_allclose(model.RP[:, 0, 0], 15.0 * np.exp(-0.1 * (t + 1)), rtol=1e-15)
    m0, _ = build_bargaining_1d(BargainingParams(schedule_offset=0))
    assert m0.RP[0, 0, 0] == 15.0


def test_factor_structure_and_block():
    model, prior = build_bargaining_factors()
    d = model.dims
    assert (d.n1, d.n2) == (2, 2)
    theta = np.array([1.0, 1.0])
    np.testing.assert_allclose(model.QP[-1][:2, :2], 30 * 0.95**2 * np.outer(theta, theta), rtol=1e-15)
    np.testing.assert_array_equal(model.GP, 50 * np.eye(2))
    np.testing.assert_array_equal(prior.xhat0E, [31.0, 20.0])


def test_factor_terminal_entries_by_expansion(rng):
    """Quadratic form equals alpha (xB - xS)^2 + beta (xB - (1+delta) theta'xi)^2 entrywise."""
    theta = (0.7, 1.3)
    QB = terminal_weight(50.0, 30.0, -0.05, theta, 0, 2)
    c = 1 - 0.05
    expected = np.zeros((4, 4))
    expected[0, 0] = 30 * c**2 * theta[0] ** 2
    expected[1, 1] = 30 * c**2 * theta[1] ** 2
    expected[0, 1] = expected[1, 0] = 30 * c**2 * theta[0] * theta[1]
    expected[0, 2] = expected[2, 0] = -30 * c * theta[0]
    expected[1, 2] = expected[2, 1] = -30 * c * theta[1]
    expected[2, 2] = 80.0
    expected[2, 3] = expected[3, 2] = -50.0
    expected[3, 3] = 50.0
    np.testing.assert_allclose(QB, expected, rtol=1e-15)
    for _ in range(100):
        xi = rng.uniform(0, 60, 2)
        xb, xs = rng.uniform(0, 100, 2)
        x = np.array([*xi, xb, xs])
        direct = 50 * (xb - xs) ** 2 + 30 * (xb - c * (theta[0] * xi[0] + theta[1] * xi[1])) ** 2
        assert x @ QB @ x == pytest.approx(direct, rel=1e-10)


def test_single_factor_collapse():
    Q2 = terminal_weight(50.0, 30.0, -0.05, (1.0, 0.0), 0, 2)
    Q1 = terminal_weight(50.0, 30.0, -0.05, (1.0,), 0, 1)
    keep = [0, 2, 3]
    np.testing.assert_allclose(Q2[np.ix_(keep, keep)], Q1, rtol=1e-15)
    assert np.all(Q2[1] == 0) and np.all(Q2[:, 1] == 0)


def test_beneficial_defaults():
    model, prior = build_beneficial_price()
    p = beneficial_params()
    assert (p.alphaB, p.alphaS, p.betaB, p.betaS, p.rhoB, p.Wbar) == (20.0, 50.0, 40.0, 30.0, 10.0, 1.0)
    assert prior.xhat0P[0] == 70.0 and prior.xhat0E[0] == 53.0
    x = np.array([50.0, 48.0, 52.0])
    assert stage_cost(model, model.T, x, [0], [0], "P") == pytest.approx(20 * 16 + 40 * (48 - 47.5) ** 2)


def test_equal_penalties_reduce_to_base_shape():
    m1, _ = build_beneficial_price(beneficial_params(alphaB=50.0, betaB=30.0, rhoB=15.0, rhoS=15.0, Wbar=9.0))
    m0, _ = build_bargaining_1d()
    np.testing.assert_array_equal(m1.QP, m0.QP)
    np.testing.assert_array_equal(m1.RP, m0.RP)


@pytest.mark.parametrize("name", SCENARIO_NAMES)
def test_every_scenario_validates_and_round_trips(name, tmp_path):
    sc = get_scenario(name)
    rep = validate(sc.model, sc.prior)
    assert rep.ok
    assert rep.warnings
    for Q in (sc.model.QP[-1], sc.model.QE[-1]):
        assert np.allclose(Q, Q.T)
        assert np.linalg.eigvalsh(Q)[0] >= -1e-10
    path = tmp_path / "s.json"
    save_config(path, sc.model, sc.prior)
    m2, p2 = load_config(path)
    for f in ("A", "BP", "W", "HP", "GP", "QP", "QE", "RP", "RE"):
        np.testing.assert_array_equal(getattr(m2, f), getattr(sc.model, f))
    np.testing.assert_array_equal(p2.x0_observed, sc.prior.x0_observed)


def test_symmetric_variants():
    acc = get_scenario("bargain1d-sym-acc")
    assert acc.model.GP[0, 0] == acc.model.GE[0, 0] == 1.0
    assert (acc.prior.xhat0P[0], acc.prior.xhat0E[0]) == (49.0, 51.0)
    inacc = get_scenario("bargain1d-sym-inacc")
    assert inacc.model.GP[0, 0] == inacc.model.GE[0, 0] == 100.0
    assert (inacc.prior.xhat0P[0], inacc.prior.xhat0E[0]) == (40.0, 60.0)
    assert get_scenario("bargain2d-asym").x0.tolist() == [30.0, 20.0, 10.0, 90.0]
    assert factor_params().theta == (1.0, 1.0)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        build_bargaining_1d(BargainingParams(deltaB=0.1))
    with pytest.raises(ValueError):
        build_bargaining_1d(BargainingParams(betaS=0.0))
    with pytest.raises(KeyError):
        get_scenario("nope")
