"""Numerical identities tying the filter to conditional expectations.

The central check is the tower identity for a quadratic form: viewed from
player ``P`` at ``t - 1``,

    E[ E[x_t' Q x_t | H_t] | H_{t-1} ] = E[x_t' Q x_t | H_{t-1}].

The left side is evaluated through the filter (the next estimate written as
an affine map of the current estimation errors and fresh noise), the right
side by expanding the dynamics directly. Under the corrected filter both
sides agree. Under the naive filter they differ by a closed-form term that
is computed independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equilibrium import (
    RiccatiSolution,
    backward_riccati,
    closed_loop,
    step_constant,
    value_constants,
    value_constants_direct,
)
from .filter import CORRECTED, NAIVE, FilterSchedule, covariance_schedule
from .linalg import psd_sqrt
from .model import Dimensions, GameModel, Prior

SUITES = ("tower", "naive-discrepancy", "gain-complementarity", "calibration", "oracle-1d")


@dataclass(frozen=True)
class TowerReport:
    """Both sides of the tower identity at one step.

    ``predicted_discrepancy`` is ``nan`` in corrected mode.
    """

    t: int
    lhs: float
    rhs: float
    residual: float
    predicted_discrepancy: float
    mode: str

    @property
    def scale(self) -> float:
        return max(1.0, abs(self.rhs))

    def passed(self, tol: float = 1e-8) -> bool:
        if self.mode == CORRECTED:
            return self.residual < tol * self.scale
        return abs(self.lhs - self.rhs - self.predicted_discrepancy) < tol * self.scale


def _weight(model: GameModel, ric: RiccatiSolution | None, t: int, weight) -> np.ndarray:
    if weight is not None:
        return np.asarray(weight, dtype=float)
    if ric is None or t == model.T:
        return model.QP[model.T]
    return ric.UP[t]


def naive_discrepancy(model: GameModel, sched: FilterSchedule, FE: np.ndarray, Q: np.ndarray, t: int) -> float:
    """Closed-form gap ``lhs - rhs`` of the naive filter for step ``t - 1 -> t``.

    ``2 Tr((BE FE)' Q (K H - I) A (Sigma_P - Cross))``, with ``Cross = E[eP eE']``
    at ``t - 1``; defined for ``n2 = 0``.
    """
    if model.dims.n2 != 0:
        return float("nan")
    s = t - 1
    n = model.dims.n
    BF = model.BE[s] @ FE[s]
    KH = sched.KP[t] @ model.HP[t]
    D = sched.SigmaP[s] - sched.Cross[s]
    return float(2.0 * np.trace(BF.T @ Q @ (KH - np.eye(n)) @ model.A[s] @ D))


def tower_check(
    model: GameModel,
    sched: FilterSchedule,
    FP: np.ndarray,
    FE: np.ndarray,
    t: int,
    *,
    xhat=None,
    weight=None,
    ric: RiccatiSolution | None = None,
) -> TowerReport:
    """Evaluate both sides of the tower identity for player ``P`` from ``t - 1`` to ``t``.

    Parameters
    ----------
    sched : FilterSchedule
        Covariances for the filter being checked; its ``mode`` selects the
        comparison.
    xhat : array_like, optional
        ``P``'s argument ``(xhat1, x2)`` at ``t - 1`` (zero by default).
    weight : array_like, optional
        Weight of the quadratic form; defaults to ``Q_T`` at the last step and
        to ``U^P_t`` otherwise when ``ric`` is given.
    """
    d = model.dims
    s = t - 1
    n1 = d.n1
    Q = _weight(model, ric, t, weight)
    y = np.zeros(d.n) if xhat is None else np.atleast_1d(np.asarray(xhat, dtype=float))
    Acl = closed_loop(model, FP[s], FE[s], s)
    quad = float(y @ Acl.T @ Q @ Acl @ y)
    lhs = quad + step_constant(model, sched, FE, Q, "P", s) + float(np.trace(Q[:n1, :n1] @ sched.SigmaP[t]))

    BF1 = model.BE[s] @ FE[s][:, :n1]
    M_own = -model.A[s][:, :n1] - BF1
    M_opp = BF1
    G = model.Gamma[s]
    rhs = quad
    rhs += np.trace(M_own.T @ Q @ M_own @ sched.SigmaP[s])
    rhs += np.trace(M_opp.T @ Q @ M_opp @ sched.SigmaE[s])
    rhs += 2.0 * np.trace(M_opp.T @ Q @ M_own @ sched.Cross[s])
    rhs += np.trace(G.T @ Q @ G @ model.W)
    rhs = float(rhs)
    pred = naive_discrepancy(model, sched, FE, Q, t) if sched.mode == NAIVE else float("nan")
    return TowerReport(t, lhs, rhs, abs(lhs - rhs), pred, sched.mode)


def mc_tower_check(
    model: GameModel,
    prior: Prior,
    FP: np.ndarray,
    FE: np.ndarray,
    t: int,
    replications: int,
    *,
    mode: str = CORRECTED,
    weight=None,
    seed: int = 0,
) -> tuple[TowerReport, float]:
    """Monte Carlo estimate of both tower sides for ``n2 = 0`` models.

    Errors at ``t - 1`` are drawn jointly Gaussian with the schedule's
    covariances around ``P``'s prior-side estimate ``xhat = 0``; the step is
    then simulated exactly as the filter and the dynamics prescribe.

    Returns
    -------
    report : TowerReport
    se : float
        Standard error of the mean of ``lhs - rhs`` samples.
    """
    if model.dims.n2 != 0:
        raise ValueError("mc_tower_check covers n2 = 0 only")
    if replications < 2:
        raise ValueError("replications must be >= 2")
    d = model.dims
    n = d.n
    s = t - 1
    sched = covariance_schedule(model, prior, FP, FE, mode)
    Q = np.asarray(weight if weight is not None else model.QP[model.T], dtype=float)
    rng = np.random.default_rng(seed)
    joint = np.block([[sched.SigmaP[s], sched.Cross[s]], [sched.Cross[s].T, sched.SigmaE[s]]])
    L = psd_sqrt(joint)
    e = rng.standard_normal((replications, 2 * n)) @ L.T
    eP, eE = e[:, :n], e[:, n:]
    xhatP = np.zeros((replications, n))
    x = xhatP - eP
    xhatE = x + eE
    uP = xhatP @ FP[s].T
    uE = xhatE @ FE[s].T
    w = rng.standard_normal((replications, d.d)) @ psd_sqrt(model.W).T
    v = rng.standard_normal((replications, d.p)) @ psd_sqrt(model.GP).T
    A = model.A[s]
    x_next = x @ A.T + uP @ model.BP[s].T + uE @ model.BE[s].T + w @ model.Gamma[s].T
    z = x_next @ model.HP[t].T + v
    if mode == CORRECTED:
        J = sched.JP[s]
        Y = sched.YP[s]
        ysig = (uE @ np.linalg.pinv(FE[s]).T) if sched.signal_mode_P == "estimate-recovered" else uE
        xplus = xhatP + (ysig - xhatP @ Y.T) @ J.T
    else:
        xplus = xhatP
    xm = xplus @ A.T + uP @ model.BP[s].T + uE @ model.BE[s].T
    xn = xm + (z - xm @ model.HP[t].T) @ sched.KP[t].T
    lhs_s = np.einsum("ij,jk,ik->i", xn, Q, xn) + np.trace(Q @ sched.SigmaP[t])
    rhs_s = np.einsum("ij,jk,ik->i", x_next, Q, x_next)
    diff = lhs_s - rhs_s
    lhs, rhs = float(lhs_s.mean()), float(rhs_s.mean())
    pred = naive_discrepancy(model, sched, FE, Q, t) if mode == NAIVE else float("nan")
    se = float(diff.std(ddof=1) / np.sqrt(replications))
    return TowerReport(t, lhs, rhs, abs(lhs - rhs), pred, mode), se


# ------------------------------------------------------------ random models


def random_model(seed: int, n: int, m: int = 1, k: int = 1, T: int = 3, *, scale: float = 1.0) -> tuple[GameModel, Prior]:
    """Seeded random fully partially observed game.

    Entries of ``A``, ``B`` and ``Gamma`` are uniform on ``(-scale, scale)``;
    every covariance and weight is ``M M' + 0.1 I`` with ``M`` uniform on
    ``(-1, 1)``.
    """
    rng = np.random.default_rng(seed)

    def unif(*shape):
        return rng.uniform(-scale, scale, size=shape)

    def spd(size):
        M = rng.uniform(-1.0, 1.0, size=(size, size))
        return M @ M.T + 0.1 * np.eye(size)

    dims = Dimensions(n1=n, n2=0, m=m, k=k, p=n, q=n, d=n, T=T)
    H = rng.uniform(-1.0, 1.0, size=(n, n)) + 2.0 * np.eye(n)
    model = GameModel(
        dims=dims,
        A=np.stack([unif(n, n) for _ in range(T)]),
        BP=np.stack([unif(n, m) for _ in range(T)]),
        BE=np.stack([unif(n, k) for _ in range(T)]),
        Gamma=np.stack([unif(n, n) + 2.0 * np.eye(n) for _ in range(T)]),
        W=spd(n),
        HP=np.stack([H] * (T + 1)),
        HE=np.stack([H] * (T + 1)),
        GP=spd(n),
        GE=spd(n),
        QP=np.stack([spd(n) for _ in range(T + 1)]),
        QE=np.stack([spd(n) for _ in range(T + 1)]),
        RP=np.stack([spd(m) for _ in range(T)]),
        RE=np.stack([spd(k) for _ in range(T)]),
    )
    prior = Prior(xhat0P=unif(n), W0P=spd(n), xhat0E=unif(n), W0E=spd(n))
    return model, prior


# ------------------------------------------------------------ suites


@dataclass(frozen=True)
class CheckRow:
    """One line of a verification CSV."""

    mode: str
    seed: int
    t: int
    lhs: float
    rhs: float
    residual: float
    predicted_discrepancy: float
    passed: bool


def _tower_rows(trials: int, tol: float, mode: str, base_seed: int, full_rank: bool) -> list[CheckRow]:
    rows = []
    for i in range(trials):
        seed = base_seed + i
        n = 1 + i % 3
        m = k = n if full_rank else 1
        if mode == NAIVE and n == 1:
            n = 2
        model, prior = random_model(seed, n, m, k, T=3)
        ric = backward_riccati(model)
        sched = covariance_schedule(model, prior, ric.FP, ric.FE, mode)
        xhat = np.random.default_rng(seed + 10_000).uniform(-1, 1, size=n)
        for t in range(1, model.T + 1):
            r = tower_check(model, sched, ric.FP, ric.FE, t, xhat=xhat, ric=ric)
            rows.append(CheckRow(mode, seed, t, r.lhs, r.rhs, r.residual, r.predicted_discrepancy, r.passed(tol)))
    return rows


def suite_tower(trials: int = 100, tol: float = 1e-8, seed: int = 0) -> list[CheckRow]:
    """Corrected-filter tower identity on random 1-, 2- and 3-dimensional models."""
    rows = _tower_rows(trials, tol, CORRECTED, seed, full_rank=False)
    # the value-constant forms must agree as well
    for i in range(trials):
        model, prior = random_model(seed + i, 1 + i % 3, T=3)
        ric = backward_riccati(model)
        sched = covariance_schedule(model, prior, ric.FP, ric.FE, CORRECTED)
        a = value_constants(model, ric, sched)
        b = value_constants_direct(model, ric, sched)
        for player in ("P", "E"):
            diff = float(np.max(np.abs(a.c(player) - b.c(player))))
            scale = max(1.0, float(np.max(np.abs(b.c(player)))))
            rows.append(
                CheckRow(f"{CORRECTED}-constants-{player}", seed + i, 0, float(a.c(player)[0]), float(b.c(player)[0]),
                         diff, float("nan"), diff < tol * scale)
            )
    return rows


def suite_naive(trials: int = 100, tol: float = 1e-8, seed: int = 0) -> list[CheckRow]:
    """Naive-filter gap versus its closed form (single-input players, ``n >= 2``)."""
    return _tower_rows(trials, tol, NAIVE, seed, full_rank=False)


def suite_gain_complementarity(trials: int = 100, tol: float = 1e-9, seed: int = 0) -> list[CheckRow]:
    """``J_P + J_E = I`` and shared improved estimates in full-rank games."""
    from .filter import initial_beliefs, mixed_step

    rows = []
    for i in range(trials):
        s = seed + i
        n = 1 + i % 3
        model, prior = random_model(s, n, n, n, T=3)
        ric = backward_riccati(model)
        rng = np.random.default_rng(s + 20_000)
        bP, bE = initial_beliefs(prior)
        for t in range(1, model.T + 1):
            uP = ric.FP[t - 1] @ bP.xhat
            uE = ric.FE[t - 1] @ bE.xhat
            zP = rng.standard_normal(n)
            zE = rng.standard_normal(n)
            rP, rE = mixed_step(
                model, bP, bE, None, uP, uE, zP, zE,
                (ric.FP[t - 1], np.zeros((n, 0))), (ric.FE[t - 1], np.zeros((n, 0))), t,
            )
            gap = float(np.max(np.abs(rP.J + rE.J - np.eye(n))))
            shared = float(np.max(np.abs(rP.xhat_plus - rE.xhat_plus)))
            rel_pd = float(np.linalg.eigvalsh(rP.belief_out.SigmaRel)[0]) > 0.0
            ok = gap < tol and shared < tol * max(1.0, float(np.max(np.abs(rP.xhat_plus)))) and rel_pd
            rows.append(CheckRow("gain-complementarity", s, t, gap, shared, max(gap, shared), float("nan"), ok))
            bP, bE = rP.belief_out, rE.belief_out
    return rows


# ------------------------------------------------------------ oracle


def _affine_episode(model: GameModel, prior: Prior, ric: RiccatiSolution, zeta: np.ndarray) -> dict:
    """One corrected-filter episode driven by the stacked noise vector ``zeta``.

    ``zeta = (eP0, eE0, w0, vP1, vE1, w1, vP2, vE2, ...)`` for an ``n = 1``,
    ``n2 = 0`` model with ``x0 = xhat0P - eP0`` and ``xhat0E = x0 + eE0``. Every
    returned quantity is affine in ``zeta``.
    """
    from .filter import initial_beliefs, two_player_step

    T = model.T
    xP0 = float(prior.xhat0P[0])
    x = xP0 - zeta[0]
    bP, bE = initial_beliefs(prior)
    bE = type(bE)(0, np.array([x + zeta[1]]), bE.Sigma, bE.SigmaCross, bE.SigmaRel)
    out = {"x": [x], "xhatP": [bP.xhat[0]], "zP": [], "uE": []}
    pos = 2
    for t in range(1, T + 1):
        s = t - 1
        uP = ric.FP[s] @ bP.xhat
        uE = ric.FE[s] @ bE.xhat
        w, vP, vE = zeta[pos], zeta[pos + 1], zeta[pos + 2]
        pos += 3
        x = float(model.A[s, 0, 0] * x + model.BP[s, 0, 0] * uP[0] + model.BE[s, 0, 0] * uE[0] + model.Gamma[s, 0, 0] * w)
        zP = np.array([model.HP[t, 0, 0] * x + vP])
        zE = np.array([model.HE[t, 0, 0] * x + vE])
        rP, rE = two_player_step(model, bP, bE, uP, uE, zP, zE, ric.FP[s], ric.FE[s], t)
        bP, bE = rP.belief_out, rE.belief_out
        out["x"].append(x)
        out["xhatP"].append(bP.xhat[0])
        out["zP"].append(zP[0])
        out["uE"].append(uE[0])
    return {k: np.array(v, dtype=float) for k, v in out.items()}


def oracle_conditional_means(model: GameModel, prior: Prior, ric: RiccatiSolution, zeta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Filter estimates and exact ``E[x_t | zP_1..t, uE_0..t-1]`` at one noise draw.

    The exact means come from Gaussian conditioning on the affine
    representation of the observed history; ``xhat0P`` and ``P``'s own
    controls are deterministic functions of that history.
    """
    T = model.T
    var = np.concatenate([[prior.W0P[0, 0], prior.W0E[0, 0]], np.tile([model.W[0, 0], model.GP[0, 0], model.GE[0, 0]], T)])
    dim = var.size
    base = _affine_episode(model, prior, ric, np.zeros(dim))
    cols = {k: [] for k in base}
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = 1.0
        ep = _affine_episode(model, prior, ric, e)
        for k in base:
            cols[k].append(ep[k] - base[k])
    coef = {k: np.array(v).T for k, v in cols.items()}  # (len, dim)
    real = _affine_episode(model, prior, ric, zeta)
    exact = np.zeros(T + 1)
    exact[0] = prior.xhat0P[0]
    Sd = np.diag(var)
    for t in range(1, T + 1):
        M = np.vstack([coef["zP"][:t], coef["uE"][:t]])
        obs = np.concatenate([real["zP"][:t], real["uE"][:t]]) - np.concatenate([base["zP"][:t], base["uE"][:t]])
        a = coef["x"][t]
        Cxo = a @ Sd @ M.T
        Coo = M @ Sd @ M.T
        exact[t] = base["x"][t] + Cxo @ np.linalg.lstsq(Coo, obs, rcond=1e-12)[0]
    return real["xhatP"], exact


def suite_oracle(trials: int = 50, tol: float = 1e-8, seed: int = 0, T: int = 2) -> list[CheckRow]:
    """Filter estimate versus exact joint-Gaussian conditioning on 1-dim models."""
    rows = []
    for i in range(trials):
        s = seed + i
        model, prior = random_model(s, 1, T=T)
        ric = backward_riccati(model)
        rng = np.random.default_rng(s + 30_000)
        dim = 2 + 3 * T
        zeta = rng.standard_normal(dim)
        var = np.concatenate([[prior.W0P[0, 0], prior.W0E[0, 0]], np.tile([model.W[0, 0], model.GP[0, 0], model.GE[0, 0]], T)])
        zeta = zeta * np.sqrt(var)
        est, exact = oracle_conditional_means(model, prior, ric, zeta)
        for t in range(1, T + 1):
            err = abs(est[t] - exact[t])
            rows.append(CheckRow("oracle-1d", s, t, float(est[t]), float(exact[t]), err, float("nan"), err < tol * max(1.0, abs(exact[t]))))
    return rows


# ------------------------------------------------------------ calibration


def calibration_model() -> tuple[GameModel, Prior]:
    """Fixed scalar game used by the calibration and value-identity checks."""
    from .model import scalar_model

    model = scalar_model(T=5, A=0.9, BP=1.0, BE=1.0, W=1.0, GP=1.0, GE=3.0, H=1.0, Q_stage=0.5, Q_terminal=1.0, R=0.5)
    prior = Prior(xhat0P=[1.0], W0P=[[1.0]], xhat0E=[-0.5], W0E=[[2.0]])
    return model, prior


def suite_calibration(trials: int = 100_000, tol: float = 3.0, seed: int = 0, jobs: int = 1) -> list[CheckRow]:
    """Empirical error second moments versus the filter's covariances.

    ``trials`` is the number of replications and ``tol`` the allowance in
    standard errors. Rows report, per ``t``, own variances of both players,
    the cross moment ``E[eP eE]`` and the variance of ``xhatE - xhatP``.
    """
    from .simulate import run_batch

    model, prior = calibration_model()
    ric = backward_riccati(model)
    sched = covariance_schedule(model, prior, ric.FP, ric.FE, CORRECTED)
    res = run_batch(model, prior, ric, CORRECTED, trials, seed, initial="sampled", jobs=jobs, keep_trajectories=True)
    tr = res.trajectories
    eP = tr.XP[:, :, 0] - tr.X[:, :, 0]
    eE = tr.XE[:, :, 0] - tr.X[:, :, 0]
    rows = []
    for t in range(model.T + 1):
        for name, sample, target in (
            ("Sigma_P", eP[:, t] ** 2, sched.SigmaP[t, 0, 0]),
            ("Sigma_E", eE[:, t] ** 2, sched.SigmaE[t, 0, 0]),
            ("Cross", eP[:, t] * eE[:, t], sched.Cross[t, 0, 0]),
            ("Rel", (eE[:, t] - eP[:, t]) ** 2, sched.Rel[t, 0, 0]),
        ):
            mean = float(sample.mean())
            se = float(sample.std(ddof=1) / np.sqrt(sample.size))
            diff = abs(mean - float(target))
            rows.append(CheckRow(f"calibration-{name}", seed, t, mean, float(target), diff, tol * se, diff < tol * se))
    return rows


def value_identity(
    trials: int = 100_000, seed: int = 0, jobs: int = 1, model: GameModel | None = None, prior: Prior | None = None
) -> dict[str, tuple[float, float, float]]:
    """Mean realized cost, predicted value and standard error for both players.

    Player ``i``'s own prior mean is held fixed while the true state and the
    opponent's prior mean are drawn consistently with the prior covariances.
    Defaults to :func:`calibration_model`.
    """
    from .equilibrium import value_at
    from .simulate import run_batch

    if model is None:
        model, prior = calibration_model()
    ric = backward_riccati(model)
    sched = covariance_schedule(model, prior, ric.FP, ric.FE, CORRECTED)
    const = value_constants(model, ric, sched)
    out = {}
    for player, init in (("P", "anchor-P"), ("E", "anchor-E")):
        res = run_batch(model, prior, ric, CORRECTED, trials, seed, initial=init, jobs=jobs)
        c = res.metrics.cost_P if player == "P" else res.metrics.cost_E
        pred = value_at(ric, const, prior.xhat0(player), 0, player)
        out[player] = (float(c.mean()), pred, float(c.std(ddof=1) / np.sqrt(c.size)))
    return out


def run_suite(name: str, trials: int | None = None, tol: float | None = None, seed: int = 0, jobs: int = 1) -> list[CheckRow]:
    """Dispatch a named suite with its default trials and tolerance."""
    if name == "tower":
        return suite_tower(trials or 100, tol or 1e-8, seed)
    if name == "naive-discrepancy":
        return suite_naive(trials or 100, tol or 1e-8, seed)
    if name == "gain-complementarity":
        return suite_gain_complementarity(trials or 100, tol or 1e-9, seed)
    if name == "calibration":
        return suite_calibration(trials or 100_000, tol or 3.0, seed, jobs)
    if name == "oracle-1d":
        return suite_oracle(trials or 50, tol or 1e-8, seed)
    raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")

