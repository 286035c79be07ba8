"""Bargaining games between a buyer (player ``P``) and a seller (player ``E``).

The good has a hidden value ``p_t`` following a random walk. Each side
observes it with private noise; both see the two standing offers. The buyer
pays ``alphaB (xB_T - xS_T)^2 + betaB (xB_T - (1 + deltaB) p_T)^2`` at the
deadline plus ``R_t u_t^2`` for each concession, and symmetrically for the
seller. In the factor variant the value is ``theta' xi_t`` for two hidden
factors ``xi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .model import Dimensions, GameModel, Prior


@dataclass(frozen=True)
class BargainingParams:
    """Parameters of a bargaining game.

    ``theta`` and ``xi0`` are used by the factor variant; ``p0`` otherwise.
    Scalars given for ``Wbar``, ``GB``, ``GS``, ``W0B``, ``W0S`` are expanded
    to multiples of the identity in the factor variant. The concession weight
    at step ``t`` is ``rho * exp(-gamma * (t + schedule_offset))``; with the
    default offset of one, the ``T`` offer rounds are numbered ``1..T``.
    """

    alphaB: float = 50.0
    alphaS: float = 50.0
    betaB: float = 30.0
    betaS: float = 30.0
    deltaB: float = -0.05
    deltaS: float = 0.05
    rhoB: float = 15.0
    rhoS: float = 15.0
    gammaB: float = 0.1
    gammaS: float = 0.1
    T: int = 10
    p0: float = 50.0
    theta: tuple[float, ...] = (1.0,)
    xi0: tuple[float, ...] = ()
    x0B: float = 10.0
    x0S: float = 90.0
    Wbar: float | tuple[float, ...] = 9.0
    WB_off: float = 1e-12
    WS_off: float = 1e-12
    GB: float | tuple = 100.0
    GS: float | tuple = 1.0
    xhat0B: float | tuple[float, ...] = 40.0
    xhat0S: float | tuple[float, ...] = 51.0
    W0B: float | tuple = 100.0
    W0S: float | tuple = 1.0
    agreement_threshold: float = 3.0
    schedule_offset: int = 1

    def check(self) -> None:
        if not (-1.0 < self.deltaB < 0.0 < self.deltaS < 1.0):
            raise ValueError("need -1 < deltaB < 0 < deltaS < 1")
        for name in ("alphaB", "alphaS", "betaB", "betaS", "rhoB", "rhoS"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.T < 1:
            raise ValueError("T must be >= 1")


@dataclass(frozen=True, eq=False)
class Scenario:
    """A named game with its priors, true initial state and offer coordinates."""

    name: str
    model: GameModel
    prior: Prior
    x0: np.ndarray
    offer_indices: tuple[int, int]
    threshold: float
    params: BargainingParams = field(default_factory=BargainingParams)


def terminal_weight(alpha: float, beta: float, delta: float, theta, own: int, n1: int) -> np.ndarray:
    """Quadratic weight of ``alpha (xB - xS)^2 + beta (x_own - (1 + delta) theta' xi)^2``.

    ``own`` is 0 for the buyer and 1 for the seller; the state is
    ``(xi, xB, xS)`` with ``len(xi) = n1``.
    """
    theta = np.asarray(theta, dtype=float)
    n = n1 + 2
    a = np.zeros(n)
    a[:n1] = -(1.0 + delta) * theta
    a[n1 + own] = 1.0
    g = np.zeros(n)
    g[n1], g[n1 + 1] = 1.0, -1.0
    return beta * np.outer(a, a) + alpha * np.outer(g, g)


def _mat(v, n1: int) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(n1)
    if arr.ndim == 1:
        return np.diag(arr)
    return arr


def _vec(v, n1: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    return np.full(n1, arr[0]) if arr.size == 1 and n1 > 1 else arr


def _build(params: BargainingParams, n1: int) -> tuple[GameModel, Prior, np.ndarray]:
    params.check()
    T = params.T
    n = n1 + 2
    theta = np.asarray(params.theta, dtype=float)
    if theta.size != n1:
        raise ValueError(f"theta must have {n1} entries")
    dims = Dimensions(n1=n1, n2=2, m=1, k=1, p=n1, q=n1, d=n, T=T)
    BB = np.zeros((n, 1))
    BB[n1, 0] = 1.0
    BS = np.zeros((n, 1))
    BS[n1 + 1, 0] = 1.0
    W = np.zeros((n, n))
    W[:n1, :n1] = _mat(params.Wbar, n1)
    W[n1, n1] = params.WB_off
    W[n1 + 1, n1 + 1] = params.WS_off
    QB = terminal_weight(params.alphaB, params.betaB, params.deltaB, theta, 0, n1)
    QS = terminal_weight(params.alphaS, params.betaS, params.deltaS, theta, 1, n1)
    zero = np.zeros((n, n))
    steps = np.arange(T) + params.schedule_offset
    RB = params.rhoB * np.exp(-params.gammaB * steps)
    RS = params.rhoS * np.exp(-params.gammaS * steps)
    H = np.eye(n1)
    model = GameModel(
        dims=dims,
        A=np.stack([np.eye(n)] * T),
        BP=np.stack([BB] * T),
        BE=np.stack([BS] * T),
        Gamma=np.stack([np.eye(n)] * T),
        W=W,
        HP=np.stack([H] * (T + 1)),
        HE=np.stack([H] * (T + 1)),
        GP=_mat(params.GB, n1),
        GE=_mat(params.GS, n1),
        QP=np.stack([zero] * T + [QB]),
        QE=np.stack([zero] * T + [QS]),
        RP=RB.reshape(T, 1, 1),
        RE=RS.reshape(T, 1, 1),
    )
    prior = Prior(
        xhat0P=_vec(params.xhat0B, n1),
        W0P=_mat(params.W0B, n1),
        xhat0E=_vec(params.xhat0S, n1),
        W0E=_mat(params.W0S, n1),
        x0_observed=np.array([params.x0B, params.x0S]),
    )
    hidden0 = np.array([params.p0]) if n1 == 1 else np.asarray(params.xi0, dtype=float)
    x0 = np.concatenate([hidden0, [params.x0B, params.x0S]])
    return model, prior, x0


def build_bargaining_1d(params: BargainingParams | None = None) -> tuple[GameModel, Prior]:
    """Single hidden value; state ``(p, xB, xS)``."""
    model, prior, _ = _build(params or BargainingParams(), 1)
    return model, prior


def factor_params(**overrides) -> BargainingParams:
    """Defaults of the two-factor game (asymmetric information)."""
    base = BargainingParams(
        theta=(1.0, 1.0),
        xi0=(30.0, 20.0),
        Wbar=(4.5, 4.5),
        GB=50.0,
        GS=0.5,
        xhat0B=(25.0, 15.0),
        xhat0S=(31.0, 20.0),
        W0B=50.0,
        W0S=0.5,
    )
    return replace(base, **overrides)


def build_bargaining_factors(params: BargainingParams | None = None) -> tuple[GameModel, Prior]:
    """Two hidden factors with value ``theta' xi``; state ``(xi1, xi2, xB, xS)``."""
    params = params or factor_params()
    model, prior, _ = _build(params, len(params.theta))
    return model, prior


def beneficial_params(**overrides) -> BargainingParams:
    """Buyer chasing its own target price against an agreement-seeking seller."""
    base = BargainingParams(
        alphaB=20.0, alphaS=50.0, betaB=40.0, betaS=30.0, rhoB=10.0, rhoS=10.0, Wbar=1.0,
        GB=100.0, GS=1.0, xhat0B=70.0, W0B=100.0, xhat0S=53.0, W0S=1.0,
    )
    return replace(base, **overrides)


def build_beneficial_price(params: BargainingParams | None = None) -> tuple[GameModel, Prior]:
    return build_bargaining_1d(params or beneficial_params())


_PARAMS = {
    "bargain1d-asym": lambda: BargainingParams(),
    "bargain1d-sym-acc": lambda: BargainingParams(GB=1.0, GS=1.0, xhat0B=49.0, xhat0S=51.0, W0B=1.0, W0S=1.0),
    "bargain1d-sym-inacc": lambda: BargainingParams(GB=100.0, GS=100.0, xhat0B=40.0, xhat0S=60.0, W0B=100.0, W0S=100.0),
    "bargain1d-beneficial": beneficial_params,
    "bargain2d-asym": factor_params,
    "bargain2d-sym-acc": lambda: factor_params(GB=0.5, GS=0.5, xhat0B=(29.0, 19.0), xhat0S=(31.0, 21.0), W0B=0.5, W0S=0.5),
    "bargain2d-sym-inacc": lambda: factor_params(GB=50.0, GS=50.0, xhat0B=(25.0, 15.0), xhat0S=(35.0, 25.0), W0B=50.0, W0S=50.0),
}

SCENARIO_NAMES = tuple(_PARAMS)


def scenario_params(name: str) -> BargainingParams:
    try:
        return _PARAMS[name]()
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIO_NAMES)}") from None


def get_scenario(name: str, params: BargainingParams | None = None) -> Scenario:
    """Build a named scenario, optionally with modified parameters."""
    params = params or scenario_params(name)
    model, prior, x0 = _build(params, len(params.theta))
    n1 = model.dims.n1
    return Scenario(name, model, prior, x0, (n1, n1 + 1), params.agreement_threshold, params)
