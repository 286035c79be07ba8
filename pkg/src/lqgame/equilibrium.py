"""Feedback Nash equilibrium of the game and its value functions.

At each step the two players' gains solve one stacked linear system

    [R^P + B^P'U^P B^P     B^P'U^P B^E   ] [F^P]     [B^P'U^P A]
    [B^E'U^E B^P        R^E + B^E'U^E B^E] [F^E] = - [B^E'U^E A]

with ``U^i`` the next-step value matrices, and the value matrices follow the
closed-loop Lyapunov recursion backwards from ``U_T = Q_T``. The gains do not
depend on any observation parameter. Estimation enters only the additive
value constants, which need the covariance schedule of the filter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoUniqueEquilibriumError
from .filter import CORRECTED, FilterSchedule, covariance_schedule
from .linalg import rcond, sym
from .model import GameModel, Prior

#: Reciprocal-condition threshold for the stacked gain system.
RCOND_GAINS = 1e-12


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    """Equilibrium gains and value matrices.

    Attributes
    ----------
    UP, UE : ndarray, shape (T+1, n, n)
    FP : ndarray, shape (T, m, n)
    FE : ndarray, shape (T, k, n)
    condPhi : ndarray, shape (T,)
        Condition number of the stacked gain system at each step.
    """

    UP: np.ndarray
    UE: np.ndarray
    FP: np.ndarray
    FE: np.ndarray
    condPhi: np.ndarray

    def U(self, player: str) -> np.ndarray:
        return self.UP if player == "P" else self.UE

    def F(self, player: str) -> np.ndarray:
        return self.FP if player == "P" else self.FE

    def split(self, player: str, t: int, n1: int) -> tuple[np.ndarray, np.ndarray]:
        """Gain at ``t`` split into hidden-block and public-block columns."""
        F = self.F(player)[t]
        return F[:, :n1], F[:, n1:]


@dataclass(frozen=True, eq=False)
class ValueConstants:
    """Additive constants of the quadratic value functions.

    Attributes
    ----------
    cP, cE : ndarray, shape (T+1,)
    Pi : dict
        Per player, the fusion weights ``(Sigma - Cross) Rel^{-1}`` per ``t``.
    Lbar : dict
        Per player, the pairs of error-propagation matrices per ``t``.
    """

    cP: np.ndarray
    cE: np.ndarray
    Pi: dict
    Lbar: dict

    def c(self, player: str) -> np.ndarray:
        return self.cP if player == "P" else self.cE


def solve_stage_gains(model: GameModel, UP_next: np.ndarray, UE_next: np.ndarray, t: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Solve the coupled gain equations at step ``t``.

    Returns
    -------
    FP, FE : ndarray
    cond : float
        Condition number of the stacked matrix.

    Raises
    ------
    NoUniqueEquilibriumError
        If the stacked matrix has reciprocal condition below ``RCOND_GAINS``.
    """
    A, BP, BE = model.A[t], model.BP[t], model.BE[t]
    m = BP.shape[1]
    Phi = np.block(
        [
            [model.RP[t] + BP.T @ UP_next @ BP, BP.T @ UP_next @ BE],
            [BE.T @ UE_next @ BP, model.RE[t] + BE.T @ UE_next @ BE],
        ]
    )
    rhs = -np.vstack([BP.T @ UP_next @ A, BE.T @ UE_next @ A])
    rc = rcond(Phi)
    if rc < RCOND_GAINS:
        raise NoUniqueEquilibriumError(f"stacked gain system is singular at t={t} (rcond={rc:.3e})")
    F = np.linalg.solve(Phi, rhs)
    return F[:m], F[m:], 1.0 / rc


def closed_loop(model: GameModel, FP: np.ndarray, FE: np.ndarray, t: int) -> np.ndarray:
    return model.A[t] + model.BP[t] @ FP + model.BE[t] @ FE


def value_matrices(model: GameModel, FP: np.ndarray, FE: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Value matrices of both players under arbitrary linear feedback gains."""
    T = model.T
    UP = [None] * (T + 1)
    UE = [None] * (T + 1)
    UP[T] = model.QP[T].copy()
    UE[T] = model.QE[T].copy()
    for t in range(T - 1, -1, -1):
        Acl = closed_loop(model, FP[t], FE[t], t)
        UP[t] = sym(model.QP[t] + FP[t].T @ model.RP[t] @ FP[t] + Acl.T @ UP[t + 1] @ Acl)
        UE[t] = sym(model.QE[t] + FE[t].T @ model.RE[t] @ FE[t] + Acl.T @ UE[t + 1] @ Acl)
    return np.array(UP), np.array(UE)


def backward_riccati(model: GameModel) -> RiccatiSolution:
    """Equilibrium gains and value matrices by backward induction from ``U_T = Q_T``."""
    T = model.T
    UP = [None] * (T + 1)
    UE = [None] * (T + 1)
    FP = [None] * T
    FE = [None] * T
    cond = np.zeros(T)
    UP[T] = model.QP[T].copy()
    UE[T] = model.QE[T].copy()
    for t in range(T - 1, -1, -1):
        FP[t], FE[t], cond[t] = solve_stage_gains(model, UP[t + 1], UE[t + 1], t)
        Acl = closed_loop(model, FP[t], FE[t], t)
        UP[t] = sym(model.QP[t] + FP[t].T @ model.RP[t] @ FP[t] + Acl.T @ UP[t + 1] @ Acl)
        UE[t] = sym(model.QE[t] + FE[t].T @ model.RE[t] @ FE[t] + Acl.T @ UE[t + 1] @ Acl)
    return RiccatiSolution(np.array(UP), np.array(UE), np.array(FP), np.array(FE), cond)


def gain_residual(model: GameModel, sol: RiccatiSolution, t: int) -> tuple[float, float]:
    """Max-norm residuals of both players' first-order conditions at ``t``."""
    A, BP, BE = model.A[t], model.BP[t], model.BE[t]
    UP, UE = sol.UP[t + 1], sol.UE[t + 1]
    FP, FE = sol.FP[t], sol.FE[t]
    rP = (model.RP[t] + BP.T @ UP @ BP) @ FP + BP.T @ UP @ (A + BE @ FE)
    rE = (model.RE[t] + BE.T @ UE @ BE) @ FE + BE.T @ UE @ (A + BP @ FP)
    return float(np.max(np.abs(rP))), float(np.max(np.abs(rE)))


# ------------------------------------------------------------ constants


def _opp(player: str) -> str:
    return "E" if player == "P" else "P"


def fusion_weight(sched: FilterSchedule, player: str, t: int) -> np.ndarray:
    """``(Sigma_i - Cross_ij) Rel^{-1}`` at ``t``; zero for the naive filter."""
    S = sched.Sigma(player)[t]
    if sched.mode != CORRECTED:
        return np.zeros_like(S)
    C = sched.cross_from(player)[t]
    return np.linalg.solve(sched.Rel[t], (S - C).T).T


def error_maps(model: GameModel, sched: FilterSchedule, gains_opp: np.ndarray, player: str, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of ``e_own`` and ``e_opp`` at ``t`` in ``(xhat_own, x2)`` at ``t + 1``.

    With ``Pi`` the fusion weight, ``K H`` the next measurement update and
    ``F1`` the opponent's hidden-block gain, the hidden rows are
    ``-A11 Pi - B1 F1 - K H A11 (I - Pi)`` (own error) and
    ``A11 Pi + B1 F1 - K H A11 Pi`` (opponent error); the public rows are
    ``-(A21 + B2 F1)`` and ``B2 F1``.
    """
    n1 = model.dims.n1
    A = model.A[t]
    A11, A21 = A[:n1, :n1], A[n1:, :n1]
    Bj = model.B(_opp(player))[t]
    F1 = gains_opp[t][:, :n1]
    BF1 = Bj[:n1] @ F1
    BF2 = Bj[n1:] @ F1
    KH = sched.K(player)[t + 1] @ model.H(player)[t + 1]
    Pi = fusion_weight(sched, player, t)
    I = np.eye(n1)
    L_own = np.vstack([-A11 @ Pi - BF1 - KH @ A11 @ (I - Pi), -(A21 + BF2)])
    L_opp = np.vstack([A11 @ Pi + BF1 - KH @ A11 @ Pi, BF2])
    return L_own, L_opp


def noise_maps(model: GameModel, sched: FilterSchedule, player: str, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of the process noise ``w_t`` and own signal noise in ``(xhat_own, x2)``."""
    n1 = model.dims.n1
    K = sched.K(player)[t + 1]
    H = model.H(player)[t + 1]
    Gam = model.Gamma[t]
    Nw = np.vstack([K @ H @ Gam[:n1], Gam[n1:]])
    Nv = np.vstack([K, np.zeros((model.dims.n2, K.shape[1]))])
    return Nw, Nv


def step_constant(model: GameModel, sched: FilterSchedule, gains_opp: np.ndarray, U_next: np.ndarray, player: str, t: int) -> float:
    """Expected increase of the quadratic value from ``t`` to ``t + 1`` due to estimation noise.

    Equals ``E[y' U y] - yhat' U yhat`` for the next-step argument ``y`` seen
    from ``player`` at ``t``.
    """
    L_own, L_opp = error_maps(model, sched, gains_opp, player, t)
    Nw, Nv = noise_maps(model, sched, player, t)
    S_own = sched.Sigma(player)[t]
    S_opp = sched.Sigma(_opp(player))[t]
    C = sched.cross_from(player)[t]  # E[e_own e_opp']
    U = U_next
    val = np.trace(L_own.T @ U @ L_own @ S_own)
    val += np.trace(L_opp.T @ U @ L_opp @ S_opp)
    val += 2.0 * np.trace(L_opp.T @ U @ L_own @ C)
    val += np.trace(Nv.T @ U @ Nv @ model.G(player))
    val += np.trace(Nw.T @ U @ Nw @ model.W)
    return float(val)


def value_constants(model: GameModel, riccati: RiccatiSolution, filter_schedule: FilterSchedule) -> ValueConstants:
    """Additive value constants for both players.

    ``c_T = Tr(Q_T,11 Sigma_T)`` and
    ``c_t = c_{t+1} + Tr(Q_t,11 Sigma_t) + step_constant(t)``.
    """
    n1 = model.dims.n1
    T = model.T
    out, Pis, Ls = {}, {}, {}
    for player in ("P", "E"):
        Fopp = riccati.F(_opp(player))
        U = riccati.U(player)
        Q = model.Q(player)
        S = filter_schedule.Sigma(player)
        c = np.zeros(T + 1)
        c[T] = np.trace(Q[T][:n1, :n1] @ S[T])
        Pis[player] = [fusion_weight(filter_schedule, player, t) for t in range(T + 1)]
        Ls[player] = [error_maps(model, filter_schedule, Fopp, player, t) for t in range(T)]
        for t in range(T - 1, -1, -1):
            c[t] = c[t + 1] + np.trace(Q[t][:n1, :n1] @ S[t]) + step_constant(model, filter_schedule, Fopp, U[t + 1], player, t)
        out[player] = c
    return ValueConstants(out["P"], out["E"], Pis, Ls)


def value_constants_direct(model: GameModel, riccati: RiccatiSolution, filter_schedule: FilterSchedule) -> ValueConstants:
    """Value constants of the fully partially observed game from the state-form expansion.

    Uses ``c_t = c_{t+1} + Tr(Q_t S_t) - Tr(U S_{t+1}) + Tr(Aj'U Aj S_t)
    + Tr((Bj Fj)'U Bj Fj S_opp) - 2 Tr(Aj'U Bj Fj C_opp,own) + Tr(Gamma'U Gamma W)``
    with ``Aj = A + Bj Fj``. It agrees with :func:`value_constants` whenever
    the tower identity holds.
    """
    if model.dims.n2 != 0:
        raise ValueError("value_constants_direct covers n2 = 0 only")
    T = model.T
    out = {}
    for player in ("P", "E"):
        j = _opp(player)
        U = riccati.U(player)
        Q = model.Q(player)
        S = filter_schedule.Sigma(player)
        Sj = filter_schedule.Sigma(j)
        Cji = filter_schedule.cross_from(j)  # E[e_opp e_own']
        c = np.zeros(T + 1)
        c[T] = np.trace(Q[T] @ S[T])
        for t in range(T - 1, -1, -1):
            BF = model.B(j)[t] @ riccati.F(j)[t]
            Aj = model.A[t] + BF
            Un = U[t + 1]
            G = model.Gamma[t]
            c[t] = (
                c[t + 1]
                + np.trace(Q[t] @ S[t])
                - np.trace(Un @ S[t + 1])
                + np.trace(Aj.T @ Un @ Aj @ S[t])
                + np.trace(BF.T @ Un @ BF @ Sj[t])
                - 2.0 * np.trace(Aj.T @ Un @ BF @ Cji[t])
                + np.trace(G.T @ Un @ G @ model.W)
            )
        out[player] = c
    return ValueConstants(out["P"], out["E"], {}, {})


def value_at(riccati: RiccatiSolution, constants: ValueConstants, y, t: int, player: str) -> float:
    """Quadratic value ``y' U_t y + c_t``; ``y`` stacks the own hidden estimate and ``x2``."""
    U = riccati.U(player)
    if not 0 <= t < U.shape[0]:
        raise IndexError(f"t={t} outside 0..{U.shape[0] - 1}")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return float(y @ U[t] @ y + constants.c(player)[t])


@dataclass(frozen=True, eq=False)
class Equilibrium:
    """Gains, value matrices, filter schedule and value constants of one game."""

    riccati: RiccatiSolution
    schedule: FilterSchedule
    constants: ValueConstants


def solve(model: GameModel, prior: Prior, mode: str = CORRECTED) -> Equilibrium:
    """Convenience: gains, then covariances, then constants."""
    ric = backward_riccati(model)
    sched = covariance_schedule(model, prior, ric.FP, ric.FE, mode)
    return Equilibrium(ric, sched, value_constants(model, ric, sched))


def policy_cost(model: GameModel, prior: Prior, FP: np.ndarray, FE: np.ndarray, player: str, y0, mode: str = CORRECTED) -> float:
    """Predicted expected cost of ``player`` when both follow arbitrary linear gains."""
    UP, UE = value_matrices(model, FP, FE)
    ric = RiccatiSolution(UP, UE, np.asarray(FP), np.asarray(FE), np.zeros(model.T))
    sched = covariance_schedule(model, prior, FP, FE, mode)
    const = value_constants(model, ric, sched)
    return value_at(ric, const, y0, 0, player)
