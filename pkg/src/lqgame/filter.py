"""Belief propagation for both players.

Three recursions are provided:

* the single-agent Kalman filter, where only the player's own control drives
  the prediction;
* the corrected two-player filter, which first treats the opponent's observed
  action as a linear signal about the opponent's estimate, fuses it into an
  *improved estimate*, and only then predicts and applies the private
  measurement;
* the naive two-player filter, which uses both observed controls in the
  prediction but never corrects with them.

Every recursion acts on the partially observed block ``x1``. The public block
``x2`` enters only through the drift ``A12 x2`` and through the part of the
opponent's action that depends on it.

Covariances do not depend on realized signals, so the whole covariance and
gain schedule of an equilibrium can be computed once, forward in time, by
:func:`covariance_schedule`. Simulation then only needs affine updates of the
means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError, DegenerateSignalError
from .linalg import solve_right, sym
from .model import GameModel, Prior

#: Reciprocal-condition threshold for every inversion inside the filter.
RCOND_FILTER = 1e-13

CORRECTED = "corrected"
NAIVE = "naive"
FILTER_MODES = (CORRECTED, NAIVE)

RECOVERED = "estimate-recovered"
ACTION = "action-signal"


@dataclass(frozen=True, eq=False)
class BeliefState:
    """One player's sufficient statistic at time ``t``.

    Attributes
    ----------
    xhat : ndarray, shape (n1,)
        Posterior mean of the partially observed block.
    Sigma : ndarray, shape (n1, n1)
        Own error covariance ``E[e e']`` with ``e = xhat - x1``.
    SigmaCross : ndarray, shape (n1, n1)
        ``E[e_own e_opp']``, seen from this player.
    SigmaRel : ndarray, shape (n1, n1)
        Covariance of the difference of the two players' estimates.
    """

    t: int
    xhat: np.ndarray
    Sigma: np.ndarray
    SigmaCross: np.ndarray
    SigmaRel: np.ndarray


@dataclass(frozen=True, eq=False)
class SignalPair:
    """Linear signal ``y = Y xhat_opp`` extracted from an opponent's action.

    ``S`` maps the action residual ``u_opp - F_opp_2 x2`` to ``y``; it is the
    pseudo-inverse of ``F_opp_1`` in recovered mode and the identity otherwise.
    """

    Y: np.ndarray
    y: np.ndarray
    mode: str
    S: np.ndarray


@dataclass(frozen=True, eq=False)
class FilterStepReport:
    """Intermediate quantities of one filter step for one player."""

    J: np.ndarray
    xhat_plus: np.ndarray
    Sigma_plus: np.ndarray
    xhat_minus: np.ndarray
    Sigma_minus: np.ndarray
    K: np.ndarray
    Delta: np.ndarray
    belief_out: BeliefState


def initial_beliefs(prior: Prior) -> tuple[BeliefState, BeliefState]:
    """Beliefs at ``t = 0``; the cross-covariance is zero, the relative one ``W0P + W0E``."""
    n1 = prior.xhat0P.shape[0]
    Z = np.zeros((n1, n1))
    rel = sym(prior.W0P + prior.W0E)
    bP = BeliefState(0, prior.xhat0P.copy(), prior.W0P.copy(), Z.copy(), rel.copy())
    bE = BeliefState(0, prior.xhat0E.copy(), prior.W0E.copy(), Z.copy(), rel.copy())
    return bP, bE


# ------------------------------------------------------------ single agent


def _measurement(Sm: np.ndarray, H: np.ndarray, G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Kalman gain and posterior covariance from a predicted covariance."""
    S = H @ Sm @ H.T + G
    K = solve_right(Sm @ H.T, S, threshold=RCOND_FILTER, what="innovation covariance")
    n = Sm.shape[0]
    return K, sym((np.eye(n) - K @ H) @ Sm)


def single_agent_step(model: GameModel, belief: BeliefState, u, z, t: int) -> BeliefState:
    """Standard Kalman step for player ``P`` alone (``n2 = 0``).

    Parameters
    ----------
    u : array_like, shape (m,)
        Control applied at ``t - 1``.
    z : array_like, shape (p,)
        Signal received at ``t``.
    """
    if model.dims.n2 != 0:
        raise ValueError("single_agent_step requires a fully partially observed model (n2 = 0)")
    if t < 1:
        raise ValueError("filter steps start at t = 1")
    s = t - 1
    A, B = model.A[s], model.BP[s]
    H, G = model.HP[t], model.GP
    x_minus = A @ belief.xhat + B @ np.atleast_1d(u)
    S_minus = sym(A @ belief.Sigma @ A.T + model.process_cov(s))
    K, S_post = _measurement(S_minus, H, G)
    x_post = x_minus + K @ (np.atleast_1d(z) - H @ x_minus)
    return BeliefState(t, x_post, S_post, belief.SigmaCross, belief.SigmaRel)


# ------------------------------------------------------------ correction


def select_signal_pair(F_opp_1, F_opp_2, u_opp, x2=None, xhat_opp_recovered=None) -> SignalPair:
    """Turn an opponent's action into a linear signal about its estimate.

    If the opponent's gain on the hidden block has full column rank
    (``n1 <= control dim``) the estimate itself is recovered with the
    pseudo-inverse and ``Y = I``. Otherwise the residual action is the signal
    and ``Y = F_opp_1``.

    Raises
    ------
    AdmissibilityError
        If ``F_opp_1`` has rank below ``min(control dim, n1)``.
    """
    F1 = np.atleast_2d(np.asarray(F_opp_1, dtype=float))
    r, n1 = F1.shape
    u = np.atleast_1d(np.asarray(u_opp, dtype=float))
    resid = u.copy()
    if F_opp_2 is not None and x2 is not None and np.size(x2):
        resid = resid - np.atleast_2d(F_opp_2) @ np.atleast_1d(x2)
    if np.linalg.matrix_rank(F1) < min(r, n1):
        raise AdmissibilityError(f"opponent gain block of shape {F1.shape} is rank deficient")
    if n1 <= r:
        S = np.linalg.pinv(F1)
        y = S @ resid if xhat_opp_recovered is None else np.atleast_1d(xhat_opp_recovered).astype(float)
        return SignalPair(np.eye(n1), y, RECOVERED, S)
    return SignalPair(F1.copy(), resid, ACTION, np.eye(r))


def correction_gain(Sigma, Cross, Rel, Y) -> np.ndarray:
    """Gain applied to the opponent-action innovation."""
    D = Sigma - Cross
    M = Y @ Rel @ Rel @ Y.T
    return solve_right(D @ Rel @ Y.T, M, threshold=RCOND_FILTER, what="action-signal covariance")


def correction_step(belief_i: BeliefState, signal: SignalPair) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fuse the opponent-action signal into an improved estimate.

    Returns
    -------
    J : ndarray
        Correction gain.
    xhat_plus : ndarray
        Improved estimate ``xhat + J (y - Y xhat)``.
    Sigma_plus : ndarray
        Improved covariance ``Sigma - D Rel^{-1} D'`` with ``D = Sigma - Cross``.
    """
    b = belief_i
    J = correction_gain(b.Sigma, b.SigmaCross, b.SigmaRel, signal.Y)
    xp = b.xhat + J @ (signal.y - signal.Y @ b.xhat)
    D = b.Sigma - b.SigmaCross
    Sp = sym(b.Sigma - solve_right(D, b.SigmaRel, threshold=RCOND_FILTER, what="relative covariance") @ D.T)
    return J, xp, Sp


# ------------------------------------------------------------ covariances


@dataclass(frozen=True, eq=False)
class _CovStep:
    JP: np.ndarray
    JE: np.ndarray
    SPplus: np.ndarray
    SEplus: np.ndarray
    SPminus: np.ndarray
    SEminus: np.ndarray
    KP: np.ndarray
    KE: np.ndarray
    Delta: np.ndarray  # P-side, E-side is its transpose
    SP: np.ndarray
    SE: np.ndarray
    Cross: np.ndarray  # E[eP eE'] at t
    Rel: np.ndarray


def _cov_step(model: GameModel, SP, SE, Cross, Rel, YP, YE, t: int, mode: str) -> _CovStep:
    """Covariance part of one joint step from ``t - 1`` to ``t``.

    ``YP`` is the signal matrix seen by ``P`` (about ``E``'s estimate) and
    ``YE`` the one seen by ``E``.
    """
    n1 = model.dims.n1
    s = t - 1
    A11 = model.A[s, :n1, :n1]
    Qw = model.process_cov(s)
    I = np.eye(n1)
    if mode == CORRECTED:
        JP = correction_gain(SP, Cross, Rel, YP)
        JE = correction_gain(SE, Cross.T, Rel, YE)
        DP = SP - Cross
        DE = SE - Cross.T
        DP_R = solve_right(DP, Rel, threshold=RCOND_FILTER, what="relative covariance")
        SPp = sym(SP - DP_R @ DP.T)
        SEp = sym(SE - solve_right(DE, Rel, threshold=RCOND_FILTER, what="relative covariance") @ DE.T)
        Delta = DP_R @ DE.T + Cross
    elif mode == NAIVE:
        JP = np.zeros((n1, YP.shape[0]))
        JE = np.zeros((n1, YE.shape[0]))
        SPp, SEp, Delta = SP, SE, Cross
    else:
        raise ValueError(f"unknown filter mode {mode!r}")
    SPm = sym(A11 @ SPp @ A11.T + Qw)
    SEm = sym(A11 @ SEp @ A11.T + Qw)
    HP, HE = model.HP[t], model.HE[t]
    KP, SPn = _measurement(SPm, HP, model.GP)
    KE, SEn = _measurement(SEm, HE, model.GE)
    Cn = (I - KP @ HP) @ (A11 @ Delta @ A11.T + Qw) @ (I - KE @ HE).T
    Rn = sym(SPn + SEn - Cn - Cn.T)
    return _CovStep(JP, JE, SPp, SEp, SPm, SEm, KP, KE, Delta, SPn, SEn, Cn, Rn)


def _signal_matrices(F_opp: np.ndarray, n1: int) -> tuple[np.ndarray, np.ndarray, str]:
    """``(Y, S, mode)`` implied by an opponent gain, without any realized action."""
    F1 = F_opp[:, :n1]
    r = F1.shape[0]
    if np.linalg.matrix_rank(F1) < min(r, n1):
        raise AdmissibilityError(f"opponent gain block of shape {F1.shape} is rank deficient")
    if n1 <= r:
        return np.eye(n1), np.linalg.pinv(F1), RECOVERED
    return F1.copy(), np.eye(r), ACTION


# ------------------------------------------------------------ joint steps


def mixed_step(
    model: GameModel,
    belief_P: BeliefState,
    belief_E: BeliefState,
    x2_prev,
    uP,
    uE,
    zP,
    zE,
    FP_parts,
    FE_parts,
    t: int,
    mode: str = CORRECTED,
) -> tuple[FilterStepReport, FilterStepReport]:
    """Joint step of both players' filters from ``t - 1`` to ``t``.

    Parameters
    ----------
    x2_prev : array_like, shape (n2,)
        Public block at ``t - 1`` (empty when ``n2 = 0``).
    uP, uE : array_like
        Controls applied at ``t - 1``.
    zP, zE : array_like
        Private signals received at ``t``.
    FP_parts, FE_parts : tuple of ndarray
        Gains at ``t - 1`` split as ``(F_1, F_2)`` over the hidden and
        public columns.
    mode : {"corrected", "naive"}
    """
    if t < 1:
        raise ValueError("filter steps start at t = 1")
    d = model.dims
    n1 = d.n1
    s = t - 1
    x2 = np.atleast_1d(np.asarray(x2_prev, dtype=float)) if d.n2 else np.zeros(0)
    uP = np.atleast_1d(np.asarray(uP, dtype=float))
    uE = np.atleast_1d(np.asarray(uE, dtype=float))
    FP1, FP2 = (np.atleast_2d(a) for a in FP_parts)
    FE1, FE2 = (np.atleast_2d(a) for a in FE_parts)
    sigP = select_signal_pair(FE1, FE2 if d.n2 else None, uE, x2)
    sigE = select_signal_pair(FP1, FP2 if d.n2 else None, uP, x2)
    cs = _cov_step(
        model, belief_P.Sigma, belief_E.Sigma, belief_P.SigmaCross, belief_P.SigmaRel, sigP.Y, sigE.Y, t, mode
    )
    A = model.A[s]
    A11, A12 = A[:n1, :n1], A[:n1, n1:]
    drift = model.BP[s, :n1] @ uP + model.BE[s, :n1] @ uE
    if d.n2:
        drift = drift + A12 @ x2
    out = []
    for b, sig, J, Sp, Sm, K, H, z, Sn, Cn, Delta in (
        (belief_P, sigP, cs.JP, cs.SPplus, cs.SPminus, cs.KP, model.HP[t], zP, cs.SP, cs.Cross, cs.Delta),
        (belief_E, sigE, cs.JE, cs.SEplus, cs.SEminus, cs.KE, model.HE[t], zE, cs.SE, cs.Cross.T, cs.Delta.T),
    ):
        xp = b.xhat + J @ (sig.y - sig.Y @ b.xhat)
        xm = A11 @ xp + drift
        xn = xm + K @ (np.atleast_1d(z) - H @ xm)
        out.append(FilterStepReport(J, xp, Sp, xm, Sm, K, Delta, BeliefState(t, xn, Sn, Cn, cs.Rel)))
    return out[0], out[1]


def two_player_step(model, belief_P, belief_E, uP, uE, zP, zE, FP, FE, t, mode: str = CORRECTED):
    """Joint corrected step for the fully partially observed game (``n2 = 0``).

    ``FP`` and ``FE`` are the gains applied at ``t - 1``.
    """
    if model.dims.n2 != 0:
        raise ValueError("two_player_step requires n2 = 0; use mixed_step")
    FP = np.atleast_2d(FP)
    FE = np.atleast_2d(FE)
    empty_P = np.zeros((FP.shape[0], 0))
    empty_E = np.zeros((FE.shape[0], 0))
    return mixed_step(model, belief_P, belief_E, None, uP, uE, zP, zE, (FP, empty_P), (FE, empty_E), t, mode)


def naive_step(model: GameModel, belief: BeliefState, uP, uE, z, t: int, player: str = "P", x2_prev=None) -> BeliefState:
    """Kalman step with both observed controls in the drift and no correction.

    The returned belief keeps the incoming cross and relative covariances.
    """
    if t < 1:
        raise ValueError("filter steps start at t = 1")
    d = model.dims
    n1 = d.n1
    s = t - 1
    A11 = model.A[s, :n1, :n1]
    xm = A11 @ belief.xhat + model.BP[s, :n1] @ np.atleast_1d(uP) + model.BE[s, :n1] @ np.atleast_1d(uE)
    if d.n2:
        xm = xm + model.A[s, :n1, n1:] @ np.atleast_1d(x2_prev)
    Sm = sym(A11 @ belief.Sigma @ A11.T + model.process_cov(s))
    K, Sn = _measurement(Sm, model.H(player)[t], model.G(player))
    xn = xm + K @ (np.atleast_1d(z) - model.H(player)[t] @ xm)
    return BeliefState(t, xn, Sn, belief.SigmaCross, belief.SigmaRel)


# ------------------------------------------------------------ schedule


@dataclass(frozen=True, eq=False)
class FilterSchedule:
    """Deterministic covariance and gain sequences under fixed feedback gains.

    Arrays indexed by ``t = 0..T`` hold beliefs at ``t``; step quantities
    (``J``, improved covariances, ``Delta``, signal maps) are indexed by the
    step's starting time ``t = 0..T-1``; ``K`` is indexed by the arrival time
    and slice 0 is zero.
    """

    mode: str
    SigmaP: np.ndarray  # (T+1, n1, n1)
    SigmaE: np.ndarray
    Cross: np.ndarray  # E[eP eE']
    Rel: np.ndarray
    JP: np.ndarray  # (T, n1, rP)
    JE: np.ndarray
    SigmaPplus: np.ndarray  # (T, n1, n1)
    SigmaEplus: np.ndarray
    Delta: np.ndarray  # (T, n1, n1), P side
    KP: np.ndarray  # (T+1, n1, p)
    KE: np.ndarray
    YP: np.ndarray  # (T, rP, n1) signal matrix seen by P
    YE: np.ndarray
    SP: np.ndarray  # (T, rP, k) action residual -> signal, seen by P
    SE: np.ndarray
    signal_mode_P: str
    signal_mode_E: str

    def Sigma(self, player: str) -> np.ndarray:
        return self.SigmaP if player == "P" else self.SigmaE

    def K(self, player: str) -> np.ndarray:
        return self.KP if player == "P" else self.KE

    def cross_from(self, player: str) -> np.ndarray:
        """``E[e_player e_opp']`` for every ``t``."""
        return self.Cross if player == "P" else np.swapaxes(self.Cross, 1, 2)


def covariance_schedule(model: GameModel, prior: Prior, FP: np.ndarray, FE: np.ndarray, mode: str = CORRECTED) -> FilterSchedule:
    """Run the covariance recursions forward under gains ``FP[t]``, ``FE[t]``.

    Parameters
    ----------
    FP, FE : ndarray, shapes (T, m, n) and (T, k, n)
        Feedback gains on ``(x1, x2)``.
    """
    d = model.dims
    n1, T = d.n1, d.T
    bP, bE = initial_beliefs(prior)
    SP, SE, C, R = bP.Sigma, bE.Sigma, bP.SigmaCross, bP.SigmaRel
    rec = {k: [] for k in ("SP", "SE", "C", "R", "JP", "JE", "SPp", "SEp", "D", "KP", "KE", "YP", "YE", "SmP", "SmE")}
    for key, val in (("SP", SP), ("SE", SE), ("C", C), ("R", R)):
        rec[key].append(val)
    rec["KP"].append(np.zeros((n1, d.p)))
    rec["KE"].append(np.zeros((n1, d.q)))
    modes = set()
    for t in range(1, T + 1):
        YP, SmP, mP = _signal_matrices(np.asarray(FE[t - 1]), n1)
        YE, SmE, mE = _signal_matrices(np.asarray(FP[t - 1]), n1)
        modes.add((mP, mE))
        try:
            cs = _cov_step(model, SP, SE, C, R, YP, YE, t, mode)
        except DegenerateSignalError as exc:
            raise DegenerateSignalError(f"step t={t}: {exc}") from exc
        SP, SE, C, R = cs.SP, cs.SE, cs.Cross, cs.Rel
        for key, val in (
            ("SP", SP), ("SE", SE), ("C", C), ("R", R), ("JP", cs.JP), ("JE", cs.JE),
            ("SPp", cs.SPplus), ("SEp", cs.SEplus), ("D", cs.Delta), ("KP", cs.KP), ("KE", cs.KE),
            ("YP", YP), ("YE", YE), ("SmP", SmP), ("SmE", SmE),
        ):
            rec[key].append(val)
    mP, mE = sorted(modes)[0]
    st = {k: np.array(v) for k, v in rec.items()}
    return FilterSchedule(
        mode=mode, SigmaP=st["SP"], SigmaE=st["SE"], Cross=st["C"], Rel=st["R"], JP=st["JP"], JE=st["JE"],
        SigmaPplus=st["SPp"], SigmaEplus=st["SEp"], Delta=st["D"], KP=st["KP"], KE=st["KE"],
        YP=st["YP"], YE=st["YE"], SP=st["SmP"], SE=st["SmE"], signal_mode_P=mP, signal_mode_E=mE,
    )
