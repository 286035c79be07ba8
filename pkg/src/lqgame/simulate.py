"""Seeded Monte Carlo engine for equilibrium play.

Each episode owns a counter-based generator seeded with
``(base_seed, episode_index)``, so results do not depend on how episodes are
split across worker processes. Within an episode the draws are, in order:
``2 n1`` normals for randomized initial beliefs (drawn even when unused), then
per step the process noise, ``P``'s and ``E``'s signal noise.

Because both filters' covariances are signal independent, all gains are
computed once per batch; the kernel only runs the affine mean updates.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from statistics import NormalDist

import numpy as np

from . import kernel
from .equilibrium import RiccatiSolution
from .filter import CORRECTED, NAIVE, covariance_schedule
from .linalg import exact_sum, psd_sqrt
from .model import GameModel, Prior

FULL = "full"
SIM_MODES = (CORRECTED, NAIVE, FULL)
INITIAL_MODES = ("fixed", "sampled", "anchor-P", "anchor-E")
Z95 = NormalDist().inv_cdf(0.975)


@dataclass(frozen=True, eq=False)
class Plan:
    """Per-step matrices consumed by the episode kernel."""

    mode: str
    n1: int
    A: np.ndarray
    BP: np.ndarray
    BE: np.ndarray
    Gw: np.ndarray
    FP: np.ndarray
    FE: np.ndarray
    JP: np.ndarray
    YP: np.ndarray
    SP: np.ndarray
    JE: np.ndarray
    YE: np.ndarray
    SE: np.ndarray
    HP: np.ndarray
    sGP: np.ndarray
    KP: np.ndarray
    HE: np.ndarray
    sGE: np.ndarray
    KE: np.ndarray
    sW0P: np.ndarray
    sW0E: np.ndarray
    noise_width: int

    def run(self, x0, xP0, xE0, noise, impl=None):
        """Run the kernel; ``impl`` overrides the selected backend's function."""
        fn = impl or kernel.simulate_kernel
        return fn(
            x0, xP0, xE0, noise, self.A, self.BP, self.BE, self.Gw, self.FP, self.FE,
            self.JP, self.YP, self.SP, self.JE, self.YE, self.SE,
            self.HP, self.sGP, self.KP, self.HE, self.sGE, self.KE,
            self.n1, int(self.mode == CORRECTED), int(self.mode == FULL),
        )


def build_plan(model: GameModel, prior: Prior, riccati: RiccatiSolution, mode: str) -> Plan:
    """Precompute every matrix an episode needs under ``mode``."""
    if mode not in SIM_MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {SIM_MODES}")
    d = model.dims
    sched = covariance_schedule(model, prior, riccati.FP, riccati.FE, CORRECTED if mode == FULL else mode)
    sW = psd_sqrt(model.W)
    Gw = np.einsum("tij,jk->tik", model.Gamma, sW)
    c = np.ascontiguousarray
    return Plan(
        mode=mode,
        n1=d.n1,
        A=c(model.A),
        BP=c(model.BP),
        BE=c(model.BE),
        Gw=c(Gw),
        FP=c(riccati.FP),
        FE=c(riccati.FE),
        JP=c(sched.JP),
        YP=c(sched.YP),
        SP=c(sched.SP),
        JE=c(sched.JE),
        YE=c(sched.YE),
        SE=c(sched.SE),
        HP=c(model.HP[1:]),
        sGP=c(psd_sqrt(model.GP)),
        KP=c(sched.KP[1:]),
        HE=c(model.HE[1:]),
        sGE=c(psd_sqrt(model.GE)),
        KE=c(sched.KE[1:]),
        sW0P=psd_sqrt(prior.W0P),
        sW0E=psd_sqrt(prior.W0E),
        noise_width=d.d + d.p + d.q,
    )


def episode_generator(base_seed: int, episode: int) -> np.random.Generator:
    """Philox generator keyed by ``(base_seed, episode)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(base_seed), int(episode)])))


def draw_episode_noise(base_seed: int, episode: int, n1: int, T: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    g = episode_generator(base_seed, episode)
    init = g.standard_normal(2 * n1)
    steps = g.standard_normal((T, width))
    return init, steps


def _initial(prior: Prior, plan: Plan, x0: np.ndarray, init: np.ndarray, how: str):
    n1 = plan.n1
    xP0 = prior.xhat0P.copy()
    xE0 = prior.xhat0E.copy()
    x = x0.copy()
    eP = plan.sW0P @ init[:n1]
    eE = plan.sW0E @ init[n1:]
    if how == "sampled":
        xP0 = x[:n1] + eP
        xE0 = x[:n1] + eE
    elif how == "anchor-P":
        x[:n1] = xP0 - eP
        xE0 = x[:n1] + eE
    elif how == "anchor-E":
        x[:n1] = xE0 - eE
        xP0 = x[:n1] + eP
    elif how != "fixed":
        raise ValueError(f"unknown initial mode {how!r}; choose from {INITIAL_MODES}")
    return x, xP0, xE0


def _simulate_range(plan: Plan, prior: Prior, x0: np.ndarray, T: int, base_seed: int, start: int, stop: int, initial: str):
    N = stop - start
    n = x0.shape[0]
    n1 = plan.n1
    X0 = np.zeros((N, n))
    XP0 = np.zeros((N, n1))
    XE0 = np.zeros((N, n1))
    noise = np.zeros((N, T, plan.noise_width))
    for r, i in enumerate(range(start, stop)):
        init, steps = draw_episode_noise(base_seed, i, n1, T, plan.noise_width)
        X0[r], XP0[r], XE0[r] = _initial(prior, plan, x0, init, initial)
        noise[r] = steps
    return plan.run(X0, XP0, XE0, noise)


@dataclass(frozen=True, eq=False)
class Trajectories:
    """Stacked trajectories of a batch, episode-major."""

    X: np.ndarray  # (N, T+1, n)
    XP: np.ndarray  # (N, T+1, n1)
    XE: np.ndarray
    UP: np.ndarray  # (N, T, m)
    UE: np.ndarray
    ZP: np.ndarray  # (N, T, p), signal arriving at t+1
    ZE: np.ndarray


def simulate_trajectories(
    model: GameModel,
    prior: Prior,
    riccati: RiccatiSolution,
    mode: str,
    episodes: int,
    base_seed: int = 0,
    *,
    x0=None,
    initial: str = "fixed",
    jobs: int = 1,
    plan: Plan | None = None,
) -> Trajectories:
    """Simulate ``episodes`` independent games and return all trajectories."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    plan = plan or build_plan(model, prior, riccati, mode)
    x0 = default_x0(model, prior) if x0 is None else np.asarray(x0, dtype=float)
    T = model.T
    jobs = max(1, int(jobs))
    if jobs == 1 or episodes < 2 * jobs:
        parts = [_simulate_range(plan, prior, x0, T, base_seed, 0, episodes, initial)]
    else:
        bounds = np.linspace(0, episodes, jobs + 1).astype(int)
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            futs = [
                ex.submit(_simulate_range, plan, prior, x0, T, base_seed, int(a), int(b), initial)
                for a, b in zip(bounds[:-1], bounds[1:])
                if b > a
            ]
            parts = [f.result() for f in futs]
    arrays = [np.concatenate([p[i] for p in parts]) for i in range(7)]
    return Trajectories(*arrays)


def default_x0(model: GameModel, prior: Prior) -> np.ndarray:
    """True initial state used when none is given: ``P``'s prior mean and the public block."""
    return np.concatenate([prior.xhat0P, prior.x0_observed])


# ------------------------------------------------------------ statistics


def _quad_rows(M: np.ndarray, V: np.ndarray) -> np.ndarray:
    """``v' M v`` for each row of ``V``, accumulated in a fixed order."""
    out = np.zeros(V.shape[0])
    r, c = M.shape
    for i in range(r):
        for j in range(c):
            if M[i, j] != 0.0:
                out = out + M[i, j] * (V[:, i] * V[:, j])
    return out


def episode_costs(model: GameModel, tr: Trajectories) -> tuple[np.ndarray, np.ndarray]:
    """Realized total cost of each player in every episode."""
    T = model.T
    N = tr.X.shape[0]
    cP = np.zeros(N)
    cE = np.zeros(N)
    for t in range(T):
        cP = cP + _quad_rows(model.QP[t], tr.X[:, t]) + _quad_rows(model.RP[t], tr.UP[:, t])
        cE = cE + _quad_rows(model.QE[t], tr.X[:, t]) + _quad_rows(model.RE[t], tr.UE[:, t])
    cP = cP + _quad_rows(model.QP[T], tr.X[:, T])
    cE = cE + _quad_rows(model.QE[T], tr.X[:, T])
    return cP, cE


def episode_errors(tr: Trajectories, include_initial: bool = True) -> dict[str, np.ndarray]:
    """Per-episode mean squared and absolute estimation errors of both players.

    Errors are averaged over the hidden components and over
    ``t = 0..T`` (or ``t = 1..T`` with ``include_initial=False``).
    """
    n1 = tr.XP.shape[2]
    T1 = tr.X.shape[1]
    ts = range(0 if include_initial else 1, T1)
    out = {}
    for tag, XH in (("P", tr.XP), ("E", tr.XE)):
        sq = np.zeros(tr.X.shape[0])
        ab = np.zeros(tr.X.shape[0])
        for t in ts:
            for i in range(n1):
                e = XH[:, t, i] - tr.X[:, t, i]
                sq = sq + e * e
                ab = ab + np.abs(e)
        cnt = len(ts) * n1
        out[f"mse_{tag}"] = sq / cnt
        out[f"mae_{tag}"] = ab / cnt
    return out


def mean_ci(values) -> tuple[float, float, float]:
    """Mean and normal-approximation 95% interval; a point interval for one sample."""
    v = np.asarray(values, dtype=float)
    n = v.size
    if n == 0:
        return math.nan, math.nan, math.nan
    mean = exact_sum(v) / n
    if n == 1:
        return mean, mean, mean
    var = exact_sum((v - mean) ** 2) / (n - 1)
    half = Z95 * math.sqrt(var / n)
    return mean, mean - half, mean + half


@dataclass(frozen=True)
class BatchStats:
    """Aggregate results of a batch (one row of the stats CSV)."""

    scenario: str
    mode: str
    episodes: int
    base_seed: int
    threshold: float
    mse_P: float
    mae_P: float
    mse_E: float
    mae_E: float
    agreements: int
    mean_cost_P: float
    cost_P_lo: float
    cost_P_hi: float
    mean_cost_E: float
    cost_E_lo: float
    cost_E_hi: float
    ap_count: int
    ap_mean: float
    ap_lo: float
    ap_hi: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list:
        return [getattr(self, c) for c in self.columns()]


@dataclass(frozen=True, eq=False)
class EpisodeMetrics:
    """Per-episode quantities behind a :class:`BatchStats`."""

    mse_P: np.ndarray
    mae_P: np.ndarray
    mse_E: np.ndarray
    mae_E: np.ndarray
    cost_P: np.ndarray
    cost_E: np.ndarray
    agreed: np.ndarray
    price: np.ndarray


def episode_metrics(model: GameModel, tr: Trajectories, offer_indices, threshold: float, include_initial: bool = True) -> EpisodeMetrics:
    err = episode_errors(tr, include_initial)
    cP, cE = episode_costs(model, tr)
    N = tr.X.shape[0]
    if offer_indices is None:
        agreed = np.zeros(N, dtype=bool)
        price = np.full(N, np.nan)
    else:
        iB, iS = offer_indices
        xb, xs = tr.X[:, -1, iB], tr.X[:, -1, iS]
        agreed = np.abs(xb - xs) < threshold
        price = 0.5 * (xb + xs)
    return EpisodeMetrics(err["mse_P"], err["mae_P"], err["mse_E"], err["mae_E"], cP, cE, agreed, price)


def summarize(em: EpisodeMetrics, *, scenario: str, mode: str, base_seed: int, threshold: float, mask=None) -> BatchStats:
    """Aggregate per-episode metrics; ``mask`` restricts the agreement-price sample."""
    N = em.cost_P.size
    cp = mean_ci(em.cost_P)
    ce = mean_ci(em.cost_E)
    sel = em.agreed if mask is None else (em.agreed & mask)
    ap = mean_ci(em.price[sel])
    return BatchStats(
        scenario=scenario,
        mode=mode,
        episodes=N,
        base_seed=base_seed,
        threshold=threshold,
        mse_P=exact_sum(em.mse_P) / N,
        mae_P=exact_sum(em.mae_P) / N,
        mse_E=exact_sum(em.mse_E) / N,
        mae_E=exact_sum(em.mae_E) / N,
        agreements=int(np.count_nonzero(em.agreed)),
        mean_cost_P=cp[0], cost_P_lo=cp[1], cost_P_hi=cp[2],
        mean_cost_E=ce[0], cost_E_lo=ce[1], cost_E_hi=ce[2],
        ap_count=int(np.count_nonzero(sel)),
        ap_mean=ap[0], ap_lo=ap[1], ap_hi=ap[2],
    )


@dataclass(frozen=True, eq=False)
class BatchResult:
    stats: BatchStats
    metrics: EpisodeMetrics
    trajectories: Trajectories | None = None


def run_batch(
    model: GameModel,
    prior: Prior,
    riccati: RiccatiSolution,
    filter_mode: str,
    episodes: int,
    base_seed: int = 0,
    agreement_threshold: float = 3.0,
    *,
    x0=None,
    offer_indices=None,
    initial: str = "fixed",
    include_initial: bool = True,
    jobs: int = 1,
    keep_trajectories: bool = False,
    scenario: str = "custom",
) -> BatchResult:
    """Run independent episodes and aggregate their statistics.

    Parameters
    ----------
    filter_mode : {"corrected", "naive", "full"}
        ``full`` replaces both estimates by the true hidden state.
    x0 : array_like, optional
        True initial state; defaults to :func:`default_x0`.
    offer_indices : tuple of int, optional
        State coordinates of the two offers, for the agreement statistics.
    initial : {"fixed", "sampled", "anchor-P", "anchor-E"}
        How initial beliefs relate to the true state; see :func:`_initial`.
    include_initial : bool
        Whether ``t = 0`` enters the estimation-error averages.
    """
    tr = simulate_trajectories(model, prior, riccati, filter_mode, episodes, base_seed, x0=x0, initial=initial, jobs=jobs)
    em = episode_metrics(model, tr, offer_indices, agreement_threshold, include_initial)
    stats = summarize(em, scenario=scenario, mode=filter_mode, base_seed=base_seed, threshold=agreement_threshold)
    return BatchResult(stats, em, tr if keep_trajectories else None)


@dataclass(frozen=True, eq=False)
class PairedResult:
    """Corrected and naive batches on identical noise, with per-episode deltas.

    ``*_common`` restrict the agreement-price statistics to episodes that
    reached agreement under both filters.
    """

    corrected: BatchResult
    naive: BatchResult
    delta_mse_P: np.ndarray = field(repr=False)
    delta_cost_P: np.ndarray = field(repr=False)
    delta_cost_E: np.ndarray = field(repr=False)
    corrected_common: BatchStats | None = None
    naive_common: BatchStats | None = None


def paired_comparison(model, prior, riccati, episodes, base_seed=0, agreement_threshold=3.0, **kw) -> PairedResult:
    """Common-random-number comparison of the corrected and naive filters."""
    kw.setdefault("scenario", "custom")
    rc = run_batch(model, prior, riccati, CORRECTED, episodes, base_seed, agreement_threshold, **kw)
    rn = run_batch(model, prior, riccati, NAIVE, episodes, base_seed, agreement_threshold, **kw)
    both = rc.metrics.agreed & rn.metrics.agreed
    common = dict(scenario=kw["scenario"], base_seed=base_seed, threshold=agreement_threshold, mask=both)
    return PairedResult(
        rc,
        rn,
        rn.metrics.mse_P - rc.metrics.mse_P,
        rn.metrics.cost_P - rc.metrics.cost_P,
        rn.metrics.cost_E - rc.metrics.cost_E,
        summarize(rc.metrics, mode=CORRECTED, **common),
        summarize(rn.metrics, mode=NAIVE, **common),
    )


@dataclass(frozen=True, eq=False)
class EpisodeTrace:
    """One simulated game.

    ``eP`` and ``eE`` are the estimation errors on the hidden block; ``zP[t]``
    and ``zE[t]`` are the signals received at ``t + 1``.
    """

    x_true: np.ndarray
    xhatP: np.ndarray
    xhatE: np.ndarray
    uP: np.ndarray
    uE: np.ndarray
    zP: np.ndarray
    zE: np.ndarray
    eP: np.ndarray
    eE: np.ndarray
    cost_P: float
    cost_E: float


def run_episode(model, prior, riccati, filter_mode, rng_seed, *, episode: int = 0, x0=None, initial="fixed") -> EpisodeTrace:
    """Simulate the single episode ``episode`` of the batch keyed by ``rng_seed``."""
    plan = build_plan(model, prior, riccati, filter_mode)
    x0a = default_x0(model, prior) if x0 is None else np.asarray(x0, dtype=float)
    tr = Trajectories(*_simulate_range(plan, prior, x0a, model.T, rng_seed, episode, episode + 1, initial))
    cP, cE = episode_costs(model, tr)
    n1 = model.dims.n1
    return EpisodeTrace(
        tr.X[0], tr.XP[0], tr.XE[0], tr.UP[0], tr.UE[0], tr.ZP[0], tr.ZE[0],
        tr.XP[0] - tr.X[0, :, :n1], tr.XE[0] - tr.X[0, :, :n1], float(cP[0]), float(cE[0]),
    )


def figure_series(tr: Trajectories) -> dict[str, np.ndarray]:
    """Per-step means over episodes of the state and both estimates."""
    N, T1, n = tr.X.shape
    n1 = tr.XP.shape[2]
    out = {"t": np.arange(T1, dtype=float)}
    for name, arr, width in (("x", tr.X, n), ("xhatP", tr.XP, n1), ("xhatE", tr.XE, n1)):
        for i in range(width):
            out[f"mean_{name}_{i}"] = np.array([exact_sum(arr[:, t, i]) / N for t in range(T1)])
    return out
