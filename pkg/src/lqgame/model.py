"""Game definition: dimensions, time-indexed matrices, priors and validation.

A game has a state ``x = (x1, x2)`` where ``x1`` (``n1`` entries) is seen only
through noisy private signals and ``x2`` (``n2`` entries, possibly empty) is
publicly observed. Two players, ``P`` and ``E``, apply controls ``uP`` and
``uE``::

    x[t+1] = A[t] x[t] + BP[t] uP[t] + BE[t] uE[t] + Gamma[t] w[t],  w ~ N(0, W)
    zP[t]  = HP[t] x1[t] + vP[t],  vP ~ N(0, GP)
    zE[t]  = HE[t] x1[t] + vE[t],  vE ~ N(0, GE)

Each player minimizes ``sum_t x'Q[t]x + u'R[t]u + x'Q[T]x``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import IOFailure, StructuralError, ValidationError
from .linalg import EPS_PD, min_eig, sym

PLAYERS = ("P", "E")


@dataclass(frozen=True)
class Dimensions:
    """Problem sizes.

    ``n2 = 0`` is the fully partially observed game.
    """

    n1: int
    n2: int
    m: int
    k: int
    p: int
    q: int
    d: int
    T: int

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    def check(self) -> None:
        for name in ("n1", "m", "k", "p", "q", "d", "T"):
            if getattr(self, name) < 1:
                raise StructuralError(f"dimension {name} must be >= 1, got {getattr(self, name)}")
        if self.n2 < 0:
            raise StructuralError(f"dimension n2 must be >= 0, got {self.n2}")


def _frozen(a: Any) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GameModel:
    """All matrices of a finite-horizon two-player LQG game.

    Sequences are stored as stacked arrays indexed by time. ``HP`` and ``HE``
    hold ``T + 1`` slices so that ``HP[t]`` is the observation matrix at time
    ``t`` for ``t = 1..T``; slice 0 repeats slice 1 and is never used.
    """

    dims: Dimensions
    A: np.ndarray  # (T, n, n)
    BP: np.ndarray  # (T, n, m)
    BE: np.ndarray  # (T, n, k)
    Gamma: np.ndarray  # (T, n, d)
    W: np.ndarray  # (d, d)
    HP: np.ndarray  # (T+1, p, n1)
    HE: np.ndarray  # (T+1, q, n1)
    GP: np.ndarray  # (p, p)
    GE: np.ndarray  # (q, q)
    QP: np.ndarray  # (T+1, n, n)
    QE: np.ndarray  # (T+1, n, n)
    RP: np.ndarray  # (T, m, m)
    RE: np.ndarray  # (T, k, k)

    def __post_init__(self) -> None:
        for name in ("A", "BP", "BE", "Gamma", "W", "HP", "HE", "GP", "GE", "QP", "QE", "RP", "RE"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        for name in ("W", "GP", "GE"):
            object.__setattr__(self, name, _frozen(sym(getattr(self, name))))
        for name in ("QP", "QE", "RP", "RE"):
            arr = getattr(self, name)
            object.__setattr__(self, name, _frozen(0.5 * (arr + np.swapaxes(arr, 1, 2))))

    @property
    def T(self) -> int:
        return self.dims.T

    def B(self, player: str) -> np.ndarray:
        return self.BP if player == "P" else self.BE

    def H(self, player: str) -> np.ndarray:
        return self.HP if player == "P" else self.HE

    def G(self, player: str) -> np.ndarray:
        return self.GP if player == "P" else self.GE

    def Q(self, player: str) -> np.ndarray:
        return self.QP if player == "P" else self.QE

    def R(self, player: str) -> np.ndarray:
        return self.RP if player == "P" else self.RE

    def process_cov(self, t: int) -> np.ndarray:
        """``Gamma[t] W Gamma[t]'`` restricted to the partially observed block."""
        G1 = self.Gamma[t, : self.dims.n1]
        return sym(G1 @ self.W @ G1.T)

    def to_dict(self) -> dict:
        """Serialize to the JSON configuration layout (per-step lists)."""
        d = self.dims
        return {
            "dims": {"n1": d.n1, "n2": d.n2, "m": d.m, "k": d.k, "p": d.p, "q": d.q, "d": d.d},
            "horizon": d.T,
            "dynamics": {
                "A": self.A.tolist(),
                "BP": self.BP.tolist(),
                "BE": self.BE.tolist(),
                "Gamma": self.Gamma.tolist(),
                "W": self.W.tolist(),
            },
            "observations": {
                "HP": self.HP[1:].tolist(),
                "HE": self.HE[1:].tolist(),
                "GP": self.GP.tolist(),
                "GE": self.GE.tolist(),
            },
            "costs": {
                "QP": self.QP.tolist(),
                "QE": self.QE.tolist(),
                "RP": self.RP.tolist(),
                "RE": self.RE.tolist(),
            },
        }


@dataclass(frozen=True, eq=False)
class Prior:
    """Initial beliefs of both players over the partially observed block.

    Parameters
    ----------
    xhat0P, xhat0E : ndarray, shape (n1,)
        Prior means.
    W0P, W0E : ndarray, shape (n1, n1)
        Prior covariances, known to both players.
    x0_observed : ndarray, shape (n2,)
        Initial value of the public block (empty when ``n2 = 0``).
    """

    xhat0P: np.ndarray
    W0P: np.ndarray
    xhat0E: np.ndarray
    W0E: np.ndarray
    x0_observed: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self) -> None:
        object.__setattr__(self, "xhat0P", _frozen(np.atleast_1d(self.xhat0P)))
        object.__setattr__(self, "xhat0E", _frozen(np.atleast_1d(self.xhat0E)))
        object.__setattr__(self, "W0P", _frozen(sym(np.atleast_2d(self.W0P))))
        object.__setattr__(self, "W0E", _frozen(sym(np.atleast_2d(self.W0E))))
        object.__setattr__(self, "x0_observed", _frozen(np.atleast_1d(self.x0_observed)))

    def xhat0(self, player: str) -> np.ndarray:
        return self.xhat0P if player == "P" else self.xhat0E

    def W0(self, player: str) -> np.ndarray:
        return self.W0P if player == "P" else self.W0E

    def to_dict(self) -> dict:
        return {
            "xhat0P": self.xhat0P.tolist(),
            "W0P": self.W0P.tolist(),
            "xhat0E": self.xhat0E.tolist(),
            "W0E": self.W0E.tolist(),
            "x0_observed": self.x0_observed.tolist(),
        }


@dataclass(frozen=True)
class Violation:
    """One failed assumption."""

    item: str
    t: int | None
    matrix: str
    detail: str

    def __str__(self) -> str:
        where = "" if self.t is None else f" at t={self.t}"
        return f"[{self.item}] {self.matrix}{where}: {self.detail}"


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate`."""

    violations: tuple[Violation, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_if_failed(self) -> None:
        if not self.ok:
            raise ValidationError("; ".join(str(v) for v in self.violations))


def _expect_shape(name: str, arr: np.ndarray, shape: tuple[int, ...]) -> None:
    if arr.shape != shape:
        raise StructuralError(f"{name} has shape {arr.shape}, expected {shape}")


def check_structure(model: GameModel, prior: Prior | None = None) -> None:
    """Raise :class:`StructuralError` on the first shape mismatch."""
    d = model.dims
    d.check()
    n, T = d.n, d.T
    _expect_shape("A", model.A, (T, n, n))
    _expect_shape("BP", model.BP, (T, n, d.m))
    _expect_shape("BE", model.BE, (T, n, d.k))
    _expect_shape("Gamma", model.Gamma, (T, n, d.d))
    _expect_shape("W", model.W, (d.d, d.d))
    _expect_shape("HP", model.HP, (T + 1, d.p, d.n1))
    _expect_shape("HE", model.HE, (T + 1, d.q, d.n1))
    _expect_shape("GP", model.GP, (d.p, d.p))
    _expect_shape("GE", model.GE, (d.q, d.q))
    _expect_shape("QP", model.QP, (T + 1, n, n))
    _expect_shape("QE", model.QE, (T + 1, n, n))
    _expect_shape("RP", model.RP, (T, d.m, d.m))
    _expect_shape("RE", model.RE, (T, d.k, d.k))
    if prior is not None:
        _expect_shape("xhat0P", prior.xhat0P, (d.n1,))
        _expect_shape("xhat0E", prior.xhat0E, (d.n1,))
        _expect_shape("W0P", prior.W0P, (d.n1, d.n1))
        _expect_shape("W0E", prior.W0E, (d.n1, d.n1))
        _expect_shape("x0_observed", prior.x0_observed, (d.n2,))


def validate(model: GameModel, prior: Prior | None = None, *, eps: float = EPS_PD) -> ValidationReport:
    """Check the standing assumptions of the game.

    Covariances and weights are symmetrized before their eigenvalues are
    inspected. A minimum eigenvalue in ``(0, eps]`` only produces a warning,
    so that deliberately tiny regularizing noise is accepted.

    Raises
    ------
    StructuralError
        If any matrix does not match the declared dimensions.
    """
    check_structure(model, prior)
    d = model.dims
    bad: list[Violation] = []
    warn: list[str] = []

    def pd(item: str, name: str, M: np.ndarray, t: int | None) -> None:
        e = min_eig(M)
        if e <= 0.0:
            bad.append(Violation(item, t, name, f"not positive definite (min eig {e:.3e})"))
        elif e <= eps:
            where = "" if t is None else f" at t={t}"
            warn.append(f"{name}{where} is nearly singular (min eig {e:.3e})")

    def psd(item: str, name: str, M: np.ndarray, t: int | None) -> None:
        e = min_eig(M)
        if e < -eps:
            bad.append(Violation(item, t, name, f"not positive semidefinite (min eig {e:.3e})"))

    pd("noise covariance", "W", model.W, None)
    pd("noise covariance", "GP", model.GP, None)
    pd("noise covariance", "GE", model.GE, None)
    for t in range(1, d.T + 1):
        for name, H in (("HP", model.HP[t]), ("HE", model.HE[t])):
            if np.linalg.matrix_rank(H) < d.n1:
                bad.append(Violation("observation rank", t, name, f"rank below n1={d.n1}"))
    for t in range(d.T):
        pd("process noise", "Gamma1 W Gamma1'", model.process_cov(t), t)
    for t in range(d.T + 1):
        psd("cost weights", "QP", model.QP[t], t)
        psd("cost weights", "QE", model.QE[t], t)
    for t in range(d.T):
        pd("cost weights", "RP", model.RP[t], t)
        pd("cost weights", "RE", model.RE[t], t)
    if prior is not None:
        pd("prior covariance", "W0P", prior.W0P, None)
        pd("prior covariance", "W0E", prior.W0E, None)
    return ValidationReport(tuple(bad), tuple(warn))


def stage_cost(model: GameModel, t: int, x, uP, uE, player: str) -> float:
    """Cost charged to ``player`` at time ``t``.

    Returns ``x'Q[t]x + u'R[t]u`` for ``t < T`` and ``x'Q[T]x`` at ``t = T``.
    """
    if not 0 <= t <= model.T:
        raise IndexError(f"t={t} outside 0..{model.T}")
    if player not in PLAYERS:
        raise ValueError(f"unknown player {player!r}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    c = float(x @ model.Q(player)[t] @ x)
    if t < model.T:
        u = np.atleast_1d(np.asarray(uP if player == "P" else uE, dtype=float))
        c += float(u @ model.R(player)[t] @ u)
    return c


# ---------------------------------------------------------------- JSON I/O


def _per_step(value: Any, steps: int, name: str, start: int = 0) -> np.ndarray:
    """Broadcast a single matrix to ``steps`` slices, or accept a per-step list."""
    if isinstance(value, dict):
        stage = np.array(value["stage"], dtype=float)
        terminal = np.array(value["terminal"], dtype=float)
        arr = np.stack([stage] * (steps - 1) + [terminal])
    else:
        arr = np.array(value, dtype=float)
        if arr.ndim <= 2:
            arr = np.broadcast_to(np.atleast_2d(arr), (steps,) + np.atleast_2d(arr).shape).copy()
        elif arr.shape[0] != steps - start:
            raise StructuralError(f"{name} lists {arr.shape[0]} steps, expected {steps - start}")
    return arr


def model_from_dict(cfg: dict) -> tuple[GameModel, Prior]:
    """Build a model and prior from the JSON configuration layout."""
    try:
        dd = cfg["dims"]
        T = int(cfg["horizon"])
        dims = Dimensions(
            n1=int(dd["n1"]),
            n2=int(dd.get("n2", 0)),
            m=int(dd["m"]),
            k=int(dd["k"]),
            p=int(dd["p"]),
            q=int(dd["q"]),
            d=int(dd["d"]),
            T=T,
        )
        dims.check()
        dyn, obs, cost, pr = cfg["dynamics"], cfg["observations"], cfg["costs"], cfg["prior"]
        HP = _per_step(obs["HP"], T, "HP")
        HE = _per_step(obs["HE"], T, "HE")
        model = GameModel(
            dims=dims,
            A=_per_step(dyn["A"], T, "A"),
            BP=_per_step(dyn["BP"], T, "BP"),
            BE=_per_step(dyn["BE"], T, "BE"),
            Gamma=_per_step(dyn["Gamma"], T, "Gamma"),
            W=np.atleast_2d(np.array(dyn["W"], dtype=float)),
            HP=np.concatenate([HP[:1], HP]),
            HE=np.concatenate([HE[:1], HE]),
            GP=np.atleast_2d(np.array(obs["GP"], dtype=float)),
            GE=np.atleast_2d(np.array(obs["GE"], dtype=float)),
            QP=_per_step(cost["QP"], T + 1, "QP"),
            QE=_per_step(cost["QE"], T + 1, "QE"),
            RP=_per_step(cost["RP"], T, "RP"),
            RE=_per_step(cost["RE"], T, "RE"),
        )
        prior = Prior(
            xhat0P=np.array(pr["xhat0P"], dtype=float),
            W0P=np.array(pr["W0P"], dtype=float),
            xhat0E=np.array(pr["xhat0E"], dtype=float),
            W0E=np.array(pr["W0E"], dtype=float),
            x0_observed=np.array(pr.get("x0_observed", []), dtype=float),
        )
    except (KeyError, TypeError) as exc:
        raise StructuralError(f"malformed configuration: missing or invalid {exc}") from exc
    except ValueError as exc:
        raise StructuralError(f"malformed configuration: {exc}") from exc
    check_structure(model, prior)
    return model, prior


def model_to_dict(model: GameModel, prior: Prior) -> dict:
    out = model.to_dict()
    out["prior"] = prior.to_dict()
    return out


def load_config(path: str | Path) -> tuple[GameModel, Prior]:
    """Read a JSON configuration file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StructuralError(f"{path} is not valid JSON: {exc}") from exc
    return model_from_dict(cfg)


def save_config(path: str | Path, model: GameModel, prior: Prior) -> None:
    try:
        Path(path).write_text(json.dumps(model_to_dict(model, prior), indent=1))
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def config_hash(model: GameModel, prior: Prior) -> str:
    """Short content hash identifying a model and prior."""
    blob = json.dumps(model_to_dict(model, prior), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def scalar_model(
    T: int = 1,
    A: float = 1.0,
    BP: float = 1.0,
    BE: float = 1.0,
    W: float = 1.0,
    GP: float = 1.0,
    GE: float = 1.0,
    H: float = 1.0,
    Q_stage: float = 0.0,
    Q_terminal: float = 1.0,
    R: float = 1.0,
) -> GameModel:
    """One-dimensional fully partially observed game with constant coefficients."""
    one = np.ones((1, 1))
    Qs = [Q_stage * one] * T + [Q_terminal * one]
    return GameModel(
        dims=Dimensions(n1=1, n2=0, m=1, k=1, p=1, q=1, d=1, T=T),
        A=np.stack([A * one] * T),
        BP=np.stack([BP * one] * T),
        BE=np.stack([BE * one] * T),
        Gamma=np.stack([one] * T),
        W=W * one,
        HP=np.stack([H * one] * (T + 1)),
        HE=np.stack([H * one] * (T + 1)),
        GP=GP * one,
        GE=GE * one,
        QP=np.stack(Qs),
        QE=np.stack(Qs),
        RP=np.stack([R * one] * T),
        RE=np.stack([R * one] * T),
    )

