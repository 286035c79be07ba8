"""CSV output with an embedded run manifest.

Every file starts with ``# key: value`` comment lines describing how it was
produced, followed by a regular CSV table. Floats are written with 17
significant digits so that values survive a text round trip bit for bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .equilibrium import RiccatiSolution, ValueConstants
from .errors import IOFailure
from .simulate import BatchStats, Trajectories


def fmt(value) -> str:
    """Text form of one CSV cell."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(value)


@dataclass
class RunManifest:
    """Provenance of an output file, written as its comment header."""

    command: str
    source: str
    mode: str = ""
    episodes: int | None = None
    base_seed: int | None = None
    threshold: float | None = None
    outputs: list[str] = field(default_factory=list)
    version: str = __version__
    config_hash: str = ""
    notes: dict[str, str] = field(default_factory=dict)

    def lines(self) -> list[str]:
        items = [
            ("command", self.command),
            ("source", self.source),
            ("mode", self.mode),
            ("episodes", "" if self.episodes is None else str(self.episodes)),
            ("base_seed", "" if self.base_seed is None else str(self.base_seed)),
            ("threshold", "" if self.threshold is None else fmt(self.threshold)),
            ("outputs", " ".join(self.outputs)),
            ("version", self.version),
            ("config_hash", self.config_hash),
        ]
        items += list(self.notes.items())
        return [f"# {k}: {v}" for k, v in items]


def write_csv(path: str | Path, header: list[str], rows, manifest: RunManifest | None = None) -> Path:
    """Write ``rows`` under ``header``, preceded by the manifest comment block."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            if manifest is not None:
                for line in manifest.lines():
                    fh.write(line + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path: str | Path) -> tuple[dict[str, str], list[str], list[list[str]]]:
    """Read a file written by :func:`write_csv`; returns manifest, header and rows."""
    try:
        with open(path, newline="") as fh:
            text = fh.read().splitlines()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    meta = {}
    body = []
    for line in text:
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = value
        else:
            body.append(line)
    table = list(csv.reader(body))
    return meta, table[0], table[1:]


def _flat(prefix: str, M: np.ndarray) -> tuple[list[str], list[float]]:
    r, c = M.shape
    return [f"{prefix}_{i}_{j}" for i in range(r) for j in range(c)], [float(v) for v in M.reshape(-1)]


def gains_table(ric: RiccatiSolution) -> tuple[list[str], list[list]]:
    """One row per ``t = 0..T-1`` with both players' gains, row-major."""
    T = ric.FP.shape[0]
    header = ["t"] + _flat("FP", ric.FP[0])[0] + _flat("FE", ric.FE[0])[0] + ["condPhi"]
    rows = [[t] + _flat("FP", ric.FP[t])[1] + _flat("FE", ric.FE[t])[1] + [float(ric.condPhi[t])] for t in range(T)]
    return header, rows


def values_table(ric: RiccatiSolution, const: ValueConstants) -> tuple[list[str], list[list]]:
    """One row per ``t = 0..T`` with both value matrices and constants."""
    T1 = ric.UP.shape[0]
    header = ["t"] + _flat("UP", ric.UP[0])[0] + _flat("UE", ric.UE[0])[0] + ["cP", "cE"]
    rows = [
        [t] + _flat("UP", ric.UP[t])[1] + _flat("UE", ric.UE[t])[1] + [float(const.cP[t]), float(const.cE[t])]
        for t in range(T1)
    ]
    return header, rows


def stats_table(stats: list[BatchStats]) -> tuple[list[str], list[list]]:
    return BatchStats.columns(), [s.row() for s in stats]


def trace_table(tr: Trajectories) -> tuple[list[str], list[list]]:
    """Long-format trajectories: one row per episode and ``t = 0..T``.

    Controls and signals of step ``t`` (received at ``t + 1``) are left empty
    at ``t = T``.
    """
    N, T1, n = tr.X.shape
    n1 = tr.XP.shape[2]
    m, k, p, q = tr.UP.shape[2], tr.UE.shape[2], tr.ZP.shape[2], tr.ZE.shape[2]
    header = (
        ["episode", "t"]
        + [f"x_{i}" for i in range(n)]
        + [f"xhatP_{i}" for i in range(n1)]
        + [f"xhatE_{i}" for i in range(n1)]
        + [f"uP_{i}" for i in range(m)]
        + [f"uE_{i}" for i in range(k)]
        + [f"zP_{i}" for i in range(p)]
        + [f"zE_{i}" for i in range(q)]
    )
    rows = []
    blank = [""] * (m + k + p + q)
    for e in range(N):
        for t in range(T1):
            row = [e, t] + list(tr.X[e, t]) + list(tr.XP[e, t]) + list(tr.XE[e, t])
            if t < T1 - 1:
                row += list(tr.UP[e, t]) + list(tr.UE[e, t]) + list(tr.ZP[e, t]) + list(tr.ZE[e, t])
            else:
                row += blank
            rows.append(row)
    return header, rows


def series_table(series: dict[str, np.ndarray], mode: str) -> tuple[list[str], list[list]]:
    keys = list(series)
    T1 = series["t"].size
    rows = [[mode, int(series["t"][t])] + [float(series[k][t]) for k in keys[1:]] for t in range(T1)]
    return ["mode", "t"] + keys[1:], rows


def checks_table(rows) -> tuple[list[str], list[list]]:
    header = ["mode", "seed", "t", "lhs", "rhs", "residual", "predicted_discrepancy", "pass"]
    return header, [[r.mode, r.seed, r.t, r.lhs, r.rhs, r.residual, r.predicted_discrepancy, r.passed] for r in rows]
