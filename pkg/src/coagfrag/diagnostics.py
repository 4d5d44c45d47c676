"""Moment series, conservation ledgers, run manifests and a-priori estimate checks.

Tables are written as CSV with ``repr`` formatting, so reading a file back
reproduces every float bit for bit.  Structured reports are JSON.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

DSMC_COLUMNS = ("t", "N", "M", "Px", "Py", "Pz", "Ekin", "Eint", "Etot", "Mx2")
HOMO_COLUMNS = ("t", "N", "M", "Ls", "D1", "D2", "overflow_mass")
LEDGER_COLUMNS = (
    "t",
    "step",
    "coag_candidates",
    "coag_events",
    "frag_events",
    "frag_skips",
    "frag_accept_rate",
    "max_res_mass",
    "max_res_momentum",
    "max_res_energy",
    "drift_mass",
    "drift_momentum",
    "drift_energy",
    "particles",
    "doublings",
)


class Table:
    """Fixed-column numeric table with exact CSV round-trip."""

    columns: tuple = ()

    def __init__(self, columns=None, rows=None):
        if columns is not None:
            self.columns = tuple(columns)
        self.rows: list[tuple] = []
        for r in rows or ():
            self.append(r)

    def append(self, row) -> None:
        if isinstance(row, dict):
            row = tuple(row[c] for c in self.columns)
        row = tuple(float(v) for v in row)
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} values, table has {len(self.columns)} columns")
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def last(self) -> dict:
        return dict(zip(self.columns, self.rows[-1]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([repr(v) for v in r])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = tuple(next(rd))
            out = cls(columns=header)
            for r in rd:
                out.append([float(v) for v in r])
        return out

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "rows": [list(r) for r in self.rows]}

    def __eq__(self, other) -> bool:
        return isinstance(other, Table) and self.columns == other.columns and self.rows == other.rows


class MomentSeries(Table):
    """Time series of moments; ``t`` must be strictly increasing."""

    columns = DSMC_COLUMNS

    def append(self, row) -> None:
        super().append(row)
        if len(self.rows) > 1 and not self.rows[-1][0] > self.rows[-2][0]:
            t = self.rows.pop()[0]
            raise ValueError(f"times must increase strictly: {t} after {self.rows[-1][0]}")


class ConservationLedger(Table):
    columns = LEDGER_COLUMNS

    def append(self, row) -> None:
        super().append(row)
        r = dict(zip(self.columns, self.rows[-1]))
        if any(r[c] < 0 for c in self.columns if c.startswith(("max_res", "drift"))):
            self.rows.pop()
            raise ValueError("conservation residuals must be nonnegative")

    def max_residual(self) -> float:
        if not self.rows:
            return 0.0
        return float(max(self.column(c).max() for c in ("max_res_mass", "max_res_momentum", "max_res_energy")))

    def max_drift(self) -> float:
        if not self.rows:
            return 0.0
        return float(max(self.column(c).max() for c in ("drift_mass", "drift_momentum", "drift_energy")))

    def totals(self) -> dict:
        return {c: int(self.column(c).sum()) for c in ("coag_candidates", "coag_events", "frag_events", "frag_skips")}


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    version: str
    kernels: dict
    command: str = ""
    audit_report: str | None = None
    config: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @classmethod
    def build(cls, config: dict, seed: int, kernels: dict, command: str = "", **kw) -> "RunManifest":
        from . import __version__

        return cls(config_hash(config), int(seed), __version__, kernels, command, config=config, **kw)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True))


def read_json(path):
    return json.loads(Path(path).read_text())


# --- estimates ------------------------------------------------------------------


def gronwall_bound(N0: float, M0: float, E0: float, C: float, T: float) -> float:
    """``(N0 + C T (M0 + E0)) e^(C T) + M0 + E0``."""
    for name, v in (("N0", N0), ("M0", M0), ("E0", E0), ("C", C)):
        if not v >= 0:
            raise ValueError(f"{name} must be nonnegative, got {v}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    CT = C * T
    if CT > 700.0:
        return math.inf if N0 + M0 + E0 > 0 else 0.0
    return (N0 + CT * (M0 + E0)) * math.exp(CT) + M0 + E0


@dataclass
class EstimateReport:
    items: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(i["pass"] for i in self.items)

    def __getitem__(self, check: str) -> dict:
        for i in self.items:
            if i["check"] == check:
                return i
        raise KeyError(check)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "items": self.items}


def _conservation_item(name: str, values: np.ndarray, scale: float, tol: float) -> dict:
    dev = np.abs(values - values[0]) / scale if scale > 0 else np.abs(values - values[0])
    k = int(np.argmax(dev))
    return {"check": f"conservation_{name}", "pass": bool(dev[k] <= tol), "worst": float(dev[k]), "row": k, "tol": tol}


def check_estimates(
    series: Table,
    C: float | None = None,
    T: float | None = None,
    conservation_tol: float = 1e-9,
    slope_tol: float = 1e-6,
    pure_coagulation: bool = False,
    ls_tol: float = 1e-9,
    space_moment: bool = True,
) -> EstimateReport:
    """Itemized a-priori checks on a moment series.

    * total mass, momentum and energy stay at their initial values;
    * ``N(t) <= gronwall_bound(N0, M0, E0, C, T)`` when ``C`` is given;
    * the finite-difference slope of ``Mx2`` is at most
      ``2 sqrt(Mx2 * 2 Ekin)`` (larger endpoint value) plus ``slope_tol``;
    * ``Ls`` never exceeds its initial value in pure-coagulation runs.

    Cell-local merges of particles at different positions move mass across
    space, so particle runs with coagulation pass ``space_moment=False``.
    """
    if not len(series):
        raise ValueError("empty series")
    cols = series.columns
    rep = EstimateReport()
    if "M" in cols:
        M = series.column("M")
        rep.items.append(_conservation_item("mass", M, abs(M[0]), conservation_tol))
    if "Etot" in cols:
        E = series.column("Etot")
        rep.items.append(_conservation_item("energy", E, abs(E[0]), conservation_tol))
        if "Px" in cols:
            P = np.stack([series.column(c) for c in ("Px", "Py", "Pz")], axis=1)
            scale = math.sqrt(2.0 * abs(series.column("M")[0]) * abs(E[0]))
            dev = np.linalg.norm(P - P[0], axis=1) / (scale if scale > 0 else 1.0)
            k = int(np.argmax(dev))
            rep.items.append({"check": "conservation_momentum", "pass": bool(dev[k] <= conservation_tol),
                              "worst": float(dev[k]), "row": k, "tol": conservation_tol})
    if C is not None:
        N = series.column("N")
        t = series.column("t")
        T_ = float(T) if T is not None else float(t[-1])
        row0 = dict(zip(cols, series.rows[0]))
        E0 = row0.get("Etot", 0.0)
        bound = gronwall_bound(row0["N"], row0["M"], E0, C, T_) if T_ > 0 else row0["N"]
        k = int(np.argmax(N))
        rep.items.append({"check": "particle_bound", "pass": bool(np.all(N <= bound)), "bound": bound,
                          "worst": float(N[k]), "row": k, "C": float(C), "T": T_})
    if space_moment and "Mx2" in cols and "Ekin" in cols and len(series) > 1:
        t = series.column("t")
        X = series.column("Mx2")
        K = series.column("Ekin")
        slope = np.diff(X) / np.diff(t)
        lim = 2.0 * np.sqrt(np.maximum(X * 2.0 * K, 0.0))
        allowed = np.maximum(lim[1:], lim[:-1])
        excess = slope - allowed - slope_tol * np.maximum(1.0, allowed)
        k = int(np.argmax(excess))
        rep.items.append({"check": "space_moment_slope", "pass": bool(excess[k] <= 0), "worst": float(excess[k]), "row": k + 1})
    if pure_coagulation and "Ls" in cols:
        L = series.column("Ls")
        inc = (L - L[0]) / max(abs(L[0]), 1e-300)
        k = int(np.argmax(inc))
        rep.items.append({"check": "Ls_bounded", "pass": bool(inc[k] <= ls_tol), "worst": float(inc[k]), "row": k})
    return rep


def empirical_Ls(m, e, w, s: float, volume: float, m_edges, e_edges) -> dict:
    """Histogram estimate of ``int f^s`` on the ``(m, e)`` marginal.

    The empirical measure has no density, so the value depends on the
    binning and is labelled accordingly.
    """
    m_edges = np.asarray(m_edges, dtype=float)
    e_edges = np.asarray(e_edges, dtype=float)
    weights = np.broadcast_to(np.asarray(w, dtype=float), np.shape(m))
    H, _, _ = np.histogram2d(m, e, bins=(m_edges, e_edges), weights=weights)
    area = np.outer(np.diff(m_edges), np.diff(e_edges))
    dens = H / (area * volume)
    value = float(np.sum(dens**s * area) * volume)
    return {"value": value, "label": "estimator-dependent", "bins": [m_edges.size - 1, e_edges.size - 1], "s": s}


__all__ = [
    "ConservationLedger",
    "DSMC_COLUMNS",
    "EstimateReport",
    "HOMO_COLUMNS",
    "LEDGER_COLUMNS",
    "MomentSeries",
    "RunManifest",
    "Table",
    "check_estimates",
    "config_hash",
    "empirical_Ls",
    "gronwall_bound",
    "read_json",
    "write_json",
]
