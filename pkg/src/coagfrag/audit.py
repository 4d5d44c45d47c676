"""Numerical audit of the kernel hypotheses.

Each check returns :class:`AuditEntry` objects with a status ``pass``,
``fail`` or ``inconclusive``.  A failing entry always carries a witness: the
state(s) where the inequality breaks, with both sides evaluated, so it can
be replayed in isolation with :func:`replay_witness`.

Assumption ids
--------------
``sym_A``          ``A(y, y*) = A(y*, y)``
``sym_B``          ``B(y', y) = B(y', y' - y)`` on admissible pairs
``structure``      ``A(y, y*) <= A(y, y') + A(y*, y')`` with ``y' = y + y*``
``galkin``         ``A(y, y* - y) <= A(y, y*)`` for ``y < y*`` (informational)
``growth_A``       ``int_{Y_R} A(y, y*) / |y*| dy -> 0``
``growth_B``       ``int_{Y_R} B(y', y) / |y'| 1{y < y'} dy -> 0``
``truncation``     ``B = 0`` unless ``m' <= C0 m`` and ``K' <= C0 K``
``B1_bounded``     ``B_1`` locally bounded, ``B`` below its declared bound
``A_bounded``      ``A`` locally bounded, below its declared bound
``comparison``     ``int B^s / A(y, y')^(s-1) <= 1 + m' + K' + B_1^delta / 2``
``weight``         ``int int E^(-gamma) dx dy < infinity`` (informational)
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .kernels import B1, CoagKernel, KernelSuite
from .state_space import (
    States,
    admissible_arrays,
    coalesce_arrays,
    split_arrays,
    state_norm,
)
from .stochastics import (
    StreamKey,
    _block_sizes,
    _map_blocks,
    envelope_volume,
    integrate_box,
    mc_B1,
    sample_admissible_batch,
    uniform_box,
)

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
MANDATORY = (
    "sym_A",
    "sym_B",
    "structure",
    "growth_A",
    "growth_B",
    "truncation",
    "B1_bounded",
    "A_bounded",
    "comparison",
)


def _state_list(s: States, i: int) -> list[float]:
    return [float(s.m[i]), *map(float, s.p[i]), float(s.e[i])]


def _from_list(v) -> States:
    v = np.asarray(v, dtype=float).reshape(-1, 5)
    return States(v[:, 0], v[:, 1:4], v[:, 4])


@dataclass
class AuditEntry:
    assumption: str
    status: str
    witness: dict | None = None
    estimates: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    note: str = ""

    @property
    def mandatory(self) -> bool:
        return self.assumption in MANDATORY

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mandatory"] = self.mandatory
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AuditEntry":
        d = {k: v for k, v in d.items() if k != "mandatory"}
        return cls(**d)


@dataclass
class AuditReport:
    entries: list = field(default_factory=list)
    seed: int = 0
    suite: dict = field(default_factory=dict)

    def __getitem__(self, assumption: str) -> AuditEntry:
        for e in self.entries:
            if e.assumption == assumption:
                return e
        raise KeyError(assumption)

    def extend(self, entries) -> None:
        self.entries.extend(entries)

    @property
    def mandatory_failures(self) -> list:
        return [e for e in self.entries if e.mandatory and e.status == FAIL]

    @property
    def passed(self) -> bool:
        return not self.mandatory_failures

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "suite": self.suite,
            "passed": self.passed,
            "entries": [e.to_dict() for e in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=True)

    @classmethod
    def from_json(cls, text: str) -> "AuditReport":
        d = json.loads(text)
        return cls([AuditEntry.from_dict(e) for e in d["entries"]], d["seed"], d["suite"])


def _relative_gap(a, b):
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)
    return np.abs(a - b) / scale


# --- symmetries ---------------------------------------------------------------


def _admissible_pairs(rng, n: int, R: float):
    parents = uniform_box(rng, n, R)
    daughters = sample_admissible_batch(rng, parents)
    return parents, daughters


def check_symmetries(suite: KernelSuite, n: int = 100_000, key: StreamKey | None = None, R: float = 4.0, tol: float = 1e-9) -> list:
    key = key if key is not None else StreamKey(0, "audit-sym")
    out = []
    rng = key.lane(counter=0).generator()
    y, ys = uniform_box(rng, n, R), uniform_box(rng, n, R)
    a, b = suite.A(y, ys), suite.A(ys, y)
    gap = _relative_gap(a, b)
    bad = gap > tol
    params = {"samples": n, "R": R, "tol": tol}
    if np.any(bad):
        i = int(np.argmax(gap))
        w = {"y": _state_list(y, i), "y_star": _state_list(ys, i), "A(y,y*)": float(a[i]), "A(y*,y)": float(b[i])}
        out.append(AuditEntry("sym_A", FAIL, w, params=params))
    else:
        out.append(AuditEntry("sym_A", PASS, params=params, note=f"max relative gap {float(gap.max(initial=0)):.3g}"))

    rng = key.lane(counter=1).generator()
    nb = min(n, 20_000)
    yp, d = _admissible_pairs(rng, nb, R)
    other = split_arrays(yp, d, check=False)
    b1, b2 = suite.B(yp, d), suite.B(yp, other)
    gap = _relative_gap(b1, b2)
    params = {"samples": len(yp), "R": R, "tol": tol}
    if np.any(gap > tol):
        i = int(np.argmax(gap))
        w = {
            "y_prime": _state_list(yp, i),
            "y": _state_list(d, i),
            "y_star": _state_list(other, i),
            "B(y',y)": float(b1[i]),
            "B(y',y*)": float(b2[i]),
        }
        out.append(AuditEntry("sym_B", FAIL, w, params=params))
    else:
        out.append(AuditEntry("sym_B", PASS, params=params))
    return out


# --- structure (1.8) and monotonicity (1.9) -----------------------------------


def check_structure_vs_galkin(
    A: CoagKernel,
    n: int = 1_000_000,
    key: StreamKey | None = None,
    R: float = 4.0,
    probes=(),
    tol: float = 1e-12,
) -> list:
    """Independent checks of the structure inequality and the monotonicity condition.

    ``probes`` is a list of ``(y, y_star)`` pairs (5-vectors) with ``y < y_star``
    that are evaluated for the monotonicity condition before random sampling;
    a violated probe is reported as the witness.
    """
    key = key if key is not None else StreamKey(0, "audit-structure")
    sizes = _block_sizes(n)

    def block(k):
        rng = k.generator()
        size = sizes[k.counter - key.counter]
        y, ys = uniform_box(rng, size, R), uniform_box(rng, size, R)
        yp = coalesce_arrays(y, ys)
        lhs = A(y, ys)
        rhs = A(y, yp) + A(ys, yp)
        excess = (lhs - rhs) / np.maximum(np.abs(rhs), 1e-300)
        i = int(np.argmax(excess))
        return float(excess[i]), {
            "y": _state_list(y, i),
            "y_star": _state_list(ys, i),
            "y_prime": _state_list(yp, i),
            "lhs": float(lhs[i]),
            "rhs": float(rhs[i]),
        }

    res = _map_blocks(block, [key.lane(counter=key.counter + i) for i in range(len(sizes))], 1)
    worst, wit = max(res, key=lambda r: r[0])
    params = {"samples": n, "R": R, "tol": tol}
    out = []
    if worst > tol:
        out.append(AuditEntry("structure", FAIL, wit, params=params))
    else:
        out.append(AuditEntry("structure", PASS, params=params, note=f"max relative excess {worst:.3g}"))

    # monotonicity: y < y*, compare A(y, y* - y) with A(y, y*)
    witness = None
    for y_l, ys_l in probes:
        y, ys = _from_list(y_l), _from_list(ys_l)
        if not admissible_arrays(y, ys)[0]:
            raise ValueError(f"monotonicity probe {y_l} is not < {ys_l}")
        rest = split_arrays(ys, y)
        lhs, rhs = float(A(y, rest)[0]), float(A(y, ys)[0])
        if lhs > rhs * (1 + tol):
            witness = {"y": list(map(float, y_l)), "y_star": list(map(float, ys_l)),
                       "y_star_minus_y": _state_list(rest, 0), "lhs": lhs, "rhs": rhs, "source": "probe"}
            break
    ng = min(n, 100_000)
    rng = key.lane(counter=len(sizes)).generator()
    ys, y = _admissible_pairs(rng, ng, R)
    rest = split_arrays(ys, y, check=False)
    lhs, rhs = A(y, rest), A(y, ys)
    excess = (lhs - rhs) / np.maximum(np.abs(rhs), 1e-300)
    if witness is None and np.any(excess > tol):
        i = int(np.argmax(excess))
        witness = {"y": _state_list(y, i), "y_star": _state_list(ys, i), "y_star_minus_y": _state_list(rest, i),
                   "lhs": float(lhs[i]), "rhs": float(rhs[i]), "source": "sample"}
    params = {"samples": len(ys), "R": R, "probes": len(probes), "tol": tol}
    out.append(AuditEntry("galkin", FAIL if witness else PASS, witness, params=params))
    return out


# --- growth -------------------------------------------------------------------


def _directions(r: float) -> list[tuple[float, tuple, float]]:
    # states of max-norm r along the mass, momentum, energy axes and the diagonal
    return [(r, (0.0, 0.0, 0.0), 1.0), (1.0, (r, 0.0, 0.0), 1.0), (1.0, (0.0, 0.0, 0.0), r), (r, (r, 0.0, 0.0), r)]


def _trend(vals, ses, tol: float) -> tuple[str, str]:
    vals = np.asarray(vals)
    ses = np.asarray(ses)
    slack = 3.0 * (ses[1:] + ses[:-1])
    decreasing = bool(np.all(vals[1:] <= vals[:-1] + slack))
    if decreasing and vals[-1] <= tol:
        return PASS, "pass (finite evidence)"
    if not decreasing:
        return FAIL, "sequence increases beyond error bars"
    return INCONCLUSIVE, f"decreasing but last value {vals[-1]:.3g} above tolerance {tol:g}"


def check_growth(
    suite: KernelSuite,
    R: float = 1.0,
    radii=(10.0, 100.0, 1000.0, 10000.0),
    n: int = 10_000,
    key: StreamKey | None = None,
    tol: float = 0.05,
) -> list:
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii[:-1], radii[1:])):
        raise ValueError("radii must be strictly increasing")
    key = key if key is not None else StreamKey(0, "audit-growth")
    out = []
    for name, kern in (("growth_A", suite.A), ("growth_B", suite.B)):
        if kern.is_zero:
            out.append(AuditEntry(name, PASS, estimates=[{"radius": r, "value": 0.0, "std_error": 0.0} for r in radii],
                                  params={"R": R, "radii": radii, "samples": 0}, note="zero kernel"))
            continue
        ests = []
        for i, r in enumerate(radii):
            best = None
            for j, (m, p, e) in enumerate(_directions(r)):
                far = States(np.array([m]), np.array([p]), np.array([e]))
                norm = float(state_norm(far)[0])
                if name == "growth_A":
                    g = lambda y, far=far, norm=norm, kern=kern: kern(y, States(
                        np.full(len(y), far.m[0]), np.broadcast_to(far.p, y.p.shape), np.full(len(y), far.e[0]))) / norm
                else:
                    def g(y, far=far, norm=norm, kern=kern):
                        yp = States(np.full(len(y), far.m[0]), np.broadcast_to(far.p, y.p.shape).copy(), np.full(len(y), far.e[0]))
                        ok = admissible_arrays(y, yp)
                        vals = np.zeros(len(y))
                        if ok.any():
                            sel = np.flatnonzero(ok)
                            vals[sel] = kern(yp.take(sel), y.take(sel))
                        return vals / norm
                est = integrate_box(g, R, n, key.lane(step=i, cell=j if name == "growth_A" else 100 + j))
                if best is None or est.value > best[1].value:
                    best = (far, est)
            ests.append({"radius": r, "direction": _state_list(best[0], 0), **best[1].to_dict()})
        status, note = _trend([e["value"] for e in ests], [e["std_error"] for e in ests], tol)
        witness = None
        if status == FAIL:
            k = int(np.argmax(np.diff([e["value"] for e in ests]))) + 1
            witness = {"radius": radii[k], "value": ests[k]["value"], "previous": ests[k - 1]["value"]}
        out.append(AuditEntry(name, status, witness, ests, {"R": R, "radii": radii, "samples": n, "tol": tol}, note))
    return out


# --- truncation and local bounds ------------------------------------------------


def check_truncation_and_local_bounds(
    suite: KernelSuite, n: int = 100_000, key: StreamKey | None = None, R: float = 4.0
) -> list:
    key = key if key is not None else StreamKey(0, "audit-bounds")
    A, B = suite.A, suite.B
    out = []
    rng = key.lane(counter=0).generator()
    yp, y = _admissible_pairs(rng, min(n, 50_000), R)
    vals = B(yp, y)
    Kp = yp.e + np.einsum("ij,ij->i", yp.p, yp.p) / (2 * yp.m)
    K = y.e + np.einsum("ij,ij->i", y.p, y.p) / (2 * y.m)
    ratio = np.maximum(yp.m / y.m, Kp / K)
    params = {"samples": len(yp), "R": R}

    if B.is_zero:
        out.append(AuditEntry("truncation", PASS, params=params, note="zero kernel"))
    elif B.C0 is None:
        pos = vals > 0
        i = int(np.flatnonzero(pos)[np.argmax(ratio[pos])])
        w = {"y_prime": _state_list(yp, i), "y": _state_list(y, i), "B": float(vals[i]), "ratio": float(ratio[i])}
        out.append(AuditEntry("truncation", FAIL, w, params=params,
                              note="no truncation constant declared; B > 0 at daughters of arbitrarily small relative size"))
    else:
        C0 = B.C0
        outside = ratio > C0
        # a deterministic probe with m' = 3 C0 m
        probe_p = States(np.array([3.0 * C0]), np.zeros((1, 3)), np.array([3.0]))
        probe_d = States(np.array([1.0]), np.zeros((1, 3)), np.array([1.0]))
        pv = float(B(probe_p, probe_d)[0])
        bad = outside & (vals != 0)
        if pv != 0:
            w = {"y_prime": _state_list(probe_p, 0), "y": _state_list(probe_d, 0), "B": pv, "C0": C0}
            out.append(AuditEntry("truncation", FAIL, w, params=params))
        elif np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            w = {"y_prime": _state_list(yp, i), "y": _state_list(y, i), "B": float(vals[i]), "ratio": float(ratio[i]), "C0": C0}
            out.append(AuditEntry("truncation", FAIL, w, params=params))
        else:
            out.append(AuditEntry("truncation", PASS, params={**params, "outside_support": int(outside.sum())}))

    # B below its declared bound, and B_1 finite on Y_R
    bound = np.broadcast_to(np.asarray(B.local_sup_B(yp), dtype=float), vals.shape)
    over = vals > bound * (1 + 1e-12)
    if np.any(over):
        i = int(np.argmax(vals - bound))
        w = {"y_prime": _state_list(yp, i), "y": _state_list(y, i), "B": float(vals[i]), "local_sup_B": float(bound[i])}
        out.append(AuditEntry("B1_bounded", FAIL, w, params=params, note="declared local bound exceeded"))
    elif not np.all(np.isfinite(bound)):
        out.append(AuditEntry("B1_bounded", INCONCLUSIVE, params=params, note="no finite local bound declared"))
    else:
        corner = States(np.array([R]), np.array([[R, 0.0, 0.0]]), np.array([R]))
        env = float(np.max(B.local_sup_B(corner)) * envelope_volume(corner)[0])
        out.append(AuditEntry("B1_bounded", PASS, params=params, estimates=[{"B1_envelope_bound": env}]))

    # A on Y_R x Y_R
    rng = key.lane(counter=1).generator()
    y1, y2 = uniform_box(rng, n, R), uniform_box(rng, n, R)
    av = A(y1, y2)
    declared = float(A.local_sup(R))
    i = int(np.argmax(av))
    params = {"samples": n, "R": R, "declared": declared, "observed_max": float(av[i])}
    w = {"y": _state_list(y1, i), "y_star": _state_list(y2, i), "A": float(av[i]), "local_sup": declared}
    if not math.isfinite(declared):
        out.append(AuditEntry("A_bounded", FAIL, w, params=params, note="kernel declares no finite bound on Y_R x Y_R"))
    elif av[i] > declared * (1 + 1e-12):
        out.append(AuditEntry("A_bounded", FAIL, w, params=params, note="declared local bound exceeded"))
    else:
        out.append(AuditEntry("A_bounded", PASS, params=params))
    return out


# --- comparison (1.13) ---------------------------------------------------------


def comparison_lhs(suite: KernelSuite, y_prime: States, n: int, key: StreamKey, witnesses: list | None = None):
    """Monte-Carlo estimate of ``int B(y', y)^s / A(y, y')^(s-1) 1{y < y'} dy``."""
    s = suite.s

    def integrand(par, y):
        b = suite.B(par, y)
        a = suite.A(y, par)
        ill = (a <= 0) & (b > 0)
        if witnesses is not None and ill.any():
            i = int(np.flatnonzero(ill)[0])
            witnesses.append({"y_prime": _state_list(par, i), "y": _state_list(y, i), "A": float(a[i]), "B": float(b[i])})
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(b > 0, b**s / a ** (s - 1.0), 0.0)

    return mc_B1(integrand, y_prime, n, key)


def check_comparison(suite: KernelSuite, states, n: int = 10_000, key: StreamKey | None = None, b1_budget: int = 20_000) -> list:
    """Probe-state check of the comparison inequality, pass iff ``estimate + 3 se <= rhs``."""
    key = key if key is not None else StreamKey(0, "audit-comparison")
    ests = []
    witness = None
    if suite.B.is_zero:
        return [AuditEntry("comparison", PASS, params={"probes": len(states), "samples": 0}, note="zero fragmentation")]
    for i, y_l in enumerate(states):
        yp = _from_list(y_l)
        ill: list = []
        lhs = comparison_lhs(suite, yp, n, key.lane(cell=i), ill)
        b1 = B1(suite.B, yp, b1_budget, key.lane(cell=i, counter=1_000_000))
        Kp = float(yp.e[0] + np.dot(yp.p[0], yp.p[0]) / (2 * yp.m[0]))
        rhs = 1.0 + float(yp.m[0]) + Kp + 0.5 * b1.value**suite.delta
        row = {"y_prime": list(map(float, y_l)), "lhs": lhs.value, "lhs_std_error": lhs.std_error,
               "rhs": rhs, "B1": b1.value, "margin": rhs - lhs.value - 3 * lhs.std_error}
        ests.append(row)
        if witness is None and ill:
            witness = {**ill[0], "reason": "A = 0 where B > 0: left side undefined"}
        elif witness is None and row["margin"] < 0:
            witness = {"y_prime": row["y_prime"], "lhs": lhs.value, "lhs_std_error": lhs.std_error, "rhs": rhs}
    status = FAIL if witness else PASS
    return [AuditEntry("comparison", status, witness, ests, {"probes": len(states), "samples": n, "s": suite.s, "delta": suite.delta})]


# --- weight integrability --------------------------------------------------------


def default_weight(x, m, p, e):
    """``E(x, y) = 1 + m + |p|^2 / 2m + e + m |x|^2``."""
    return 1.0 + m + np.einsum("ij,ij->i", p, p) / (2 * m) + e + m * np.einsum("ij,ij->i", x, x)


_NU = 3.0
_T_CONST = math.gamma((_NU + 3) / 2) / (math.gamma(_NU / 2) * (_NU * math.pi) ** 1.5)


def _mvt(rng, n, scale):
    z = rng.standard_normal((n, 3)) / np.sqrt(rng.chisquare(_NU, n) / _NU)[:, None]
    v = z * scale[:, None]
    dens = _T_CONST / scale**3 * (1 + np.einsum("ij,ij->i", z, z) / _NU) ** (-(_NU + 3) / 2)
    return v, dens


def weight_integrals(
    gamma: float,
    radii,
    n: int = 1_000_000,
    key: StreamKey | None = None,
    weight: Callable | None = None,
    integrand: Callable | None = None,
    workers: int = 1,
) -> list:
    """Importance-sampled ``int int E^(-gamma)`` over ``|x|, |p|, m, e <= rho`` for each ``rho``.

    ``m`` and ``e`` are drawn from ``(1+u)^(-5/4)/4``; then ``p`` and ``x`` from
    3-d Student-t laws scaled to the widths of the integrand in those
    variables.  One sample set serves every radius.
    """
    key = key if key is not None else StreamKey(0, "audit-weight")
    weight = weight or default_weight
    if integrand is None:
        integrand = lambda E: E ** (-gamma)
    radii = np.asarray(radii, dtype=float)
    sizes = _block_sizes(n)

    def block(k):
        rng = k.generator()
        size = sizes[k.counter - key.counter]
        u = rng.random((size, 2))
        me = (1.0 - u) ** -4.0 - 1.0
        m, e = me[:, 0], me[:, 1]
        q_me = 0.25 * (1 + m) ** -1.25 * 0.25 * (1 + e) ** -1.25
        p, qp = _mvt(rng, size, np.sqrt(2 * m * (1 + m + e)))
        kin = np.einsum("ij,ij->i", p, p) / (2 * m)
        x, qx = _mvt(rng, size, np.sqrt((1 + m + kin + e) / m))
        with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
            vals = np.asarray(integrand(weight(x, m, p, e)), dtype=float) * np.broadcast_to(1.0, (size,))
            w = np.where(q_me * qp * qx > 0, vals / (q_me * qp * qx), 0.0)
        w = np.nan_to_num(w, nan=0.0, posinf=0.0)
        big = np.maximum(np.maximum(m, e), np.maximum(np.linalg.norm(p, axis=1), np.linalg.norm(x, axis=1)))
        inside = big[None, :] <= radii[:, None]
        ww = np.where(inside, w[None, :], 0.0)
        return ww.sum(axis=1), (ww**2).sum(axis=1)

    res = _map_blocks(block, [key.lane(counter=key.counter + i) for i in range(len(sizes))], workers)
    S = np.sum([r[0] for r in res], axis=0)
    SS = np.sum([r[1] for r in res], axis=0)
    mean = S / n
    se = np.sqrt(np.maximum(SS / n - mean**2, 0.0) / (n - 1))
    return [{"radius": float(r), "value": float(v), "std_error": float(s)} for r, v, s in zip(radii, mean, se)]


def check_weight_integrability(
    gamma: float = 5.5,
    radii=(8.0, 16.0, 32.0, 64.0),
    n: int = 1_000_000,
    key: StreamKey | None = None,
    weight: Callable | None = None,
    integrand: Callable | None = None,
    threshold: float = 0.02,
) -> list:
    """Nested-truncation saturation test; pass iff the last doubling changes the value by < ``threshold``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    ests = weight_integrals(gamma, radii, n, key, weight, integrand)
    v = [e["value"] for e in ests]
    if v[-1] == 0 and v[-2] == 0:
        change = 0.0
    else:
        change = abs(v[-1] - v[-2]) / max(abs(v[-1]), 1e-300)
    saturated = change < threshold
    params = {"gamma": gamma, "radii": list(map(float, radii)), "samples": n, "threshold": threshold,
              "last_relative_change": change, "saturated": saturated}
    if gamma <= 5:
        return [AuditEntry("weight", INCONCLUSIVE, estimates=ests, params=params, note="no claim for gamma <= 5")]
    if saturated:
        return [AuditEntry("weight", PASS, estimates=ests, params=params, note="pass (finite evidence)")]
    return [AuditEntry("weight", INCONCLUSIVE, estimates=ests, params=params,
                       note=f"not saturated: last doubling changes the value by {100 * change:.2f}%")]


# --- driver -------------------------------------------------------------------------


@dataclass
class AuditConfig:
    R: float = 4.0
    growth_R: float = 1.0
    radii: tuple = (10.0, 100.0, 1000.0, 10000.0)
    samples: int = 100_000
    quad_samples: int = 10_000
    gamma: float = 5.5
    weight_radii: tuple = (8.0, 16.0, 32.0, 64.0)
    weight_samples: int = 1_000_000
    comparison_states: tuple = ((1.0, 0.0, 0.0, 0.0, 1.0), (2.0, 0.0, 0.0, 0.0, 3.0), (3.0, 1.0, 0.0, 0.0, 2.0))
    galkin_probes: tuple = ()


def run_audit(suite: KernelSuite, config: AuditConfig | None = None, seed: int = 0, include_weight: bool = True) -> AuditReport:
    config = config or AuditConfig()
    key = StreamKey(seed, "audit")
    rep = AuditReport(seed=seed, suite={
        "A": suite.A.name, "A_params": suite.A.params, "B": suite.B.name, "B_params": suite.B.params,
        "s": suite.s, "delta": suite.delta,
    })
    rep.extend(check_symmetries(suite, config.samples, key.lane(phase="sym"), config.R))
    rep.extend(check_structure_vs_galkin(suite.A, config.samples, key.lane(phase="structure"), config.R, config.galkin_probes))
    rep.extend(check_growth(suite, config.growth_R, config.radii, config.quad_samples, key.lane(phase="growth")))
    rep.extend(check_truncation_and_local_bounds(suite, config.samples, key.lane(phase="bounds"), config.R))
    rep.extend(check_comparison(suite, config.comparison_states, config.quad_samples, key.lane(phase="comparison")))
    if include_weight:
        rep.extend(check_weight_integrability(config.gamma, config.weight_radii, config.weight_samples, key.lane(phase="weight")))
    return rep


def replay_witness(entry: AuditEntry, suite: KernelSuite) -> bool:
    """Re-evaluate a pointwise witness; True iff it still shows a violation."""
    w = entry.witness
    if w is None:
        return False
    a = entry.assumption
    if a == "sym_A":
        y, ys = _from_list(w["y"]), _from_list(w["y_star"])
        return bool(_relative_gap(suite.A(y, ys), suite.A(ys, y))[0] > entry.params.get("tol", 1e-9))
    if a == "sym_B":
        yp, y = _from_list(w["y_prime"]), _from_list(w["y"])
        return bool(_relative_gap(suite.B(yp, y), suite.B(yp, split_arrays(yp, y)))[0] > entry.params.get("tol", 1e-9))
    if a == "structure":
        y, ys = _from_list(w["y"]), _from_list(w["y_star"])
        yp = coalesce_arrays(y, ys)
        return bool(suite.A(y, ys)[0] > (suite.A(y, yp) + suite.A(ys, yp))[0])
    if a == "galkin":
        y, ys = _from_list(w["y"]), _from_list(w["y_star"])
        return bool(suite.A(y, split_arrays(ys, y))[0] > suite.A(y, ys)[0])
    if a == "truncation":
        yp, y = _from_list(w["y_prime"]), _from_list(w["y"])
        return bool(suite.B(yp, y)[0] != 0)
    if a == "B1_bounded":
        yp, y = _from_list(w["y_prime"]), _from_list(w["y"])
        return bool(suite.B(yp, y)[0] > float(np.max(suite.B.local_sup_B(yp))))
    if a == "A_bounded":
        y, ys = _from_list(w["y"]), _from_list(w["y_star"])
        return bool(suite.A(y, ys)[0] > suite.A.local_sup(entry.params["R"]))
    if a == "comparison":
        if "A" in w:
            return bool(w["A"] <= 0 < w["B"])
        return w["lhs"] > w["rhs"]
    if a == "growth_A" or a == "growth_B":
        return w["value"] > w["previous"]
    raise ValueError(f"no replay rule for {a!r}")


__all__ = [
    "AuditConfig",
    "AuditEntry",
    "AuditReport",
    "FAIL",
    "INCONCLUSIVE",
    "MANDATORY",
    "PASS",
    "check_comparison",
    "check_growth",
    "check_structure_vs_galkin",
    "check_symmetries",
    "check_truncation_and_local_bounds",
    "check_weight_integrability",
    "comparison_lhs",
    "default_weight",
    "replay_witness",
    "run_audit",
    "weight_integrals",
]
