"""Stochastic particle simulation of the full kinetic model.

Simulation particles carry a common weight ``w`` (physical particles per
simulation particle), a position in the periodic box ``[0, L)^3`` and a state
``y = (m, p, e)``.  Positions are stored unwrapped so space moments can be
followed across the periodic boundary; cells use the wrapped coordinates.

One step is operator splitting: free transport, then in each cell an
event-driven majorant (Marcus-Lushnikov) coagulation step, then independent
fragmentation of every particle with probability ``1 - exp(-B_1 dt / 2)``.
Every event goes through the exact kinematics of :mod:`state_space`, and its
conservation residuals are logged.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import (
    ConservationLedger,
    MomentSeries,
    check_estimates,
    gronwall_bound,
)
from .kernels import B1Cache, KernelSuite, gronwall_constant, particle_B1
from .state_space import (
    States,
    admissible_arrays,
    coalesce_arrays,
    split_arrays,
    state_norm,
)
from .stochastics import (
    AcceptanceStats,
    KernelContractError,
    SamplingError,
    StreamKey,
    sample_daughters,
)


class RateConstraintError(RuntimeError):
    """``dt`` times the majorant event rate per particle exceeds the configured limit."""


@dataclass
class Ensemble:
    xu: np.ndarray
    m: np.ndarray
    p: np.ndarray
    e: np.ndarray
    w: float
    L: float = 1.0
    cells: int = 1

    def __post_init__(self):
        self.xu = np.asarray(self.xu, dtype=float).reshape(-1, 3)
        self.m = np.asarray(self.m, dtype=float)
        self.p = np.asarray(self.p, dtype=float).reshape(-1, 3)
        self.e = np.asarray(self.e, dtype=float)
        n = self.m.size
        if n == 0:
            raise ValueError("empty ensemble")
        if not (self.xu.shape[0] == n and self.p.shape[0] == n and self.e.size == n):
            raise ValueError("ensemble arrays have inconsistent lengths")
        if not self.w > 0:
            raise ValueError("particle weight must be positive")
        if not (self.L > 0 and self.cells >= 1):
            raise ValueError("box edge must be positive and the cell count at least 1")
        if np.any(self.m <= 0) or np.any(self.e <= 0):
            raise ValueError("all particles need m > 0 and e > 0")

    def __len__(self) -> int:
        return self.m.size

    @property
    def x(self) -> np.ndarray:
        return np.mod(self.xu, self.L)

    @property
    def states(self) -> States:
        return States(self.m, self.p, self.e)

    @property
    def cell_volume(self) -> float:
        return (self.L / self.cells) ** 3

    def cell_index(self) -> np.ndarray:
        c = np.floor(self.x / (self.L / self.cells)).astype(np.int64)
        c = np.clip(c, 0, self.cells - 1)
        return (c[:, 0] * self.cells + c[:, 1]) * self.cells + c[:, 2]

    def take(self, idx) -> "Ensemble":
        return Ensemble(self.xu[idx], self.m[idx], self.p[idx], self.e[idx], self.w, self.L, self.cells)

    def totals(self) -> dict:
        w = self.w
        kin = np.einsum("ij,ij->i", self.p, self.p) / (2.0 * self.m)
        P = w * self.p.sum(axis=0)
        Ekin = w * float(kin.sum())
        Eint = w * float(self.e.sum())
        return {
            "N": w * len(self),
            "M": w * float(self.m.sum()),
            "Px": float(P[0]),
            "Py": float(P[1]),
            "Pz": float(P[2]),
            "Ekin": Ekin,
            "Eint": Eint,
            "Etot": w * float((kin + self.e).sum()),
            "Mx2": w * float(np.dot(self.m, np.einsum("ij,ij->i", self.xu, self.xu))),
        }

    def second_moment(self) -> float:
        return self.totals()["Mx2"]


# --- initial data -----------------------------------------------------------------


def _positions(rng, n, L):
    return L * rng.random((n, 3))


def sample_monodisperse(rng, n: int, L: float = 1.0, m: float = 1.0, e: float = 1.0, p=(0.0, 0.0, 0.0)):
    return _positions(rng, n, L), np.full(n, float(m)), np.tile(np.asarray(p, dtype=float), (n, 1)), np.full(n, float(e))


def sample_beam(rng, n: int, L: float = 1.0, m: float = 1.0, e: float = 1.0, speed: float = 1.0):
    """Two counter-streaming halves with momenta ``+-(speed m, 0, 0)``."""
    if n % 2:
        raise ValueError("beam sampler needs an even particle count")
    p = np.zeros((n, 3))
    p[: n // 2, 0] = speed * m
    p[n // 2:, 0] = -speed * m
    return _positions(rng, n, L), np.full(n, float(m)), p, np.full(n, float(e))


def sample_product(rng, n: int, L: float = 1.0, shape: float = 3.0, scale: float = 0.5, sigma: float = 0.5, e_mean: float = 1.0):
    """``m ~ Gamma(shape, scale)``, ``p ~ N(0, sigma^2 I)``, ``e ~ Exp(e_mean)``, independent."""
    m = rng.gamma(shape, scale, n)
    p = sigma * rng.standard_normal((n, 3))
    e = rng.exponential(e_mean, n)
    e = np.where(e > 0, e, e_mean)
    return _positions(rng, n, L), m, p, e


def product_moments(shape: float = 3.0, scale: float = 0.5, sigma: float = 0.5, e_mean: float = 1.0) -> dict:
    """Per-particle means of ``m``, ``|p|^2/2m`` and ``e`` under :func:`sample_product`."""
    if not shape > 1:
        raise ValueError("kinetic energy mean needs shape > 1")
    return {"m": shape * scale, "kin": 1.5 * sigma**2 / (scale * (shape - 1.0)), "e": e_mean}


SAMPLERS = {"monodisperse": sample_monodisperse, "beam": sample_beam, "product": sample_product}


def init(sampler, n: int, N_phys: float = 1.0, L: float = 1.0, cells: int = 1, key: StreamKey | None = None, **params) -> Ensemble:
    """Equal-weight ensemble of ``n`` simulation particles standing for ``N_phys`` physical ones."""
    if n < 1:
        raise ValueError("empty ensemble")
    if isinstance(sampler, str):
        try:
            sampler = SAMPLERS[sampler]
        except KeyError:
            raise KeyError(f"unknown sampler {sampler!r}; known: {sorted(SAMPLERS)}") from None
    key = key if key is not None else StreamKey(0, "init")
    x, m, p, e = sampler(key.generator(), n, L, **params)
    return Ensemble(x, m, p, e, N_phys / n, L, cells)


def initial_report(ens: Ensemble) -> dict:
    """Data of the initial condition: ``N0, M0, P0, E0`` and the second space moment."""
    t = ens.totals()
    return {"N0": t["N"], "M0": t["M"], "P0": [t["Px"], t["Py"], t["Pz"]], "E0": t["Etot"], "Mx2": t["Mx2"]}


# --- transport --------------------------------------------------------------------


def transport_step(ens: Ensemble, dt: float) -> Ensemble:
    """Free flight ``x += dt p / m``; states untouched."""
    if dt == 0:
        return ens
    xu = ens.xu + dt * ens.p / ens.m[:, None]
    return Ensemble(xu, ens.m, ens.p, ens.e, ens.w, ens.L, ens.cells)


# --- per-event bookkeeping --------------------------------------------------------------


def _kin(m, p):
    return np.einsum("...i,...i->...", p, p) / (2.0 * m)


def _residuals(before_m, before_p, before_E, after_m, after_p, after_E):
    """Relative mass, momentum and energy residuals of individual events."""
    rm = np.abs(after_m - before_m) / before_m
    scale_p = np.sqrt(2.0 * before_m * before_E)
    rp = np.linalg.norm(after_p - before_p, axis=-1) / scale_p
    rE = np.abs(after_E - before_E) / before_E
    return rm, rp, rE


@dataclass
class StepLog:
    coag_candidates: int = 0
    coag_events: int = 0
    frag_events: int = 0
    frag_skips: int = 0
    frag_proposed: int = 0
    frag_accepted: int = 0
    max_res: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def absorb(self, other: "StepLog") -> None:
        self.coag_candidates += other.coag_candidates
        self.coag_events += other.coag_events
        self.frag_events += other.frag_events
        self.frag_skips += other.frag_skips
        self.frag_proposed += other.frag_proposed
        self.frag_accepted += other.frag_accepted
        self.max_res = np.maximum(self.max_res, other.max_res)


# --- coagulation ---------------------------------------------------------------------


def _majorant(A, norm_max: float) -> float:
    R = norm_max * (1.0 + 1e-12)
    bound = float(A.local_sup(R))
    if not math.isfinite(bound):
        raise ValueError(f"coagulation kernel {A.name!r} declares no finite local bound; no majorant available")
    return bound


def _min_image(d, L):
    return d - L * np.round(d / L)


def coag_cell(xu, m, p, e, w: float, V: float, L: float, A, dt: float, rng: np.random.Generator):
    """Event-driven majorant coagulation in one cell over ``dt``.

    Candidates arrive at rate ``w A_hat k (k-1) / (2 V)`` for ``k`` particles;
    a uniformly chosen pair is merged with probability ``A / A_hat``.  ``A_hat``
    is refreshed after each merge.
    """
    xu, m, p, e = xu.copy(), m.copy(), p.copy(), e.copy()
    log = StepLog()
    k = m.size
    if k < 2 or A.is_zero:
        return (xu, m, p, e), log
    norm_max = float(state_norm(States(m, p, e)).max())
    Ahat = _majorant(A, norm_max)
    t = 0.0
    while k >= 2 and Ahat > 0:
        lam = w * Ahat * k * (k - 1) / (2.0 * V)
        t += rng.exponential(1.0 / lam)
        if t > dt:
            break
        i = int(rng.integers(k))
        j = int(rng.integers(k - 1))
        j += j >= i
        yi = States(m[i:i + 1], p[i:i + 1], e[i:i + 1])
        yj = States(m[j:j + 1], p[j:j + 1], e[j:j + 1])
        a = float(A(yi, yj)[0])
        log.coag_candidates += 1
        if a > Ahat * (1.0 + 1e-12):
            raise KernelContractError(
                "coagulation kernel exceeded its cell majorant",
                {"y": [float(m[i]), *p[i], float(e[i])], "y_star": [float(m[j]), *p[j], float(e[j])], "A": a, "majorant": Ahat},
            )
        if rng.random() * Ahat >= a:
            continue
        child = coalesce_arrays(yi, yj)
        Eb = _kin(m[i], p[i]) + e[i] + _kin(m[j], p[j]) + e[j]
        Ea = float(_kin(child.m, child.p)[0] + child.e[0])
        res = _residuals(m[i] + m[j], p[i] + p[j], Eb, child.m[0], child.p[0], Ea)
        log.max_res = np.maximum(log.max_res, np.array([float(r) for r in res]))
        d = _min_image(xu[j] - xu[i], L)
        xu[i] = xu[i] + (m[j] / child.m[0]) * d
        m[i], p[i], e[i] = child.m[0], child.p[0], child.e[0]
        last = k - 1
        xu[j], m[j], p[j], e[j] = xu[last], m[last], p[last], e[last]
        k -= 1
        log.coag_events += 1
        nm = float(state_norm(States(m[i:i + 1], p[i:i + 1], e[i:i + 1]))[0])
        if nm > norm_max:
            norm_max = nm
            Ahat = _majorant(A, norm_max)
    return (xu[:k], m[:k], p[:k], e[:k]), log


# --- fragmentation -------------------------------------------------------------------------


def frag_probabilities(states: States, B, dt: float, cache=None) -> np.ndarray:
    """Per-particle break-up probability ``1 - exp(-B_1 dt / 2)`` over one step."""
    b1 = particle_B1(B, states, cache)
    return -np.expm1(-0.5 * b1 * dt)


def _sample_one_by_one(rng, parents: States, B, stats):
    ok = np.ones(len(parents), dtype=bool)
    out_m = np.empty(len(parents))
    out_p = np.empty((len(parents), 3))
    out_e = np.empty(len(parents))
    for i in range(len(parents)):
        try:
            d = sample_daughters(rng, parents.take([i]), B, stats)
        except SamplingError:
            ok[i] = False
            continue
        out_m[i], out_p[i], out_e[i] = d.m[0], d.p[0], d.e[0]
    return States(out_m, out_p, out_e), ok


def frag_cell(xu, m, p, e, B, dt: float, rng: np.random.Generator, cache=None):
    """Independent break-ups of the particles of one cell over ``dt``."""
    log = StepLog()
    if B.is_zero or m.size == 0:
        return (xu, m, p, e), log
    st = States(m, p, e)
    prob = frag_probabilities(st, B, dt, cache)
    u = rng.random(m.size)
    sel = np.flatnonzero(u < prob)
    if sel.size == 0:
        return (xu, m, p, e), log
    parents = st.take(sel)
    stats = AcceptanceStats()
    try:
        d = sample_daughters(rng, parents, B, stats)
        ok = np.ones(sel.size, dtype=bool)
    except SamplingError:
        d, ok = _sample_one_by_one(rng, parents, B, stats)
    log.frag_proposed, log.frag_accepted = stats.proposed, stats.accepted
    log.frag_skips = int((~ok).sum())
    sel, parents = sel[ok], parents.take(np.flatnonzero(ok))
    d = d.take(np.flatnonzero(ok))
    if sel.size == 0:
        return (xu, m, p, e), log
    if not np.all(admissible_arrays(d, parents)):
        raise SamplingError("sampler returned an inadmissible daughter")
    other = split_arrays(parents, d, check=False)
    if np.any(other.m <= 0) or np.any(other.e <= 0) or np.any(d.m <= 0) or np.any(d.e <= 0):
        raise SamplingError("break-up produced a daughter with m <= 0 or e <= 0")
    Eb = _kin(parents.m, parents.p) + parents.e
    Ea = _kin(d.m, d.p) + d.e + _kin(other.m, other.p) + other.e
    res = _residuals(parents.m, parents.p, Eb, d.m + other.m, d.p + other.p, Ea)
    log.max_res = np.array([float(r.max()) for r in res])
    log.frag_events = int(sel.size)
    m, p, e = m.copy(), p.copy(), e.copy()
    m[sel], p[sel], e[sel] = d.m, d.p, d.e
    return (
        np.concatenate([xu, xu[sel]]),
        np.concatenate([m, other.m]),
        np.concatenate([p, other.p]),
        np.concatenate([e, other.e]),
    ), log


# --- whole steps -----------------------------------------------------------------------


def _by_cell(ens: Ensemble):
    c = ens.cell_index()
    order = np.argsort(c, kind="stable")
    cuts = np.searchsorted(c[order], np.arange(ens.cells**3 + 1))
    return [order[cuts[i]:cuts[i + 1]] for i in range(ens.cells**3)]


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _reassemble(ens: Ensemble, parts) -> Ensemble:
    xu = np.concatenate([q[0] for q in parts]) if parts else ens.xu[:0]
    m = np.concatenate([q[1] for q in parts])
    p = np.concatenate([q[2] for q in parts])
    e = np.concatenate([q[3] for q in parts])
    return Ensemble(xu, m, p, e, ens.w, ens.L, ens.cells)


def coag_step(ens: Ensemble, A, dt: float, key: StreamKey, workers: int = 1):
    """Coagulation in every cell, each on its own stream lane."""
    groups = _by_cell(ens)
    V = ens.cell_volume

    def work(ci):
        idx = groups[ci]
        rng = key.lane(phase="coag", cell=ci).generator()
        return coag_cell(ens.xu[idx], ens.m[idx], ens.p[idx], ens.e[idx], ens.w, V, ens.L, A, dt, rng)

    out = _map(work, list(range(len(groups))), workers)
    log = StepLog()
    for _, lg in out:
        log.absorb(lg)
    return _reassemble(ens, [o[0] for o in out]), log


def frag_step(ens: Ensemble, B, dt: float, key: StreamKey, cache=None, workers: int = 1):
    """Fragmentation of every cell, each on its own stream lane."""
    groups = _by_cell(ens)

    def work(ci):
        idx = groups[ci]
        rng = key.lane(phase="frag", cell=ci).generator()
        return frag_cell(ens.xu[idx], ens.m[idx], ens.p[idx], ens.e[idx], B, dt, rng, cache)

    out = _map(work, list(range(len(groups))), workers)
    log = StepLog()
    for _, lg in out:
        log.absorb(lg)
    return _reassemble(ens, [o[0] for o in out]), log


def majorant_rate(ens: Ensemble, suite: KernelSuite, cache=None) -> float:
    """Largest candidate-event rate per simulation particle over the cells."""
    rate = 0.0
    if not suite.A.is_zero:
        V = ens.cell_volume
        for idx in _by_cell(ens):
            if idx.size < 2:
                continue
            nm = float(state_norm(States(ens.m[idx], ens.p[idx], ens.e[idx])).max())
            rate = max(rate, ens.w * _majorant(suite.A, nm) * (idx.size - 1) / V)
    if not suite.B.is_zero:
        rate += 0.5 * float(np.max(particle_B1(suite.B, ens.states, cache)))
    return rate


def double_population(ens: Ensemble) -> Ensemble:
    """Duplicate every particle and halve the common weight."""
    return Ensemble(
        np.concatenate([ens.xu, ens.xu]),
        np.concatenate([ens.m, ens.m]),
        np.concatenate([ens.p, ens.p]),
        np.concatenate([ens.e, ens.e]),
        ens.w / 2.0,
        ens.L,
        ens.cells,
    )


# --- driver -------------------------------------------------------------------------------


@dataclass
class DsmcConfig:
    suite: KernelSuite
    n_particles: int
    dt: float
    T: float
    seed: int = 0
    L: float = 1.0
    cells: int = 1
    N_phys: float = 1.0
    init: dict = field(default_factory=lambda: {"kind": "monodisperse"})
    cadence: float | None = None
    min_fraction: float = 0.5
    rate_limit: float = 0.1
    workers: int = 1
    cache_nodes: int = 6
    cache_budget: int = 20_000
    cache_span: float = 16.0
    symmetry_samples: int = 2_000
    gronwall: bool = True

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("particle budget must be positive")
        if not (self.dt > 0 and self.T > 0):
            raise ValueError("dt and T must be positive")
        if self.cadence is None:
            self.cadence = self.T


@dataclass
class DsmcResult:
    ensemble: Ensemble
    series: MomentSeries
    ledger: ConservationLedger
    initial: dict
    gronwall: dict | None = None
    estimates: dict | None = None
    cache: dict | None = None

    @property
    def skip_rate(self) -> float:
        tot = self.ledger.totals()
        attempts = tot["frag_events"] + tot["frag_skips"]
        return tot["frag_skips"] / attempts if attempts else 0.0


def refuse_asymmetric(suite: KernelSuite, samples: int, key: StreamKey) -> None:
    from .audit import FAIL, check_symmetries

    for entry in check_symmetries(suite, samples, key):
        if entry.status == FAIL:
            raise KernelContractError(
                f"suite fails the {entry.assumption} symmetry audit; the event rate is ill-defined", entry.witness
            )


def build_cache(B, ens: Ensemble, config: DsmcConfig, key: StreamKey):
    if B.is_zero or B.B1_closed is not None:
        return None
    span = config.cache_span
    return B1Cache(
        B,
        (float(ens.m.min()) / span, float(ens.m.max()) * span),
        (float(ens.e.min()) / span, float(ens.e.max()) * span),
        n=config.cache_nodes,
        budget=config.cache_budget,
        key=key,
    )


def _series_row(t, tot):
    return (t, tot["N"], tot["M"], tot["Px"], tot["Py"], tot["Pz"], tot["Ekin"], tot["Eint"], tot["Etot"], tot["Mx2"])


def run(config: DsmcConfig, ensemble: Ensemble | None = None) -> DsmcResult:
    """Simulate to ``T``; moments at every cadence point, one ledger row per step."""
    suite = config.suite
    root = StreamKey(config.seed, "dsmc")
    if not suite.B.is_zero:
        refuse_asymmetric(suite, config.symmetry_samples, root.lane(phase="symmetry-audit"))
    if ensemble is None:
        spec = dict(config.init)
        kind = spec.pop("kind")
        ensemble = init(kind, config.n_particles, config.N_phys, config.L, config.cells, root.lane(phase="init"), **spec)
    ens = ensemble
    n_init = len(ens)
    cache = build_cache(suite.B, ens, config, root.lane(phase="B1cache"))
    tot0 = ens.totals()
    series = MomentSeries()
    series.append(_series_row(0.0, tot0))
    ledger = ConservationLedger()
    drift_scale_p = math.sqrt(2.0 * tot0["M"] * tot0["Etot"])
    doublings = 0
    n_steps = int(math.ceil(config.T / config.dt - 1e-9))
    per_row = max(1, int(round(config.cadence / config.dt)))
    t = 0.0
    for step in range(1, n_steps + 1):
        h = min(config.dt, config.T - t)
        rate = majorant_rate(ens, suite, cache)
        if h * rate > config.rate_limit:
            raise RateConstraintError(
                f"dt * majorant rate = {h * rate:.4g} exceeds {config.rate_limit:g} at t={t:.6g}; reduce dt"
            )
        key = root.lane(step=step)
        ens = transport_step(ens, h)
        ens, log = coag_step(ens, suite.A, h, key, config.workers)
        ens, flog = frag_step(ens, suite.B, h, key, cache, config.workers)
        log.absorb(flog)
        t = step * config.dt if step < n_steps else config.T
        if len(ens) < config.min_fraction * n_init:
            ens = double_population(ens)
            doublings += 1
        tot = ens.totals()
        dP = math.sqrt(sum((tot[c] - tot0[c]) ** 2 for c in ("Px", "Py", "Pz")))
        ledger.append((
            t,
            step,
            log.coag_candidates,
            log.coag_events,
            log.frag_events,
            log.frag_skips,
            log.frag_accepted / log.frag_proposed if log.frag_proposed else 0.0,
            log.max_res[0],
            log.max_res[1],
            log.max_res[2],
            abs(tot["M"] - tot0["M"]) / tot0["M"],
            dP / drift_scale_p if drift_scale_p > 0 else dP,
            abs(tot["Etot"] - tot0["Etot"]) / tot0["Etot"],
            len(ens),
            doublings,
        ))
        if step % per_row == 0 or step == n_steps:
            series.append(_series_row(t, tot))

    result = DsmcResult(ens, series, ledger, initial_report(ensemble))
    if cache is not None:
        result.cache = cache.report()
    if config.gronwall:
        g = gronwall_for(suite, ensemble, config)
        result.gronwall = g
        result.estimates = check_estimates(
            series, C=g["C"], T=config.T, space_moment=suite.A.is_zero
        ).to_dict()
    return result


def gronwall_for(suite: KernelSuite, ensemble: Ensemble, config: DsmcConfig) -> dict:
    """Constant ``C`` and the particle bound for a run starting from ``ensemble``."""
    B = suite.B
    if B.is_zero:
        gc = {"value": 0.0, "method": "zero"}
    elif B.C0 is None:
        # no truncation: maximize over the box the energies can reach
        tot = ensemble.totals()
        R = max(tot["M"], tot["Etot"]) / ensemble.w
        gc = gronwall_constant(B, R=R, key=StreamKey(config.seed, "gronwall")).to_dict()
    else:
        gc = gronwall_constant(B, key=StreamKey(config.seed, "gronwall")).to_dict()
    init_ = initial_report(ensemble)
    bound = gronwall_bound(init_["N0"], init_["M0"], init_["E0"], gc["value"], config.T)
    return {"C": gc["value"], "method": gc["method"], "bound": bound, "constant": gc}


__all__ = [
    "DsmcConfig",
    "build_cache",
    "DsmcResult",
    "Ensemble",
    "RateConstraintError",
    "SAMPLERS",
    "StepLog",
    "coag_cell",
    "coag_step",
    "double_population",
    "frag_cell",
    "frag_probabilities",
    "frag_step",
    "gronwall_for",
    "init",
    "initial_report",
    "majorant_rate",
    "product_moments",
    "run",
    "sample_beam",
    "sample_monodisperse",
    "sample_product",
    "transport_step",
]
