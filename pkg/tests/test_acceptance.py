"""One test per acceptance criterion; each records a pass/fail line.

The lines are printed as the tests run and repeated in an
``acceptance criteria`` section of the pytest summary.
"""
import math
import time
from pathlib import Path

import numpy as np
import pytest
from conftest import record

from coagfrag.audit import (
    FAIL,
    PASS,
    check_structure_vs_galkin,
    check_weight_integrability,
)
from coagfrag.cli import main
from coagfrag.config import dsmc_from, load
from coagfrag.dsmc import DsmcConfig, gronwall_for
from coagfrag.dsmc import init as dsmc_init
from coagfrag.dsmc import run as dsmc_run
from coagfrag.homogeneous import (
    HomogeneousConfig,
    MassGrid,
    analytic_constant_N,
    exponential,
    ls_dissipation_check,
    mass_drift,
    moment_balance_residual,
    monodisperse,
    operator_for,
    run,
    step,
)
from coagfrag.kernels import (
    KernelSuite,
    additive_power_coag,
    constant_coag,
    constant_truncated_frag,
    mass_binary_frag,
    smoluchowski_coag,
    zero_coag,
    zero_frag,
)
from coagfrag.state_space import ParticleState, as_states
from coagfrag.stochastics import StreamKey, mc_B1
from coagfrag.verify import jacobian_errors, kinematics_errors

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
GRID = MassGrid.around(1.0, 2 ** 0.125, 128, below=8)


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def test_criterion_01_kinematics():
    errs, sec = _timed(lambda: kinematics_errors(100_000, seed=1))
    worst = max(errs.values())
    ok = worst <= 1e-12 and sec < 5
    record(1, ok, f"worst relative error {worst:.2e} over 1e5 pairs ({', '.join(sorted(errs))}); {sec:.2f} s")
    assert ok


def test_criterion_02_jacobian():
    errs, sec = _timed(lambda: jacobian_errors(1000, seed=2))
    ok = errs.max() <= 1e-6 and sec < 10
    record(2, ok, f"max ||det J| - 1| = {errs.max():.2e} at 1000 admissible points; {sec:.2f} s")
    assert ok


def test_criterion_03_smoluchowski_dichotomy():
    probe = ((1.0, 0.0, 0.0, 0.0, 0.5), (1.1, 0.0, 0.0, 0.0, 1.0))
    ents, sec = _timed(lambda: check_structure_vs_galkin(smoluchowski_coag(), 1_000_000, StreamKey(3, "acc"), probes=(probe,)))
    st = next(e for e in ents if e.assumption == "structure")
    gk = next(e for e in ents if e.assumption == "galkin")
    w = gk.witness or {}
    ok = (
        st.status == PASS
        and st.params["samples"] >= 1_000_000
        and gk.status == FAIL
        and abs(w.get("lhs", 0) - 4.6186) < 1e-4
        and abs(w.get("rhs", 0) - 4.0010) < 1e-4
        and sec < 30
    )
    record(3, ok, f"structure {st.status} on {st.params['samples']} samples, monotonicity {gk.status} "
                  f"with witness {w.get('lhs', float('nan')):.4f} > {w.get('rhs', float('nan')):.4f}; {sec:.2f} s")
    assert ok


def test_criterion_04_B1_oracle():
    b0 = 1.0
    y = as_states(ParticleState(2.0, (0.0, 0.0, 0.0), 3.0))
    est, sec = _timed(lambda: mc_B1(constant_truncated_frag(b0, None), y, 1_000_000, StreamKey(4, "acc")))
    exact = b0 * 9 * math.sqrt(3) * math.pi**2 / 5
    z = abs(est.value - exact) / est.std_error
    ok = z <= 3 and sec < 30
    record(4, ok, f"MC {est.value:.4f} +- {est.std_error:.4f} vs {exact:.4f} (z = {z:.2f}); {sec:.2f} s")
    assert ok


def test_criterion_05_sectional_benchmark():
    suite = KernelSuite(constant_coag(1.0), zero_frag())
    exact = float(analytic_constant_N(1.0, 1.0, 2.0))

    def go():
        return [run(HomogeneousConfig(suite, GRID, 2.0, dt), monodisperse(GRID)).column("N")[-1] - exact
                for dt in (0.1, 0.05, 0.025)]

    errs, sec = _timed(go)
    rel = abs(errs[-1]) / exact
    ratios = (errs[0] / errs[1], errs[1] / errs[2])
    ok = rel <= 0.01 and all(3.5 <= r <= 4.5 for r in ratios) and sec < 60
    record(5, ok, f"relative error {rel:.2e} at a0 N0 t = 2, Richardson ratios {ratios[0]:.3f}, {ratios[1]:.3f}; {sec:.2f} s")
    assert ok


def test_criterion_06_discrete_conservation():
    suites = {
        "constant": KernelSuite(constant_coag(1.0), zero_frag()),
        "additive": KernelSuite(additive_power_coag(0.5), zero_frag()),
        "coag_frag": KernelSuite(constant_coag(1.0), mass_binary_frag(0.5, 2.0)),
        "frag": KernelSuite(zero_coag(), mass_binary_frag(1.0, 3.0)),
    }
    drift = 0.0
    resid = 0.0
    for suite in suites.values():
        r = run(HomogeneousConfig(suite, GRID, 1.0, 0.02, cadence=0.1), exponential(GRID))
        drift = max(drift, mass_drift(r))
        op = operator_for(GRID, suite.A, suite.B)
        s = exponential(GRID)
        for _ in range(20):
            nxt, _ = step(s, op, 0.02)
            resid = max(resid, abs(moment_balance_residual(s, nxt, lambda m: m, suite.A, suite.B)))
            s = nxt
    ok = drift <= 1e-10 and resid <= 1e-12
    record(6, ok, f"max mass drift {drift:.2e} over {len(suites)} suites, max Phi=m balance residual {resid:.2e}")
    assert ok


def test_criterion_07_Ls_monotone():
    worst_inc, worst_margin = -math.inf, math.inf
    ok = True
    for A in (constant_coag(1.0), additive_power_coag(0.5)):
        r = run(HomogeneousConfig(KernelSuite(A, zero_frag()), GRID, 2.0, 0.02, cadence=0.1), exponential(GRID))
        chk = ls_dissipation_check(r, tol=1e-6)
        ok &= chk["pass"]
        Ls = r.column("Ls")
        worst_inc = max(worst_inc, float(np.max(np.diff(Ls))))
        worst_margin = min(worst_margin, chk["items"][0]["worst_margin"])
    ok = bool(ok and worst_inc <= 0)
    record(7, ok, f"largest Ls increment {worst_inc:.2e}, smallest entropy margin {worst_margin:.2e} (relative, >= -1e-6)")
    assert ok


@pytest.mark.slow
def test_criterion_08_dsmc_statistics():
    suite = KernelSuite(constant_coag(1.0), zero_frag())

    def go():
        return np.array([
            dsmc_run(DsmcConfig(suite, 10_000, 0.05, 2.0, seed=s, cadence=0.25, gronwall=False)).series.column("N")
            for s in range(32)
        ])

    N, sec = _timed(go)
    t = np.arange(N.shape[1]) * 0.25
    exact = analytic_constant_N(1.0, 1.0, t)
    mean = N.mean(axis=0)
    se = N.std(axis=0, ddof=1) / math.sqrt(N.shape[0])
    z = np.abs(mean[1:] - exact[1:]) / se[1:]
    ok = bool(np.all(z <= 3) and sec < 120)
    record(8, ok, f"max |mean - exact| / se = {z.max():.2f} over {z.size} times, 32 seeds x 1e4 particles; {sec:.1f} s")
    assert ok


@pytest.mark.slow
def test_criterion_09_dsmc_exactness():
    suite = KernelSuite(constant_coag(1.0), zero_frag())
    res = dsmc_run(DsmcConfig(suite, 200_000, 0.05, 2.5, seed=9, init={"kind": "product"},
                              cadence=0.25, gronwall=False))
    tot = res.ledger.totals()
    events = tot["coag_events"] + tot["frag_events"]
    res_max, drift = res.ledger.max_residual(), res.ledger.max_drift()

    # free flight: constant totals, and the space-moment slope against 2 sum w x.p
    free = KernelSuite(zero_coag(), zero_frag())
    ens0 = dsmc_init("product", 2000, 1.0, 1.0, 1, StreamKey(9, "free"))
    rate0 = 2.0 * ens0.w * float(np.einsum("ij,ij->", ens0.xu, ens0.p))
    errs = []
    for dt in (0.02, 0.01):
        r = dsmc_run(DsmcConfig(free, 2000, dt, dt, seed=9), ens0)
        X = r.series.column("Mx2")
        errs.append(abs((X[1] - X[0]) / dt - rate0))
    const = all(np.ptp(r.series.column(c)) <= 1e-12 * max(1.0, abs(r.series.column(c)[0])) for c in ("N", "M", "Px", "Py", "Pz", "Etot"))
    first_order = 1.8 <= errs[0] / errs[1] <= 2.2
    ok = events >= 100_000 and res_max <= 1e-12 and drift <= 1e-9 and const and first_order
    record(9, ok, f"{events} events, max per-event residual {res_max:.2e}, max drift {drift:.2e}; "
                  f"free flight totals constant={const}, slope error ratio under dt halving {errs[0] / errs[1]:.3f}")
    assert ok


def _shipped_dsmc():
    return [p for p in sorted(CONFIGS.glob("*.json")) if "domain" in load(p)]


@pytest.mark.slow
def test_criterion_10_gronwall_bound():
    lines = []
    ok = True
    for path in _shipped_dsmc():
        res = dsmc_run(dsmc_from(load(path)))
        N = res.series.column("N")
        good = bool(np.all(N <= res.gronwall["bound"]))
        ok &= good
        lines.append(f"{path.stem}: max N {N.max():.4g} <= {res.gronwall['bound']:.4g} (C={res.gronwall['C']:.4g})")
    # fault injection: oversized b0 with truncation switched off
    cfg = load(CONFIGS / "frag_truncated.json")
    cfg["kernels"]["frag"] = {"name": "constant_truncated", "b0": 10.0, "C0": None}
    cfg["domain"].update(particles=500, init={"kind": "monodisperse", "m": 1.0, "e": 1.0})
    cfg["time"].update(dt=0.005, T=0.2, cadence=0.02)
    dc = dsmc_from(cfg)
    res = dsmc_run(dc)
    N = res.series.column("N")
    g = res.gronwall
    recomputed = gronwall_for(dc.suite, dsmc_init("monodisperse", 500, 1.0, 1.0, 1, StreamKey(dc.seed, "x"), m=1.0, e=1.0), dc)
    good = bool(np.all(N <= g["bound"])) and g["C"] == recomputed["C"] and res.ledger.totals()["frag_events"] > 0
    ok &= good
    lines.append(f"fault injection b0=10 untruncated: max N {N.max():.4g} <= {g['bound']:.4g} (C={g['C']:.4g}, {g['method']})")
    record(10, ok, "; ".join(lines))
    assert ok


def test_criterion_11_weight_integrability():
    ents, sec = _timed(lambda: check_weight_integrability(5.5, (8.0, 16.0, 32.0, 64.0), 1_000_000, StreamKey(11, "acc")))
    ent = ents[0]
    vals = [e["value"] for e in ent.estimates]
    change = ent.params["last_relative_change"]
    ok = ent.status == PASS and sec < 60
    record(11, ok, f"nested estimates {', '.join(f'{v:.3f}' for v in vals)}; last doubling changes the value by "
                   f"{100 * change:.1f}% (needs < 2%), status {ent.status}; {sec:.1f} s")
    assert ok


@pytest.mark.slow
def test_criterion_12_worker_reproducibility(tmp_path):
    blobs = {}
    for w in (1, 2, 8):
        out = tmp_path / f"w{w}"
        rc = main(["dsmc", "--config", str(CONFIGS / "coag_frag.json"), "--out", str(out), "--workers", str(w)])
        assert rc == 0
        blobs[w] = ((out / "moments.csv").read_bytes(), (out / "ledger.csv").read_bytes())
    again = tmp_path / "again"
    main(["dsmc", "--config", str(CONFIGS / "coag_frag.json"), "--out", str(again), "--workers", "8"])
    same = blobs[1] == blobs[2] == blobs[8] == ((again / "moments.csv").read_bytes(), (again / "ledger.csv").read_bytes())
    rows = blobs[1][1].count(b"\n") - 1
    record(12, same, f"moments.csv and ledger.csv ({rows} ledger rows, 8 cells) byte-identical at 1, 2, 8 workers and on repeat")
    assert same
