import numpy as np
import pytest

from coagfrag.diagnostics import Table
from coagfrag.dsmc import (
    DsmcConfig,
    Ensemble,
    RateConstraintError,
    coag_cell,
    double_population,
    frag_cell,
    frag_probabilities,
    init,
    majorant_rate,
    product_moments,
    run,
    transport_step,
)
from coagfrag.homogeneous import analytic_constant_N
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
from coagfrag.stochastics import KernelContractError, StreamKey

FREE = KernelSuite(zero_coag(), zero_frag())
CONST = KernelSuite(constant_coag(1.0), zero_frag())
FRAG = KernelSuite(constant_coag(1.0), constant_truncated_frag(0.01, 4.0))


def _ens(n=400, key=None, **kw):
    return init("product", n, 1.0, 1.0, 2, key or StreamKey(3, "init"), **kw)


class TestEnsemble:
    def test_rejects_bad_particles(self):
        with pytest.raises(ValueError):
            Ensemble(np.zeros((2, 3)), [1.0, 0.0], np.zeros((2, 3)), [1.0, 1.0], 0.5)

    def test_totals_scale_with_weight(self):
        ens = _ens()
        t = ens.totals()
        assert t["N"] == pytest.approx(1.0)
        d = double_population(ens)
        for k, v in d.totals().items():
            assert v == pytest.approx(t[k], rel=1e-14, abs=1e-14)
        assert len(d) == 2 * len(ens)

    def test_product_moments(self):
        mom = product_moments(3.0, 0.5, 0.5, 1.0)
        ens = init("product", 200_000, 1.0, key=StreamKey(0, "init"))
        t = ens.totals()
        assert t["M"] == pytest.approx(mom["m"], rel=0.01)
        assert t["Ekin"] == pytest.approx(mom["kin"], rel=0.02)
        assert t["Eint"] == pytest.approx(mom["e"], rel=0.01)

    def test_unknown_sampler(self):
        with pytest.raises(KeyError):
            init("lattice", 10)


class TestTransport:
    def test_unwrapped_positions_move_linearly(self):
        ens = _ens()
        out = transport_step(ens, 0.3)
        np.testing.assert_allclose(out.xu, ens.xu + 0.3 * ens.p / ens.m[:, None])
        assert np.all((out.x >= 0) & (out.x < ens.L))

    def test_space_moment_slope(self):
        ens = _ens(1000)
        h = 1e-3
        a, b = transport_step(ens, -h).second_moment(), transport_step(ens, h).second_moment()
        expected = 2.0 * ens.w * float(np.einsum("ij,ij->", ens.xu, ens.p))
        assert (b - a) / (2 * h) == pytest.approx(expected, rel=1e-9)


class TestCoagulation:
    def test_merges_conserve(self):
        ens = _ens(200)
        rng = np.random.default_rng(0)
        (xu, m, p, e), log = coag_cell(ens.xu, ens.m, ens.p, ens.e, ens.w, 1.0, 1.0, constant_coag(50.0), 1.0, rng)
        assert log.coag_events > 0
        assert m.size == 200 - log.coag_events
        assert m.sum() == pytest.approx(ens.m.sum(), rel=1e-13)
        np.testing.assert_allclose(p.sum(axis=0), ens.p.sum(axis=0), atol=1e-12)
        assert log.max_res.max() <= 1e-12

    def test_center_of_mass_kept_on_merge(self):
        xu = np.array([[0.1, 0.1, 0.1], [0.3, 0.1, 0.1]])
        m = np.array([1.0, 3.0])
        (x2, *_), _ = coag_cell(xu, m, np.zeros((2, 3)), np.ones(2), 1.0, 1e-6, 1.0, constant_coag(1.0), 1.0, np.random.default_rng(1))
        np.testing.assert_allclose(x2[0], [0.25, 0.1, 0.1])

    def test_unbounded_kernel_refused(self):
        ens = _ens(10)
        with pytest.raises(ValueError):
            coag_cell(ens.xu, ens.m, ens.p, ens.e, ens.w, 1.0, 1.0, smoluchowski_coag(), 1.0, np.random.default_rng(0))


class TestFragmentation:
    def test_probabilities(self):
        B = constant_truncated_frag(1.0, None)
        ens = init("monodisperse", 3, m=2.0, e=3.0)
        np.testing.assert_allclose(frag_probabilities(ens.states, B, 0.01), -np.expm1(-0.5 * 30.77038 * 0.01), rtol=1e-6)

    def test_break_ups_conserve(self):
        B = constant_truncated_frag(1.0, None)
        ens = _ens(300)
        (xu, m, p, e), log = frag_cell(ens.xu, ens.m, ens.p, ens.e, B, 5.0, np.random.default_rng(2))
        assert log.frag_events > 0
        assert m.size == 300 + log.frag_events
        assert m.sum() == pytest.approx(ens.m.sum(), rel=1e-13)
        assert log.max_res.max() <= 1e-12
        assert np.all(m > 0) and np.all(e > 0)


class TestRun:
    def test_free_flight_constant_totals(self):
        res = run(DsmcConfig(FREE, 500, 0.1, 1.0, seed=1, init={"kind": "beam"}, cadence=0.1))
        for c in ("N", "M", "Px", "Py", "Pz", "Etot"):
            v = res.series.column(c)
            np.testing.assert_allclose(v, v[0], rtol=0, atol=1e-12 * max(1.0, abs(v[0])))
        assert res.estimates["passed"]

    def test_constant_kernel_near_analytic(self):
        res = run(DsmcConfig(CONST, 4000, 0.05, 2.0, seed=5, cadence=0.5))
        np.testing.assert_allclose(res.series.column("N"), analytic_constant_N(1.0, 1.0, res.series.column("t")), rtol=0.03)
        assert res.ledger.max_residual() <= 1e-12

    def test_population_doubling(self):
        res = run(DsmcConfig(CONST, 400, 0.05, 4.0, seed=2, min_fraction=0.5))
        assert res.ledger.column("doublings")[-1] >= 1
        assert res.ledger.max_drift() <= 1e-12

    def test_rate_constraint(self):
        with pytest.raises(RateConstraintError):
            run(DsmcConfig(KernelSuite(constant_coag(1000.0), zero_frag()), 200, 0.5, 1.0))

    def test_asymmetric_fragmentation_refused(self):
        with pytest.raises(KernelContractError):
            run(DsmcConfig(KernelSuite(constant_coag(), mass_binary_frag(1.0, 2.0)), 100, 0.01, 0.1))

    def test_coag_frag_run(self):
        cfg = DsmcConfig(FRAG, 600, 0.01, 0.2, seed=4, cells=2, init={"kind": "monodisperse", "e": 2.0}, cadence=0.05)
        res = run(cfg)
        assert res.ledger.max_residual() <= 1e-12
        assert res.estimates["passed"]
        assert res.gronwall["bound"] >= res.series.column("N").max()

    def test_workers_bit_identical(self, tmp_path):
        cfg = dict(suite=FRAG, n_particles=600, dt=0.01, T=0.1, seed=9, cells=2, init={"kind": "monodisperse", "e": 2.0})
        outs = []
        for w in (1, 3):
            res = run(DsmcConfig(workers=w, **cfg))
            res.series.to_csv(tmp_path / f"m{w}.csv")
            outs.append((tmp_path / f"m{w}.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_majorant_rate_positive(self):
        assert majorant_rate(_ens(), KernelSuite(additive_power_coag(0.5), zero_frag())) > 0

    def test_series_roundtrip(self, tmp_path):
        res = run(DsmcConfig(CONST, 300, 0.1, 0.5, seed=1, cadence=0.1))
        res.ledger.to_csv(tmp_path / "l.csv")
        assert Table.from_csv(tmp_path / "l.csv") == Table(res.ledger.columns, res.ledger.rows)
