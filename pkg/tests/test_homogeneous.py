import numpy as np
import pytest

from coagfrag.homogeneous import (
    HomogeneousConfig,
    MassGrid,
    SectionalState,
    analytic_constant_N,
    coag_rhs,
    dissipation_functionals,
    exponential,
    frag_rhs,
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
    zero_coag,
    zero_frag,
)

GRID = MassGrid.around(1.0, 2 ** 0.125, 128, below=8)
CONST = KernelSuite(constant_coag(1.0), zero_frag())


@pytest.fixture(scope="module")
def const_run():
    return run(HomogeneousConfig(CONST, GRID, 2.0, 0.05, cadence=0.25), monodisperse(GRID))


class TestGrid:
    def test_pivot_on_center(self):
        assert GRID.pivots[8] == pytest.approx(1.0, rel=1e-12)
        assert GRID.nearest(1.0) == 8

    def test_rejects_bad_edges(self):
        with pytest.raises(ValueError):
            MassGrid(np.array([1.0, 0.5, 2.0]))
        with pytest.raises(ValueError):
            MassGrid.geometric(1.0, 1.0, 10)

    def test_number_density_roundtrip(self):
        s = exponential(GRID)
        back = SectionalState.from_numbers(GRID, s.numbers)
        np.testing.assert_allclose(back.f, s.f, rtol=1e-14)


class TestOperators:
    def test_coag_conserves_mass(self):
        s = exponential(GRID)
        df, leak = coag_rhs(s, constant_coag())
        assert abs(np.dot(df * GRID.widths, GRID.pivots) + leak) < 1e-12 * s.M

    def test_frag_conserves_mass_and_adds_particles(self):
        s = monodisperse(GRID, 4.0)
        dn = frag_rhs(s, mass_binary_frag(1.0, 2.0)) * GRID.widths
        assert abs(np.dot(dn, GRID.pivots)) < 1e-12
        assert dn.sum() > 0

    def test_frag_needs_mass_form(self):
        with pytest.raises(ValueError):
            frag_rhs(monodisperse(GRID), constant_truncated_frag(1.0, 4.0))

    def test_coag_number_loss_rate(self):
        # d/dt N = -a0 N^2 / 2 for the constant kernel
        s = monodisperse(GRID, 1.0, 2.0)
        df, _ = coag_rhs(s, constant_coag(3.0))
        assert np.dot(df, GRID.widths) == pytest.approx(-3.0 * 4.0 / 2, rel=1e-12)

    def test_zero_kernels_do_nothing(self):
        s = exponential(GRID)
        dn, leak = coag_rhs(s, zero_coag())
        assert not dn.any() and leak == 0.0


class TestConstantBenchmark:
    def test_matches_analytic(self, const_run):
        N = const_run.column("N")
        t = const_run.column("t")
        np.testing.assert_allclose(N, analytic_constant_N(1.0, 1.0, t), rtol=0.01)

    def test_richardson(self):
        errs = []
        for dt in (0.1, 0.05, 0.025):
            r = run(HomogeneousConfig(CONST, GRID, 2.0, dt), monodisperse(GRID))
            errs.append(r.column("N")[-1] - float(analytic_constant_N(1.0, 1.0, 2.0)))
        assert 3.5 <= errs[0] / errs[1] <= 4.5
        assert 3.5 <= errs[1] / errs[2] <= 4.5

    def test_cadence_rows(self, const_run):
        np.testing.assert_allclose(const_run.column("t"), np.arange(9) * 0.25)


class TestConservation:
    @pytest.mark.parametrize(
        "suite",
        [
            CONST,
            KernelSuite(additive_power_coag(0.5), zero_frag()),
            KernelSuite(constant_coag(), mass_binary_frag(0.5, 2.0)),
            KernelSuite(zero_coag(), mass_binary_frag(1.0, 3.0)),
        ],
        ids=["constant", "additive", "coag_frag", "frag"],
    )
    def test_mass_drift(self, suite):
        r = run(HomogeneousConfig(suite, GRID, 1.0, 0.02, cadence=0.1), exponential(GRID))
        assert mass_drift(r) <= 1e-10

    def test_mass_moment_balance(self, const_run):
        suite = KernelSuite(constant_coag(), mass_binary_frag(0.5, 2.0))
        s0 = exponential(GRID)
        op = operator_for(GRID, suite.A, suite.B)
        s1, _ = step(s0, op, 0.01)
        res = moment_balance_residual(s0, s1, lambda m: m, suite.A, suite.B)
        assert abs(res) <= 1e-12

    def test_number_balance_is_second_order(self):
        op = operator_for(GRID, CONST.A, CONST.B)
        s0 = exponential(GRID)
        r = []
        for dt in (0.02, 0.01):
            s1, _ = step(s0, op, dt)
            r.append(abs(moment_balance_residual(s0, s1, np.ones_like, CONST.A, CONST.B)))
        assert r[1] < r[0] / 3


class TestEntropy:
    def test_pure_coagulation_Ls(self, const_run):
        chk = ls_dissipation_check(const_run)
        assert chk["label"] == "mass-only analogue"
        assert chk["pure_coagulation"] and chk["pass"]
        assert np.all(np.diff(const_run.column("Ls")) <= 0)

    def test_dissipation_nonnegative(self):
        D1, D2 = dissipation_functionals(exponential(GRID), CONST)
        assert D1 >= 0 and D2 >= 0

    def test_stiff_step_is_halved(self):
        op = operator_for(GRID, constant_coag(50.0), zero_frag())
        _, info = step(monodisperse(GRID, 1.0, 10.0), op, 1.0)
        assert info.rejected > 0
