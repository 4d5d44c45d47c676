import math

import numpy as np
import pytest

from coagfrag.diagnostics import (
    DSMC_COLUMNS,
    ConservationLedger,
    MomentSeries,
    RunManifest,
    Table,
    check_estimates,
    config_hash,
    empirical_Ls,
    gronwall_bound,
)


def _row(t, N=1.0, M=1.0, E=2.0, Mx2=0.0, Ekin=1.0):
    return dict(t=t, N=N, M=M, Px=0.0, Py=0.0, Pz=0.0, Ekin=Ekin, Eint=E - Ekin, Etot=E, Mx2=Mx2)


class TestTables:
    def test_exact_csv_roundtrip(self, tmp_path):
        s = MomentSeries()
        s.append(_row(0.0, N=1 / 3))
        s.append(_row(0.1, N=math.pi, M=1e-300))
        s.to_csv(tmp_path / "s.csv")
        back = Table.from_csv(tmp_path / "s.csv")
        assert back.columns == DSMC_COLUMNS
        assert back.rows == s.rows

    def test_time_must_increase(self):
        s = MomentSeries()
        s.append(_row(0.5))
        with pytest.raises(ValueError):
            s.append(_row(0.5))
        assert len(s) == 1

    def test_row_length_checked(self):
        with pytest.raises(ValueError):
            Table(("a", "b"), [(1.0,)])

    def test_ledger_rejects_negative_residual(self):
        led = ConservationLedger()
        row = dict.fromkeys(led.columns, 0.0)
        led.append(row)
        row["max_res_energy"] = -1e-20
        with pytest.raises(ValueError):
            led.append(row)
        assert led.max_residual() == 0.0


class TestManifest:
    def test_hash_is_key_order_free(self):
        assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
        assert config_hash({"a": 1}) != config_hash({"a": 2})

    def test_json_roundtrip(self):
        m = RunManifest.build({"seed": 1}, 1, {"A": "constant"}, command="dsmc", outputs=["moments.csv"])
        assert RunManifest.from_json(m.to_json()) == m


class TestGronwall:
    def test_formula(self):
        N0, M0, E0, C, T = 1.0, 2.0, 3.0, 0.5, 2.0
        assert gronwall_bound(N0, M0, E0, C, T) == pytest.approx((1 + 1.0 * 5) * math.e + 5)

    def test_zero_constant(self):
        assert gronwall_bound(1.0, 2.0, 3.0, 0.0, 1.0) == 6.0

    def test_overflow_is_infinite(self):
        assert math.isinf(gronwall_bound(1.0, 1.0, 1.0, 1e4, 1.0))

    @pytest.mark.parametrize("bad", [dict(C=-1.0), dict(T=0.0), dict(N0=float("nan"))])
    def test_rejects_bad_inputs(self, bad):
        args = dict(N0=1.0, M0=1.0, E0=1.0, C=1.0, T=1.0) | bad
        with pytest.raises(ValueError):
            gronwall_bound(**args)


class TestEstimates:
    def test_all_pass(self):
        s = MomentSeries(rows=[_row(0.0, Mx2=1.0), _row(1.0, N=0.8, Mx2=1.5)])
        rep = check_estimates(s, C=0.0, T=1.0)
        assert rep.passed
        assert {i["check"] for i in rep.items} >= {"conservation_mass", "particle_bound", "space_moment_slope"}

    def test_mass_leak_reported(self):
        s = MomentSeries(rows=[_row(0.0), _row(1.0, M=0.9)])
        rep = check_estimates(s)
        assert not rep["conservation_mass"]["pass"]
        assert rep["conservation_mass"]["row"] == 1

    def test_bound_violation(self):
        s = MomentSeries(rows=[_row(0.0), _row(1.0, N=50.0)])
        assert not check_estimates(s, C=0.0, T=1.0)["particle_bound"]["pass"]

    def test_space_moment_too_fast(self):
        # |slope| may not exceed 2 sqrt(Mx2 * 2 Ekin)
        s = MomentSeries(rows=[_row(0.0, Mx2=1.0), _row(0.1, Mx2=3.0)])
        assert not check_estimates(s)["space_moment_slope"]["pass"]
        assert "space_moment_slope" not in {i["check"] for i in check_estimates(s, space_moment=False).items}

    def test_ls_growth(self):
        t = Table(("t", "N", "M", "Ls"), [(0, 1, 1, 1.0), (1, 1, 1, 1.1)])
        assert not check_estimates(t, pure_coagulation=True)["Ls_bounded"]["pass"]

    def test_empty(self):
        with pytest.raises(ValueError):
            check_estimates(MomentSeries())


class TestEmpiricalLs:
    def test_uniform_density(self):
        rng = np.random.default_rng(0)
        m, e = rng.random(200_000), rng.random(200_000)
        out = empirical_Ls(m, e, 1.0 / 200_000, 1.5, 1.0, np.linspace(0, 1, 5), np.linspace(0, 1, 5))
        assert out["label"] == "estimator-dependent"
        assert out["value"] == pytest.approx(1.0, rel=0.01)
