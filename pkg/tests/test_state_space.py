import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coagfrag.state_space import (
    ParticleState,
    PhasePoint,
    States,
    admissible,
    admissible_arrays,
    admissible_bounds,
    advect,
    coalesce,
    coalesce_arrays,
    energy_gain,
    energy_loss,
    jacobian_determinant,
    kinetic_energy,
    split,
    split_arrays,
)

pos = st.floats(0.05, 20.0)
mom = st.floats(-10.0, 10.0)


def _state(m, px, py, pz, e):
    return ParticleState(m, (px, py, pz), e)


class TestParticleState:
    def test_rejects_nonpositive_mass(self):
        with pytest.raises(ValueError):
            ParticleState(0.0, (0, 0, 0), 1.0)

    def test_rejects_negative_energy(self):
        with pytest.raises(ValueError):
            ParticleState(1.0, (0, 0, 0), -1.0)

    def test_list_roundtrip(self):
        y = ParticleState(1.5, (0.1, -0.2, 0.3), 2.0)
        assert ParticleState.from_list(y.to_list()) == y

    def test_total_energy(self):
        y = ParticleState(2.0, (2.0, 0.0, 0.0), 1.0)
        assert y.total_energy() == pytest.approx(2.0)
        assert kinetic_energy(y) == pytest.approx(1.0)


class TestCoalesce:
    def test_worked_example(self):
        y = coalesce(ParticleState(1, (1, 0, 0), 0.5), ParticleState(1, (-1, 0, 0), 0.5))
        assert y.m == 2.0
        np.testing.assert_allclose(y.p_array, 0.0)
        # both kinetic energies (0.5 each) go into internal energy
        assert y.e == pytest.approx(2.0)

    def test_energy_loss_value(self):
        assert energy_loss(1.0, 1.0, np.array([1.0, 0, 0]), np.array([-1.0, 0, 0])) == pytest.approx(1.0)

    @settings(max_examples=200, deadline=None)
    @given(pos, mom, mom, mom, pos, pos, mom, mom, mom, pos)
    def test_conservation(self, m, a, b, c, e, ms, d, f, g, es):
        y, ys = _state(m, a, b, c, e), _state(ms, d, f, g, es)
        yp = coalesce(y, ys)
        assert yp.m == pytest.approx(m + ms, rel=1e-13)
        np.testing.assert_allclose(yp.p_array, y.p_array + ys.p_array, atol=1e-12)
        assert yp.total_energy() == pytest.approx(y.total_energy() + ys.total_energy(), rel=1e-12)

    def test_arrays_match_scalar(self, pairs):
        y, ys = pairs
        out = coalesce_arrays(y, ys)
        one = coalesce(
            ParticleState(y.m[3], tuple(y.p[3]), y.e[3]), ParticleState(ys.m[3], tuple(ys.p[3]), ys.e[3])
        )
        np.testing.assert_allclose([out.m[3], *out.p[3], out.e[3]], one.to_list(), rtol=1e-14)


class TestSplit:
    def test_reciprocity(self, pairs):
        y, ys = pairs
        yp = coalesce_arrays(y, ys)
        np.testing.assert_allclose(energy_gain(yp.m, y.m, yp.p, y.p), energy_loss(y.m, ys.m, y.p, ys.p), rtol=1e-11)

    def test_roundtrip(self, pairs):
        y, ys = pairs
        back = split_arrays(coalesce_arrays(y, ys), y)
        np.testing.assert_allclose(back.m, ys.m, rtol=1e-12)
        np.testing.assert_allclose(back.p, ys.p, atol=1e-11)
        np.testing.assert_allclose(back.e, ys.e, rtol=1e-9, atol=1e-11)

    def test_inadmissible_raises(self):
        with pytest.raises(ValueError):
            split(ParticleState(1.0, (0, 0, 0), 1.0), ParticleState(2.0, (0, 0, 0), 0.1))

    def test_admissible_is_strict(self):
        yp = ParticleState(2.0, (0, 0, 0), 3.0)
        assert admissible(ParticleState(1.0, (0, 0, 0), 1.0), yp)
        assert not admissible(ParticleState(1.0, (0, 0, 0), 3.0), yp)
        # all of e' spent on relative motion leaves nothing for the partner
        assert not admissible(ParticleState(1.0, (np.sqrt(6.0), 0, 0), 0.1), yp)

    def test_bounds_contain_admissible(self, key):
        rng = key.generator()
        yp = ParticleState(2.0, (1.0, -0.5, 0.2), 3.0)
        box = admissible_bounds(yp)
        n = 50_000
        cand = States(rng.random(n) * 2.0, rng.normal(size=(n, 3)) * 3.0, rng.random(n) * 3.0)
        par = States(np.full(n, yp.m), np.tile(yp.p_array, (n, 1)), np.full(n, yp.e))
        ok = admissible_arrays(cand, par)
        assert ok.any()
        assert np.all(np.linalg.norm(cand.p[ok], axis=1) < box.p_radius)


class TestJacobian:
    def test_unit_determinant(self):
        z = np.array([2.0, 0.7, 0.3, -0.1, 0.2, 0.05, 0.1, -0.2, 3.0, 0.4])
        assert abs(jacobian_determinant(z)) == pytest.approx(1.0, abs=1e-6)


class TestAdvect:
    def test_free_flight(self):
        pt = PhasePoint((0.0, 0.0, 0.0), ParticleState(2.0, (1.0, 0.0, -2.0), 1.0))
        out = advect(pt, 0.5)
        np.testing.assert_allclose(out.x, [0.25, 0.0, -0.5])
        assert out.state == pt.state
