import math

import numpy as np
import pytest
from conftest import one

from coagfrag.kernels import (
    B1,
    B1_mass,
    B1Cache,
    KernelSuite,
    admissible_volume,
    constant_coag,
    constant_truncated_frag,
    gronwall_constant,
    make_coag,
    make_frag,
    mass_binary_frag,
    particle_B1,
    smoluchowski_coag,
    zero_coag,
    zero_frag,
)
from coagfrag.state_space import ParticleState, States


class TestAdmissibleVolume:
    def test_reference_parent(self):
        # 9 sqrt(3) pi^2 / 5 at m'=2, e'=3
        assert admissible_volume(2.0, 3.0) == pytest.approx(9 * math.sqrt(3) * math.pi**2 / 5, rel=1e-12)
        assert admissible_volume(2.0, 3.0) == pytest.approx(30.77038, rel=1e-6)

    def test_scaling(self):
        np.testing.assert_allclose(admissible_volume(2.0, 2.0), admissible_volume(1.0, 1.0) * 4**2.5)


class TestCoagKernels:
    def test_constant(self, pairs):
        A = constant_coag(2.5)
        y, ys = pairs
        np.testing.assert_array_equal(A(y, ys), 2.5)
        assert A.local_sup(10.0) == 2.5

    def test_smoluchowski_value(self):
        A = smoluchowski_coag()
        v = A(one(1.0, (0, 0, 0), 1.0), one(1.1, (0, 0, 0), 1.0))
        assert float(v[0]) == pytest.approx(4.0010, abs=1e-4)
        assert math.isinf(A.local_sup(1.0))

    def test_registry(self):
        assert make_coag("additive_power", alpha=0.3).params == {"alpha": 0.3}
        with pytest.raises(KeyError):
            make_coag("nope")
        with pytest.raises(ValueError):
            make_coag("additive_power", alpha=1.5)

    def test_zero_flags(self):
        assert zero_coag().is_zero and zero_frag().is_zero
        assert not constant_coag().is_zero


class TestFragKernels:
    def test_truncation_needs_both_daughters(self):
        B = constant_truncated_frag(1.0, C0=4.0)
        yp = one(4.0, (0, 0, 0), 4.0)
        # a daughter below 1/C0 in mass is cut off
        assert float(B(yp, one(0.2, (0, 0, 0), 1.0))[0]) == 0.0
        assert float(B(yp, one(2.0, (0, 0, 0), 1.0))[0]) == 1.0

    def test_symmetric_in_daughters(self, key):
        from coagfrag.stochastics import sample_admissible

        B = constant_truncated_frag(1.0, C0=4.0)
        yp = ParticleState(3.0, (0.5, 0.0, 0.0), 2.0)
        d, _ = sample_admissible(yp, key, 5000)
        par = States(np.full(5000, 3.0), np.tile(yp.p_array, (5000, 1)), np.full(5000, 2.0))
        from coagfrag.state_space import split_arrays

        other = split_arrays(par, d)
        np.testing.assert_array_equal(B(par, d), B(par, other))

    def test_mass_binary_is_mass_only(self):
        B = mass_binary_frag(0.5, C0=2.0)
        assert B.mass_only
        np.testing.assert_allclose(B1_mass(B, np.array([1.0, 2.0])), [0.25, 0.5], rtol=1e-12)

    def test_registry_rejects_bad_params(self):
        with pytest.raises((TypeError, ValueError)):
            make_frag("constant_truncated", b0=-1.0)


class TestB1:
    def test_closed_form_untruncated(self):
        B = constant_truncated_frag(2.0, None)
        est = B1(B, ParticleState(2.0, (0, 0, 0), 3.0))
        assert est.exact
        assert est.value == pytest.approx(2.0 * 30.77038, rel=1e-6)

    def test_closed_form_ignores_momentum(self):
        B = constant_truncated_frag(1.0, None)
        a = B1(B, ParticleState(2.0, (0, 0, 0), 3.0)).value
        b = B1(B, ParticleState(2.0, (5.0, 1.0, 0), 3.0)).value
        assert a == b

    def test_truncated_below_untruncated(self, key):
        yp = ParticleState(2.0, (0, 0, 0), 3.0)
        est = B1(constant_truncated_frag(1.0, 4.0), yp, budget=100_000, key=key)
        assert 0 < est.value < 30.77038
        assert est.std_error > 0

    def test_cache_matches_direct(self, key):
        B = constant_truncated_frag(1.0, 4.0)
        cache = B1Cache(B, (0.5, 4.0), (0.5, 4.0), n=6, budget=20_000, key=key)
        y = one(1.3, (0.2, 0, 0), 2.1)
        direct = B1(B, y, budget=200_000, key=key.lane(phase="direct"))
        assert float(particle_B1(B, y, cache)[0]) == pytest.approx(direct.value, rel=0.05)

    def test_particle_B1_needs_cache(self):
        with pytest.raises(ValueError):
            particle_B1(constant_truncated_frag(1.0, 4.0), one(1.0, (0, 0, 0), 1.0))


class TestGronwallConstant:
    def test_scales_with_b0(self, key):
        a = gronwall_constant(constant_truncated_frag(1.0, 4.0), key=key).value
        b = gronwall_constant(constant_truncated_frag(1e-3, 4.0), key=key).value
        assert b == pytest.approx(1e-3 * a, rel=1e-9)

    def test_zero_kernel(self):
        assert gronwall_constant(zero_frag()).value == 0.0

    def test_untruncated_needs_radius(self):
        with pytest.raises(ValueError):
            gronwall_constant(constant_truncated_frag(1.0, None))
        g = gronwall_constant(constant_truncated_frag(1.0, None), R=2.0)
        assert g.value == pytest.approx(admissible_volume(2.0, 2.0), rel=1e-12)


class TestSuite:
    def test_rejects_bad_exponent(self):
        with pytest.raises(ValueError):
            KernelSuite(constant_coag(), zero_frag(), s=2.5)
