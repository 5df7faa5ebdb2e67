import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from rydion.constants import E_CHARGE, K_COULOMB
from rydion.trap import (SingularConfigurationError, TrapInstabilityError, TrapParams,
                         char_lengths, field_norm_derivatives, field_norm_sq, field_norm_sq_3d,
                         ion_field, mathieu_exponent, rf_crossover_distance, rf_field,
                         secular_frequency, secular_frequency_lowest_order, static_field)
from rydion.units import ScaledUnits

TWO_PI = 2 * math.pi
TRAP = TrapParams(TWO_PI * 250e3, TWO_PI * 2.5e6, 0.28)
RF_ONLY = TrapParams(0.0, TWO_PI * 2.5e6, 0.28)


class TestTrapParams:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            TrapParams(0.0, 0.0, 0.1)
        with pytest.raises(ValueError):
            TrapParams(0.0, 1e6, 0.95)

    def test_a_parameter(self):
        assert TRAP.a == pytest.approx(-2 * TRAP.omega_i**2 / TRAP.Omega_rf**2)

    def test_unstable_point_flagged(self):
        assert not TrapParams(TWO_PI * 1.5e6, TWO_PI * 2.5e6, 0.1).is_stable()


class TestFields:
    def test_static_field_vanishes_at_centre(self, ion):
        assert np.all(static_field((0, 0, 0), TRAP, ion) == 0)

    def test_static_field_cancels_ion_at_axial_length(self, ion):
        ell_z = char_lengths(TRAP, ion)["ell_z"]
        r = (0.0, 0.0, ell_z)
        total = static_field(r, TRAP, ion) + ion_field(r)
        assert abs(total[2]) < 1e-10 * abs(ion_field(r)[2])

    def test_static_transverse_to_axial_ratio(self, ion):
        x = 3e-6
        ratio = static_field((x, 0, 0), TRAP, ion)[0] / static_field((0, 0, x), TRAP, ion)[2]
        assert ratio == pytest.approx(-0.5, rel=1e-14)

    def test_rf_zero_at_quarter_period(self, ion):
        t = math.pi / (2 * TRAP.Omega_rf)
        assert np.allclose(rf_field((1e-6, 2e-6, 3e-6), t, TRAP, ion), 0, atol=1e-6)

    def test_rf_has_no_axial_component(self, ion):
        rng = np.random.default_rng(1)
        for r, t in zip(rng.normal(size=(20, 3)) * 1e-6, rng.uniform(0, 1e-6, 20)):
            assert rf_field(r, t, TRAP, ion)[2] == 0

    def test_crossover_distance(self, ion):
        assert rf_crossover_distance(RF_ONLY, ion) == pytest.approx(2.9e-6, abs=0.1e-6)

    def test_crossover_balances_fields(self, ion):
        r0 = rf_crossover_distance(RF_ONLY, ion)
        peak = abs(rf_field((r0, 0, 0), 0.0, RF_ONLY, ion)[0])
        assert peak == pytest.approx(np.linalg.norm(ion_field((r0, 0, 0))), rel=1e-12)

    def test_static_field_curl_and_divergence_free(self, ion):
        rng = np.random.default_rng(2)
        h = 1e-7
        scale = ion.mass * TRAP.omega_i**2 / E_CHARGE
        for r in rng.normal(size=(10, 3)) * 1e-5:
            J = np.empty((3, 3))
            for k in range(3):
                e = np.zeros(3)
                e[k] = h
                J[:, k] = (static_field(r + e, TRAP, ion) - static_field(r - e, TRAP, ion)) / (2 * h)
            assert abs(np.trace(J)) < 1e-9 * scale
            assert np.abs(J - J.T).max() < 1e-9 * scale

    def test_rf_time_average_vanishes(self, ion):
        # the periodic trapezoid rule is exact for a single harmonic
        r = (1.3e-6, -0.4e-6, 2e-6)
        ts = np.arange(64) * TRAP.period / 64
        for k in (0, 1):
            avg = np.mean([rf_field(r, t, TRAP, ion)[k] for t in ts])
            amp = abs(rf_field(r, 0.0, TRAP, ion)[k])
            assert abs(avg) < 1e-12 * amp


class TestLengths:
    def test_axial_length(self, ion):
        assert char_lengths(TRAP, ion)["ell_z"] == pytest.approx(6.9e-6, abs=0.1e-6)

    def test_transverse_ratio(self, ion):
        ell = char_lengths(TRAP, ion)
        assert ell["ell_perp"] / ell["ell_z"] == pytest.approx(2 ** (2 / 3), rel=1e-15)

    def test_frequency_scaling(self, ion):
        fast = TrapParams(4 * TRAP.omega_i, TWO_PI * 50e6, 0.28)
        ratio = char_lengths(fast, ion)["ell_z"] / char_lengths(TRAP, ion)["ell_z"]
        assert ratio == pytest.approx(4 ** (-2 / 3), rel=1e-12)

    def test_needs_static_confinement(self, ion):
        with pytest.raises(ValueError):
            char_lengths(RF_ONLY, ion)


class TestSecularFrequency:
    def test_quoted_value(self):
        # quoted target; the continued fraction gives 251.451 kHz at q = 0.28
        assert secular_frequency(RF_ONLY) / TWO_PI == pytest.approx(254.089e3, abs=1.0)

    def test_quoted_value_at_matched_q(self):
        trap = TrapParams(0.0, TWO_PI * 2.5e6, 2**1.5 * 250 / 2500)
        assert secular_frequency(trap) / TWO_PI == pytest.approx(254.089e3, abs=1.0)

    def test_floquet_oracle(self):
        beta = mathieu_exponent(0.0, 0.28)
        assert beta == pytest.approx(oracles.mathieu_beta_floquet(0.0, 0.28), rel=1e-6)
        assert beta == pytest.approx(oracles.rk4_monodromy_beta(0.0, 0.28), rel=1e-6)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-0.05, 0.05), st.floats(0.05, 0.6))
    def test_floquet_oracle_random_points(self, a, q):
        if a + q * q / 2 <= 0.002:
            return
        try:
            beta = mathieu_exponent(a, q)
        except TrapInstabilityError:
            return
        assert beta == pytest.approx(oracles.mathieu_beta_floquet(a, q), rel=1e-6)

    def test_small_q_limit(self):
        trap = TrapParams(0.0, TWO_PI * 2.5e6, 0.01)
        assert secular_frequency(trap) == pytest.approx(secular_frequency_lowest_order(trap), rel=1e-4)

    def test_monotonic_in_q(self):
        qs = np.linspace(0.05, 0.4, 71)
        w = [secular_frequency(TrapParams(0.0, 1.0, q)) for q in qs]
        assert np.all(np.diff(w) > 0)

    def test_instability_raised(self):
        with pytest.raises(TrapInstabilityError):
            mathieu_exponent(0.0, 0.95)


class TestFieldNorm:
    def test_coulomb_limit(self, ion):
        d = 1.2e-6
        f = field_norm_sq(0.0, 0.0, 0.0, d, None, ion)
        assert f == pytest.approx((E_CHARGE * K_COULOMB / d**2) ** 2, rel=1e-14)

    def test_zero_trap_equals_coulomb(self, ion):
        d = 0.8e-6
        off = TrapParams(0.0, 1.0, 0.0)
        assert field_norm_sq(0, 0, 0.3, d, off, ion) == pytest.approx(field_norm_sq(0, 0, 0, d, None, ion))

    def test_matches_3d_field(self, ion):
        rng = np.random.default_rng(3)
        for xa, xi, t in zip(rng.normal(0, 50e-9, 10), rng.normal(0, 50e-9, 10), rng.uniform(0, 1e-6, 10)):
            d = 1e-6
            f3 = field_norm_sq_3d((d + xa, 0, 0), (xi, 0, 0), t, TRAP, ion)
            assert field_norm_sq(xa, xi, t, d, TRAP, ion) == pytest.approx(f3, rel=1e-12)

    def test_singular_configuration(self, ion):
        with pytest.raises(SingularConfigurationError):
            field_norm_sq(0.0, 1e-6, 0.0, 1e-6, TRAP, ion)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.5e-6, 3e-6), st.floats(0.0, 1.0))
    def test_periodic_in_time(self, ion, d, phase):
        t = phase * TRAP.period
        a = field_norm_sq(20e-9, -10e-9, t, d, TRAP, ion)
        b = field_norm_sq(20e-9, -10e-9, t + TRAP.period, d, TRAP, ion)
        assert a == pytest.approx(b, rel=1e-12)

    @settings(max_examples=10, deadline=None)
    @given(st.floats(0.6e-6, 3e-6), st.floats(0.0, 1.0))
    def test_derivatives_match_high_precision_differences(self, ion, d, phase):
        t = phase * RF_ONLY.period
        table = field_norm_derivatives(d, t, RF_ONLY, ion, max_order=3)
        fun = lambda xi, xa: field_norm_sq(xa, xi, t, d, RF_ONLY, ion)
        f0 = table[(0, 0)]
        for (j, k), v in table.items():
            ref = oracles.mp_partial(fun, j, k)
            # tiny absolute floor for entries that cancel to near zero
            assert abs(v - ref) <= 1e-6 * abs(ref) + 1e-12 * f0 / d ** (j + k), (j, k, v, ref)


class TestScaledUnits:
    def test_round_trip(self, ion, li7):
        u = ScaledUnits.build(ion, li7, TWO_PI * 250e3, TWO_PI * 200e3, TWO_PI * 2.5e6)
        for x in (1e-9, 3.3e-7, 2e-6):
            assert u.from_length(u.to_length(x)) == pytest.approx(x, rel=1e-12)
        assert u.from_energy(u.to_energy(1.7e-30)) == pytest.approx(1.7e-30, rel=1e-12)
        assert u.from_tau(u.to_tau(1.2e-5)) == pytest.approx(1.2e-5, rel=1e-12)
        assert u.length_unit > 0 and u.energy_unit > 0 and u.E_star > 0

    def test_betas_reproduce_field_norm(self, ion, li7):
        u = ScaledUnits.build(ion, li7, TRAP.omega_i, TWO_PI * 200e3, TRAP.Omega_rf)
        betas = u.betas(ion, TRAP.omega_i)
        for d, t in ((1e-6, 0.0), (0.7e-6, 1.3e-7), (2.5e-6, 3.1e-7)):
            fbar = u.scaled_field_norm(d / u.length_unit, TRAP.Omega_rf * t, TRAP.q, betas)
            f = fbar * u.field_unit**2
            assert f == pytest.approx(field_norm_sq(0, 0, t, d, TRAP, ion), rel=1e-10)
