"""
Unit tests for norms, decay rates, blow-up bounds, the RK4 integrator and check_bounds.
"""

import math
import unittest
from typing import Optional

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from dfbsim.analysis import (
    NormRecord,
    NormSeries,
    Verdict,
    blowup_lower_bound,
    blowup_time,
    check_bounds,
    interpolation_constant,
    late_decay_rate,
    lp_norm,
    mass,
    mass_lower_bound,
    mass_ode_rate,
    normalized_decay_rate,
    numerical_decay_rate,
    ode_integrate,
    theoretical_decay_rate,
)
from dfbsim.core import SimConfig, StaggeredGrid
from dfbsim.exceptions import HypothesisViolation, NoBlowupGuarantee

T_STAR = 100.0 * math.log(6.0)


def record(t: float, l1: float, linf: float = 0.5, mass_value: Optional[float] = None,
           c_min: float = 0.0) -> NormRecord:
    return NormRecord(t=t, l1=l1, l2=l1, linf=linf, mass=l1 if mass_value is None else mass_value,
                      u_l2=0.0, div_residual=0.0, c_min=c_min, c_max=linf)


def exponential_series(rate: float, count: int, dt: float = 1.0, a: float = 1000.0) -> NormSeries:
    series = NormSeries()
    for k in range(count):
        t = k * dt
        value = a * math.exp(-rate * t)
        series.append(record(t, value, linf=value / a))
    return series


class TestNorms(unittest.TestCase):
    """
    Test suite for Lp norms and mass.
    """

    def setUp(self) -> None:
        self.grid = StaggeredGrid(400.0, 200.0, 80, 40)
        self.c = np.zeros(self.grid.cell_shape)
        self.c[10:30, :] = 0.8

    def test_step_norms(self) -> None:
        """
        Test L1, L2 and L-infinity norms of the 0.8 step on [50, 150].
        """
        self.assertAlmostEqual(lp_norm(self.c, self.grid, 1), 16000.0, places=8)
        self.assertAlmostEqual(lp_norm(self.c, self.grid, 2), math.sqrt(0.64 * 20000.0), places=8)
        self.assertEqual(lp_norm(self.c, self.grid, math.inf), 0.8)

    def test_zero_field(self) -> None:
        """
        Test that every norm of the zero field is zero.
        """
        z = np.zeros(self.grid.cell_shape)
        for p in (1, 2, math.inf):
            self.assertEqual(lp_norm(z, self.grid, p), 0.0)

    def test_unsupported_p(self) -> None:
        """
        Test that only p = 1, 2 and infinity are accepted.
        """
        with self.assertRaises(ValueError):
            lp_norm(self.c, self.grid, 3)

    def test_mass_is_signed(self) -> None:
        """
        Test that mass keeps the sign while the L1 norm does not.
        """
        c = np.full(self.grid.cell_shape, -0.5)
        self.assertAlmostEqual(mass(c, self.grid), -40000.0, places=6)
        self.assertAlmostEqual(lp_norm(c, self.grid, 1), 40000.0, places=6)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=32, max_size=32))
    def test_norm_chain(self, values: list) -> None:
        """
        Test ||c||_1 <= |Omega|^(1/2) ||c||_2 <= |Omega| ||c||_inf and ||c||_2^2 <= ||c||_1 ||c||_inf.
        """
        grid = StaggeredGrid(8.0, 4.0, 8, 4)
        c = np.array(values).reshape(grid.cell_shape)
        l1, l2, linf = (lp_norm(c, grid, p) for p in (1, 2, math.inf))
        slack = 1e-12 * (1.0 + grid.area)
        self.assertLessEqual(l1, math.sqrt(grid.area) * l2 + slack)
        self.assertLessEqual(math.sqrt(grid.area) * l2, grid.area * linf + slack)
        self.assertLessEqual(l2 * l2, l1 * linf + slack)
        self.assertLessEqual(l2, interpolation_constant(c, grid, 2) * (1.0 + 1e-12) + slack)


class TestDecayRates(unittest.TestCase):
    """
    Test suite for theoretical and numerical decay rates.
    """

    def test_theoretical_rate(self) -> None:
        """
        Test lambda = kappa (1 - M0) for M0 = 0.8 and M0 = 0.
        """
        self.assertAlmostEqual(theoretical_decay_rate(0.01, 0.8), 0.002, places=15)
        self.assertEqual(theoretical_decay_rate(0.01, 0.0), 0.01)

    def test_theoretical_rate_rejects_m0_at_one(self) -> None:
        """
        Test that M0 = 1 lies outside the decay hypotheses.
        """
        with self.assertRaises(HypothesisViolation):
            theoretical_decay_rate(0.01, 1.0)

    def test_interpolation_constants(self) -> None:
        """
        Test C_p = ||c0||_1^(1/p) ||c0||_inf^(1 - 1/p) for p = 1, 2 and infinity.
        """
        grid = StaggeredGrid(400.0, 200.0, 80, 40)
        c = np.zeros(grid.cell_shape)
        c[10:30, :] = 0.8
        self.assertAlmostEqual(interpolation_constant(c, grid, 1), 16000.0, places=8)
        self.assertAlmostEqual(interpolation_constant(c, grid, 2), math.sqrt(16000.0 * 0.8), places=8)
        self.assertEqual(interpolation_constant(c, grid, math.inf), 0.8)

    def test_lambda_num_exact_on_exponential(self) -> None:
        """
        Test that a log-linear series gives lambda_num = 0.002 everywhere to 1e-10.
        """
        lam = numerical_decay_rate(exponential_series(0.002, 50))
        np.testing.assert_allclose(lam, 0.002, atol=1e-10)

    def test_lambda_num_other_norms(self) -> None:
        """
        Test lambda_num in the L-infinity norm and the rate normalized by lambda.
        """
        lam = numerical_decay_rate(exponential_series(0.01, 20), norm="linf")
        np.testing.assert_allclose(lam, 0.01, atol=1e-10)
        np.testing.assert_allclose(normalized_decay_rate(exponential_series(0.01, 20), 0.01), 1.0, atol=1e-8)

    def test_lambda_num_needs_two_samples(self) -> None:
        """
        Test that a single sample has no rate.
        """
        with self.assertRaises(ValueError):
            numerical_decay_rate(exponential_series(0.01, 1))

    def test_lambda_num_rejects_zero_norm(self) -> None:
        """
        Test that a vanishing norm is rejected and leaves the cached rate undefined.
        """
        series = NormSeries()
        series.append(record(0.0, 1.0))
        series.append(record(1.0, 0.0))
        with self.assertRaises(ValueError):
            numerical_decay_rate(series)
        self.assertTrue(np.all(np.isnan(series.lambda_num)))

    def test_late_rate_window(self) -> None:
        """
        Test that the late rate averages the final tenth of samples with ||c||_inf < 0.05.
        """
        series = exponential_series(0.01, 1000, a=1.0)
        self.assertAlmostEqual(late_decay_rate(series), 0.01, places=10)
        self.assertTrue(math.isnan(late_decay_rate(exponential_series(0.01, 3, a=1.0), linf_threshold=1e-9)))


class TestNormSeries(unittest.TestCase):
    """
    Test suite for the NormSeries container.
    """

    def test_time_must_increase(self) -> None:
        """
        Test that records must arrive in increasing time.
        """
        series = NormSeries()
        series.append(record(0.0, 1.0))
        with self.assertRaises(ValueError):
            series.append(record(0.0, 1.0))

    def test_negative_norm_rejected(self) -> None:
        """
        Test that a negative norm is rejected on append.
        """
        with self.assertRaises(ValueError):
            NormSeries().append(record(0.0, -1.0))

    def test_columns(self) -> None:
        """
        Test column access by name and the error for an unknown column.
        """
        series = exponential_series(0.01, 5)
        self.assertEqual(len(series), 5)
        np.testing.assert_array_equal(series.times, np.arange(5.0))
        with self.assertRaises(KeyError):
            series.column("pressure")


class TestBlowupBounds(unittest.TestCase):
    """
    Test suite for T* and the lower-bound curve.
    """

    def test_blowup_time(self) -> None:
        """
        Test T* = 100 ln 6 for M(0) = 1.2 |Omega| and kappa_1 = 0.01.
        """
        self.assertAlmostEqual(blowup_time(96000.0, 0.01, 80000.0), T_STAR, places=9)
        self.assertAlmostEqual(T_STAR, 179.176, places=3)

    def test_no_guarantee(self) -> None:
        """
        Test that M(0) <= |Omega| gives no blow-up guarantee.
        """
        with self.assertRaises(NoBlowupGuarantee):
            blowup_time(80000.0, 0.01, 80000.0)
        with self.assertRaises(HypothesisViolation):
            blowup_time(64000.0, 0.01, 80000.0)

    def test_lower_bound_values(self) -> None:
        """
        Test that the lower-bound curve starts at the mean of c0 and increases.
        """
        self.assertAlmostEqual(blowup_lower_bound(0.0, 96000.0, 0.01, 80000.0), 1.2, places=12)
        self.assertGreater(blowup_lower_bound(170.0, 96000.0, 0.01, 80000.0), 10.0)
        values = blowup_lower_bound(np.array([0.0, 50.0, 100.0]), 96000.0, 0.01, 80000.0)
        self.assertTrue(np.all(np.diff(values) > 0))

    def test_lower_bound_rejected_past_t_star(self) -> None:
        """
        Test that the lower bound is only defined on [0, T*).
        """
        with self.assertRaises(HypothesisViolation):
            blowup_lower_bound(179.18, 96000.0, 0.01, 80000.0)
        with self.assertRaises(HypothesisViolation):
            blowup_lower_bound(-1.0, 96000.0, 0.01, 80000.0)

    def test_mass_lower_bound(self) -> None:
        """
        Test that the mass lower bound starts at M(0).
        """
        self.assertAlmostEqual(mass_lower_bound(0.0, 96000.0, 0.01, 80000.0), 96000.0, places=6)


class TestODEIntegrate(unittest.TestCase):
    """
    Test suite for the RK4 integrator.
    """

    def test_fourth_order(self) -> None:
        """
        Test y' = -2 y on [0, 2]: halving dt divides the error by about 16.
        """
        errors = []
        for dt in (0.2, 0.1, 0.05):
            sol = ode_integrate(lambda t, y: -2.0 * y, 1.0, (0.0, 2.0), dt)
            errors.append(abs(float(sol.y[-1]) - math.exp(-4.0)))
        self.assertGreaterEqual(errors[0] / errors[1], 14.0)
        self.assertGreaterEqual(errors[1] / errors[2], 14.0)

    def test_lands_on_end(self) -> None:
        """
        Test that the last step is shortened to land on the end time.
        """
        sol = ode_integrate(lambda t, y: np.ones_like(y), [0.0, 1.0], (0.0, 1.0), 0.3)
        self.assertAlmostEqual(float(sol.t[-1]), 1.0, places=14)
        np.testing.assert_allclose(sol.y[-1], [1.0, 2.0])
        self.assertFalse(sol.diverged)

    def test_mass_ode_divergence_matches_t_star(self) -> None:
        """
        Test the mass comparison ODE diverges within 0.5% of T* = 100 ln 6.
        """
        sol = ode_integrate(mass_ode_rate(0.01, 80000.0), 96000.0, (0.0, 200.0), 0.01)
        self.assertTrue(sol.diverged)
        self.assertLessEqual(abs(sol.divergence_time - T_STAR), 0.005 * T_STAR)
        self.assertLess(sol.last_finite_time, sol.divergence_time)

    def test_rejects_non_positive_dt(self) -> None:
        """
        Test that a zero step size is rejected.
        """
        with self.assertRaises(ValueError):
            ode_integrate(lambda t, y: y, 1.0, (0.0, 1.0), 0.0)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(min_value=0.1, max_value=0.99), st.floats(min_value=0.001, max_value=0.05))
    def test_comparison_principle_below_threshold(self, m0_fraction: float, kappa: float) -> None:
        """
        Test that a mass below |Omega| decays under the comparison ODE and never diverges.
        """
        area = 80000.0
        sol = ode_integrate(mass_ode_rate(kappa, area), m0_fraction * area, (0.0, 100.0), 1.0)
        self.assertFalse(sol.diverged)
        self.assertTrue(np.all(np.diff(sol.y) <= 0.0))


class TestCheckBounds(unittest.TestCase):
    """
    Test suite for the verdicts of check_bounds.
    """

    def setUp(self) -> None:
        self.config = SimConfig(resolution=(80, 40))

    def _decay_series(self, rate: float) -> NormSeries:
        series = NormSeries()
        for k in range(11):
            t = 10.0 * k
            factor = math.exp(-rate * t)
            series.append(NormRecord(t, 16000.0 * factor, math.sqrt(12800.0) * factor, 0.8 * factor,
                                     16000.0 * factor, 0.0, 0.0, 0.0, 0.8 * factor))
        return series

    def test_decay_pass(self) -> None:
        """
        Test a series decaying faster than lambda = 0.002 against every verdict.
        """
        report = check_bounds(self._decay_series(0.003), self.config)
        self.assertEqual(report.decay, Verdict.PASS)
        self.assertEqual(report.max_principle, Verdict.PASS)
        self.assertEqual(report.lower_bound, Verdict.NOT_APPLICABLE)
        self.assertEqual(report.blowup, Verdict.NOT_APPLICABLE)
        self.assertAlmostEqual(report.lambda_theory, 0.002, places=15)
        self.assertTrue(report.passed)

    def test_decay_fail_when_too_slow(self) -> None:
        """
        Test that a series decaying slower than lambda fails the envelope.
        """
        report = check_bounds(self._decay_series(0.0005), self.config)
        self.assertEqual(report.decay, Verdict.FAIL)
        self.assertFalse(report.passed)
        self.assertTrue(report.failures)

    def test_max_principle_fail(self) -> None:
        """
        Test that one record below zero fails the maximum principle.
        """
        series = self._decay_series(0.003)
        series.records[3] = NormRecord(30.0, 1.0, 1.0, 0.81, 1.0, 0.0, 0.0, -1e-6, 0.81)
        report = check_bounds(series, self.config)
        self.assertEqual(report.max_principle, Verdict.FAIL)

    def test_decay_not_applicable_at_m0_one(self) -> None:
        """
        Test that M0 = 1 makes the decay verdict NOT-APPLICABLE.
        """
        series = NormSeries()
        series.append(NormRecord(0.0, 80000.0, 400.0, 1.0, 80000.0, 0.0, 0.0, 1.0, 1.0))
        report = check_bounds(series, self.config)
        self.assertEqual(report.decay, Verdict.NOT_APPLICABLE)
        self.assertIsNone(report.lambda_theory)

    def test_blowup_verdicts(self) -> None:
        """
        Test a series following the uniform logistic solution from c0 = 1.2.
        """
        config = self.config.replace(initial_concentration=1.2)
        series = NormSeries()
        for t in np.arange(0.0, 179.0, 2.0):
            c = 1.2 / (1.2 - 0.2 * math.exp(0.01 * t))
            series.append(NormRecord(float(t), 80000.0 * c, math.sqrt(80000.0) * c, c,
                                     80000.0 * c, 0.0, 0.0, c, c))
        series.blowup_time = T_STAR
        report = check_bounds(series, config)
        self.assertEqual(report.lower_bound, Verdict.PASS)
        self.assertEqual(report.blowup, Verdict.PASS)
        self.assertEqual(report.decay, Verdict.NOT_APPLICABLE)
        self.assertEqual(report.max_principle, Verdict.NOT_APPLICABLE)
        self.assertAlmostEqual(report.t_star_theory, T_STAR, places=9)

    def test_blowup_fail_without_event(self) -> None:
        """
        Test that mean c0 > 1 without a detected blow-up fails the blow-up verdict.
        """
        config = self.config.replace(initial_concentration=1.2)
        series = NormSeries()
        series.append(NormRecord(0.0, 96000.0, math.sqrt(80000.0) * 1.2, 1.2, 96000.0, 0.0, 0.0, 1.2, 1.2))
        report = check_bounds(series, config)
        self.assertEqual(report.blowup, Verdict.FAIL)

    def test_empty_series(self) -> None:
        """
        Test that an empty series is rejected.
        """
        with self.assertRaises(ValueError):
            check_bounds(NormSeries(), self.config)


if __name__ == '__main__':
    unittest.main()
