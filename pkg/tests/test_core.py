"""
Unit tests for grid geometry, configuration validation and initial state.
"""

import unittest

import numpy as np

from dfbsim.core import (
    SimConfig,
    StaggeredGrid,
    StepProfile,
    apply_no_slip,
    build_grid,
    cell_field,
    init_state,
)
from dfbsim.exceptions import ConfigException


class TestStaggeredGrid(unittest.TestCase):
    """
    Test suite for the MAC grid.
    """

    def setUp(self) -> None:
        self.grid = StaggeredGrid(400.0, 200.0, 100, 50)

    def test_spacing(self) -> None:
        """
        Test hx = hy = 4, the cell measure and |Omega| on the default grid.
        """
        self.assertEqual(self.grid.hx, 4.0)
        self.assertEqual(self.grid.hy, 4.0)
        self.assertEqual(self.grid.cell_measure, 16.0)
        self.assertEqual(self.grid.area, 80000.0)

    def test_field_shapes(self) -> None:
        """
        Test the array layout: c at centers, u on vertical faces, v on horizontal faces.
        """
        self.assertEqual(self.grid.cell_shape, (100, 50))
        self.assertEqual(self.grid.u_shape, (101, 50))
        self.assertEqual(self.grid.v_shape, (100, 51))

    def test_cell_centers(self) -> None:
        """
        Test the first and last cell centers in x and y.
        """
        x, y = self.grid.cell_centers()
        self.assertEqual(x.shape, (100, 50))
        self.assertEqual(x[0, 0], 2.0)
        self.assertEqual(y[0, 0], 2.0)
        self.assertEqual(x[-1, 0], 398.0)
        self.assertEqual(y[0, -1], 198.0)

    def test_face_measures_cover_domain(self) -> None:
        """
        Test that half-measure wall faces make both face families sum to |Omega|.
        """
        self.assertAlmostEqual(float(self.grid.u_face_measure().sum()), self.grid.area)
        self.assertAlmostEqual(float(self.grid.v_face_measure().sum()), self.grid.area)
        self.assertEqual(self.grid.u_face_measure()[0, 0], 8.0)
        self.assertEqual(self.grid.v_face_measure()[0, -1], 8.0)

    def test_geometry_properties_documented(self) -> None:
        """
        Test that every geometry property of the grid carries a docstring.
        """
        for name in ("hx", "hy", "cell_measure", "area", "cell_shape", "u_shape", "v_shape",
                     "x_centers", "y_centers"):
            with self.subTest(name=name):
                doc = getattr(StaggeredGrid, name).__doc__
                self.assertTrue(doc and doc.strip())


class TestSimConfig(unittest.TestCase):
    """
    Test suite for configuration validation.
    """

    def test_defaults_are_decay_setup(self) -> None:
        """
        Test the default 400 x 200 decay setup and that it validates.
        """
        config = SimConfig.decay_defaults()
        self.assertEqual(config.domain_extent, (400.0, 200.0))
        self.assertEqual(config.resolution, (100, 50))
        self.assertEqual(config.end_time, 2000.0)
        self.assertEqual(config.initial_concentration, StepProfile(0.8, 50.0, 150.0))
        self.assertEqual(config.kappa_min, 0.01)
        config.validate()

    def test_rejects_non_positive_extent(self) -> None:
        """
        Test that a zero domain extent is rejected.
        """
        with self.assertRaises(ConfigException):
            SimConfig(domain_extent=(0.0, 200.0)).validate()

    def test_rejects_small_resolution(self) -> None:
        """
        Test that fewer than two cells in a direction is rejected.
        """
        with self.assertRaises(ConfigException):
            SimConfig(resolution=(1, 50)).validate()

    def test_rejects_zero_diffusion(self) -> None:
        """
        Test that D = 0 is rejected.
        """
        with self.assertRaises(ConfigException):
            SimConfig(diffusion=0.0).validate()

    def test_rejects_non_positive_kappa(self) -> None:
        """
        Test that kappa must be bounded below by a positive kappa_1 everywhere.
        """
        kappa = np.full((100, 50), 0.01)
        kappa[3, 4] = 0.0
        with self.assertRaises(ConfigException):
            SimConfig(reaction_rate=kappa).validate()

    def test_rejects_negative_beta(self) -> None:
        """
        Test that a negative Forchheimer coefficient is rejected.
        """
        with self.assertRaises(ConfigException):
            SimConfig(forchheimer=-1.0).validate()

    def test_rejects_step_outside_domain(self) -> None:
        """
        Test that a strip outside (0, Lx) is rejected.
        """
        with self.assertRaises(ConfigException):
            SimConfig(initial_concentration=StepProfile(0.8, 350.0, 450.0)).validate()

    def test_rejects_unknown_dt_mode(self) -> None:
        """
        Test that only adaptive and fixed step modes are accepted.
        """
        with self.assertRaises(ConfigException):
            SimConfig(dt_mode="implicit").validate()

    def test_replace_validates(self) -> None:
        """
        Test that replace returns a validated copy.
        """
        config = SimConfig()
        self.assertEqual(config.replace(reaction_rate=0.02).kappa_min, 0.02)
        with self.assertRaises(ConfigException):
            config.replace(dt=-1.0)

    def test_kappa_bounds_of_array(self) -> None:
        """
        Test kappa_min and kappa_max of a per-cell rate.
        """
        kappa = np.full((100, 50), 0.01)
        kappa[0, 0] = 0.005
        kappa[1, 1] = 0.02
        config = SimConfig(reaction_rate=kappa)
        self.assertEqual(config.kappa_min, 0.005)
        self.assertEqual(config.kappa_max, 0.02)


class TestInitialState(unittest.TestCase):
    """
    Test suite for initial-state assembly.
    """

    def test_step_profile_membership(self) -> None:
        """
        Test that the step covers the cells whose centers lie in [50, 150].

        On an 80 x 40 grid (hx = 5) that is 20 columns, so ||c0||_L1 = 0.8 * 100 * 200.
        """
        config = SimConfig(resolution=(80, 40))
        grid = build_grid(config)
        state = init_state(config, grid)
        self.assertEqual(int(np.count_nonzero(state.c[:, 0])), 20)
        self.assertAlmostEqual(grid.cell_measure * float(state.c.sum()), 16000.0, places=8)
        self.assertEqual(set(np.unique(state.c)), {0.0, 0.8})

    def test_step_includes_centers_on_edges(self) -> None:
        """
        Test that on the 100 x 50 grid the centers x = 50 and x = 150 are inside.
        """
        config = SimConfig()
        state = init_state(config, build_grid(config))
        self.assertEqual(state.c[12, 0], 0.8)
        self.assertEqual(state.c[37, 0], 0.8)
        self.assertEqual(state.c[11, 0], 0.0)
        self.assertEqual(state.c[38, 0], 0.0)

    def test_no_slip_walls(self) -> None:
        """
        Test zero wall faces, interior u0 = 0.1, zero pressure and t = 0.
        """
        config = SimConfig(resolution=(10, 5))
        state = init_state(config, build_grid(config))
        np.testing.assert_array_equal(state.u[0, :], 0.0)
        np.testing.assert_array_equal(state.u[-1, :], 0.0)
        np.testing.assert_array_equal(state.v[:, 0], 0.0)
        np.testing.assert_array_equal(state.v[:, -1], 0.0)
        np.testing.assert_array_equal(state.u[1:-1, :], 0.1)
        np.testing.assert_array_equal(state.p, 0.0)
        self.assertEqual(state.t, 0.0)

    def test_constant_concentration(self) -> None:
        """
        Test a constant initial concentration.
        """
        config = SimConfig(resolution=(10, 5), initial_concentration=1.2)
        state = init_state(config, build_grid(config))
        np.testing.assert_array_equal(state.c, 1.2)

    def test_array_shape_mismatch(self) -> None:
        """
        Test that a c0 array of the wrong shape is rejected.
        """
        config = SimConfig(resolution=(10, 5), initial_concentration=np.zeros((5, 10)))
        with self.assertRaises(ConfigException):
            init_state(config, build_grid(config))

    def test_cell_field_expands_constant(self) -> None:
        """
        Test that a constant becomes a cell field and a wrong shape is rejected.
        """
        grid = StaggeredGrid(1.0, 1.0, 4, 3)
        np.testing.assert_array_equal(cell_field(2.5, grid, "beta"), np.full((4, 3), 2.5))
        with self.assertRaises(ConfigException):
            cell_field(np.ones((3, 4)), grid, "beta")

    def test_apply_no_slip_in_place(self) -> None:
        """
        Test that apply_no_slip zeroes only the wall faces, in place.
        """
        u = np.ones((5, 4))
        v = np.ones((4, 5))
        apply_no_slip(u, v)
        self.assertEqual(float(u.sum()), 12.0)
        self.assertEqual(float(v.sum()), 12.0)

    def test_state_copy_is_independent(self) -> None:
        """
        Test that State.copy does not share arrays.
        """
        config = SimConfig(resolution=(4, 4))
        state = init_state(config, build_grid(config))
        clone = state.copy()
        clone.c[0, 0] = 5.0
        self.assertNotEqual(state.c[0, 0], 5.0)
        self.assertTrue(state.is_finite())


if __name__ == '__main__':
    unittest.main()
