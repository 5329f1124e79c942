"""
Tests for the dfb_simulate.py command-line front end and its exit codes.
"""

import os
import tempfile
import unittest

import pytest

from dfb_simulate import EXIT_OK, EXIT_USAGE, main

SMALL_CONFIG = """\
[simulation]
Lx = 40
Ly = 20
nx = 20
ny = 10
T = 20
dt = 1
K = 1
beta = 1
mu_e = 1
D = 0.005
kappa = 0.01
R = 1
u0x = 0.1
c0_mode = step
c0_value = 0.8
step_xlo = 5
step_xhi = 15
"""


@pytest.mark.integration
class TestMain(unittest.TestCase):
    """
    Test suite for main().
    """

    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        self.config = os.path.join(self.tmp.name, "small.ini")
        with open(self.config, "w", encoding="utf-8") as fh:
            fh.write(SMALL_CONFIG)

    def tearDown(self) -> None:
        self.tmp.cleanup()

    def test_usage_error(self) -> None:
        """
        Test exit code 2 for a missing command and an unparsable sweep list.
        """
        self.assertEqual(main([]), EXIT_USAGE)
        bad_list = ["decay-study", "--kappa", "x", "--m0", "0.4", "--out", self.tmp.name]
        self.assertEqual(main(bad_list), EXIT_USAGE)

    def test_missing_config(self) -> None:
        """
        Test exit code 2 for a configuration file that does not exist.
        """
        missing = os.path.join(self.tmp.name, "absent.ini")
        self.assertEqual(main(["simulate", "--config", missing, "--out", self.tmp.name]), EXIT_USAGE)

    def test_invalid_config(self) -> None:
        """
        Test exit code 2 for a configuration that violates K > 0.
        """
        with open(self.config, "w", encoding="utf-8") as fh:
            fh.write(SMALL_CONFIG.replace("K = 1", "K = -1"))
        self.assertEqual(main(["simulate", "--config", self.config, "--out", self.tmp.name]), EXIT_USAGE)

    def test_simulate(self) -> None:
        """
        Test that simulate writes the series and the requested snapshots.
        """
        out = os.path.join(self.tmp.name, "run")
        code = main(["simulate", "--config", self.config, "--out", out, "--snapshot-stride", "10"])
        self.assertEqual(code, EXIT_OK)
        self.assertTrue(os.path.exists(os.path.join(out, "series.csv")))
        self.assertTrue(os.path.exists(os.path.join(out, "snapshot_20.csv")))

    def test_decay_study_hypothesis(self) -> None:
        """
        Test exit code 2 when a swept M0 is above 1.
        """
        args = ["decay-study", "--config", self.config, "--kappa", "0.01", "--m0", "1.2",
                "--out", self.tmp.name]
        self.assertEqual(main(args), EXIT_USAGE)

    def test_decay_study(self) -> None:
        """
        Test that a passing decay sweep exits 0 and writes the summary.
        """
        out = os.path.join(self.tmp.name, "decay")
        args = ["decay-study", "--config", self.config, "--kappa", "0.01,0.02", "--m0", "0.4", "--out", out]
        self.assertEqual(main(args), EXIT_OK)
        self.assertTrue(os.path.exists(os.path.join(out, "decay_summary.csv")))

    def test_blowup_without_guarantee(self) -> None:
        """
        Test exit code 2 when the mean of c0 does not exceed 1.
        """
        args = ["blowup-study", "--config", self.config, "--out", self.tmp.name]
        self.assertEqual(main(args), EXIT_USAGE)

    def test_perturb_threshold(self) -> None:
        """
        Test exit code 2 when M0 + delta reaches 1.
        """
        self.assertEqual(main(["perturb", "--config", self.config, "--delta", "0.5"]), EXIT_USAGE)

    def test_perturb(self) -> None:
        """
        Test that a small perturbation exits 0 and writes its table.
        """
        out = os.path.join(self.tmp.name, "perturb")
        self.assertEqual(main(["perturb", "--config", self.config, "--delta", "0.01", "--out", out]), EXIT_OK)
        self.assertTrue(os.path.exists(os.path.join(out, "perturbation.csv")))

    def test_mms(self) -> None:
        """
        Test that the default levels pass and the table has its header.
        """
        out = os.path.join(self.tmp.name, "mms")
        self.assertEqual(main(["mms", "--out", out]), EXIT_OK)
        with open(os.path.join(out, "mms.csv"), encoding="utf-8") as fh:
            self.assertEqual(fh.readline().strip(), "operator,level,error,order")

    def test_mms_bad_levels(self) -> None:
        """
        Test exit code 2 for fewer than three levels.
        """
        self.assertEqual(main(["mms", "--levels", "16,32"]), EXIT_USAGE)


if __name__ == '__main__':
    unittest.main()
