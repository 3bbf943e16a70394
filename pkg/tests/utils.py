import contextlib
import os
import pathlib
import tempfile
import unittest

import numpy as np


# Long end-to-end runs are skipped unless DRIFTLAB_SLOW_TESTS is set.
SLOW_TESTS = bool(os.environ.get("DRIFTLAB_SLOW_TESTS"))

slow = unittest.skipUnless(SLOW_TESTS, "set DRIFTLAB_SLOW_TESTS to run slow tests")


class NumericTestCase(unittest.TestCase):
    """
    Base class for tests comparing arrays.

    """

    def assertArrayEqual(self, actual, expected):
        """
        Check that two arrays are identical, bit for bit.

        """
        np.testing.assert_array_equal(actual, expected)

    def assertAllClose(self, actual, expected, rtol=1e-7, atol=0.0):
        """
        Check that two arrays are equal within tolerances.

        """
        np.testing.assert_allclose(actual, expected, rtol=rtol, atol=atol)

    def assertFinite(self, actual):
        """
        Check that an array holds only finite values.

        """
        self.assertTrue(np.all(np.isfinite(actual)), f"non-finite values: {actual}")


@contextlib.contextmanager
def temp_dir():
    """
    Yield a temporary directory as a :class:`~pathlib.Path`.

    """
    with tempfile.TemporaryDirectory() as name:
        yield pathlib.Path(name)
