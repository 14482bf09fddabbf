import numpy as np
import pytest

from simplechar import _kernels


def test_numba_and_numpy_scans_agree():
    if _kernels.scan_numba is None:
        pytest.skip("numba not available")
    rng = np.random.default_rng(0)
    a = np.exp(1j * rng.normal(size=40) - 0.01)
    inc = rng.normal(size=(40, 33)) + 1j * rng.normal(size=(40, 33))
    fwd = rng.random(40) < 0.5
    np.testing.assert_allclose(_kernels.scan_numba(a, inc, fwd), _kernels.scan_numpy(a, inc, fwd),
                               rtol=1e-13, atol=1e-13)


def test_scan_recurrence():
    a = np.array([0.5, 2.0])
    inc = np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]])
    out = _kernels.scan_numpy(a, inc, np.array([True, False]))
    np.testing.assert_allclose(out[0], [0, 1, 1.5])
    np.testing.assert_allclose(out[1], [3, 1, 0])
