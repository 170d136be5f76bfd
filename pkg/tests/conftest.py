import numpy as np
import pytest

from sgcp._accel import interp_multilinear, sgcp_suffstats, sigmoid, sq_exp_cov, trapezoid_weights


@pytest.fixture(scope="session", autouse=True)
def _warm_accel_kernels():
    """Trigger any JIT compilation once, outside of timed assertions."""
    g = np.linspace(-1.0, 1.0, 9)
    pts = np.array([[0.3], [0.7]])
    sigmoid(np.ascontiguousarray(g))
    interp_multilinear(g, 1, 9, pts)
    sgcp_suffstats(g, trapezoid_weights(1, 9), pts, 1, 9)
    sq_exp_cov(np.linspace(0.0, 1.0, 5)[:, None], 1.0)
