import numpy as np
import pytest

from lsnn.problems import ProblemSpec


def _pts(x):
    x = np.asarray(x, dtype=np.float64)
    return x.reshape(1, -1) if x.ndim == 1 else x


def make_synthetic_spec(gamma=0.0, f=1.0, g=0.0) -> ProblemSpec:
    """Vertical-advection test problem on the unit square: beta=(0,1), no jump."""

    def beta(x):
        x = _pts(x)
        b = np.zeros_like(x)
        b[:, 1] = 1.0
        return b

    def const(c):
        def fn(x):
            return np.full(len(_pts(x)), float(c))
        return fn

    def exact(x):
        return _pts(x)[:, 1]

    def far(x):
        return np.full(len(_pts(x)), np.inf)

    def one_side(x):
        return np.ones(len(_pts(x)), dtype=int)

    return ProblemSpec(0, 2, beta, const(gamma), const(f), const(g), exact,
                       far, one_side, name="synthetic vertical advection")


@pytest.fixture
def synthetic_spec():
    return make_synthetic_spec()
